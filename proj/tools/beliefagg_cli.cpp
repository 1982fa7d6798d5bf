// Experiment runner: solves aggregate belief MDPs and reproduces the
// bound/evaluation/adaptation experiments as seeded CSV/JSON artifacts.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "beliefagg/experiments.hpp"
#include "beliefagg/io.hpp"
#include "beliefagg/recovery.hpp"
#include "beliefagg/rollout.hpp"

namespace fs = std::filesystem;
using namespace beliefagg;

namespace {

struct GlobalOpts {
  std::string config_path;
  uint64_t seed = 0;
  int threads = 1;
  std::string out_dir = ".";
  bool no_timing = false;

  json config;
  uint64_t config_hash = 0;
};

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point t0 = clock::now();
  return std::chrono::duration<double>(clock::now() - t0).count();
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

std::ofstream open_csv(const GlobalOpts& g, const std::string& name, const std::string& header) {
  fs::create_directories(g.out_dir);
  fs::path path = fs::path(g.out_dir) / name;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << header << "\n";
  out << "# config_hash=" << std::hex << g.config_hash << std::dec << " seed=" << g.seed << "\n";
  return out;
}

// --------------------------------------------------------------------------
// Config parsing
// --------------------------------------------------------------------------

json section(const json& cfg, const std::string& key) {
  return cfg.contains(key) ? cfg.at(key) : json::object();
}

std::shared_ptr<const PomdpModel> load_model(const json& cfg) {
  if (!cfg.contains("model")) throw ConfigError("config requires a \"model\" section");
  const json& m = cfg.at("model");
  if (m.contains("path")) return model_from_json(load_json_file(m.at("path").get<std::string>()));
  return model_from_json(m);
}

RecoveryParams require_recovery_params(const json& cfg) {
  const json& m = cfg.at("model");
  if (m.value("generator", "") != "recovery")
    throw ConfigError("this command requires a recovery-generator model");
  return recovery_params_from_json(m.at("params"));
}

FeatureSpace load_feature_space(const json& cfg, const PomdpModel& model) {
  json agg = section(cfg, "aggregation");
  std::string mode = agg.value("features", "identity");
  if (mode == "identity") return FeatureSpace::identity(model.num_states());
  if (mode == "zones") {
    if (!agg.contains("zones")) throw ConfigError("feature mode \"zones\" requires a zone list");
    return zone_feature_space(require_recovery_params(cfg),
                              agg.at("zones").get<std::vector<std::vector<int>>>());
  }
  throw ConfigError("unknown feature mode: " + mode);
}

struct SolveSpec {
  int rho = 1;
  AggregateMode mode = AggregateMode::Exact;
  long nsim = 10'000;
  double capacity = 1e7;
  double vi_threshold = 0.1;
  long max_iterations = 1'000'000;
};

SolveSpec load_solve_spec(const json& cfg) {
  SolveSpec s;
  json agg = section(cfg, "aggregation");
  s.rho = agg.value("rho", s.rho);
  std::string m = agg.value("mode", "exact");
  if (m == "exact")
    s.mode = AggregateMode::Exact;
  else if (m == "sampled")
    s.mode = AggregateMode::Sampled;
  else
    throw ConfigError("unknown aggregation mode: " + m);
  s.nsim = agg.value("nsim", s.nsim);
  s.capacity = agg.value("capacity", s.capacity);
  json sol = section(cfg, "solver");
  s.vi_threshold = sol.value("vi_threshold", s.vi_threshold);
  s.max_iterations = sol.value("max_iterations", s.max_iterations);
  return s;
}

RolloutConfig load_rollout_config(const json& cfg, uint64_t seed) {
  RolloutConfig rc;
  json r = section(cfg, "rollout");
  rc.lookahead = r.value("lookahead", rc.lookahead);
  rc.rollout_horizon = r.value("horizon", rc.rollout_horizon);
  rc.num_sims = r.value("num_sims", rc.num_sims);
  rc.obs_exact_limit = r.value("obs_exact_limit", rc.obs_exact_limit);
  rc.obs_samples = r.value("obs_samples", rc.obs_samples);
  rc.seed = seed;
  return rc;
}

Belief load_initial_belief(const json& cfg, int n) {
  json ev = section(cfg, "evaluation");
  if (ev.contains("initial_belief")) {
    Belief b = ev.at("initial_belief").get<Belief>();
    if ((int)b.size() != n || !is_distribution(b))
      throw ConfigError("initial_belief must be a distribution over the state space");
    return b;
  }
  Belief b(n, 0.0);
  b[0] = 1.0;  // all-safe start in the recovery model
  return b;
}

BasePolicyBundle solve_bundle(const GlobalOpts& g, const std::shared_ptr<const PomdpModel>& model) {
  json ev = section(g.config, "evaluation");
  if (ev.contains("bundle")) return bundle_from_json(load_json_file(ev.at("bundle").get<std::string>()));
  SolveSpec spec = load_solve_spec(g.config);
  auto fs = load_feature_space(g.config, *model);
  auto fsp = std::make_shared<const FeatureSpace>(std::move(fs));
  auto reps = std::make_shared<const RepresentativeBeliefSet>(
      RepresentativeBeliefSet::enumerate(fsp->num_features, spec.rho, spec.capacity));
  BasePolicyBundle bundle;
  bundle.features = fsp;
  bundle.reps = reps;
  bundle.mdp = build_aggregate_mdp(*model, fsp, reps, spec.mode, spec.nsim, g.seed, g.threads);
  value_iteration(bundle.mdp, spec.vi_threshold, spec.max_iterations);
  return bundle;
}

// --------------------------------------------------------------------------
// Verbs
// --------------------------------------------------------------------------

int cmd_solve(const GlobalOpts& g, const std::string& artifact_name) {
  auto model = load_model(g.config);
  double t0 = now_seconds();
  BasePolicyBundle bundle = solve_bundle(g, model);
  double elapsed = now_seconds() - t0;

  fs::create_directories(g.out_dir);
  save_json_file((fs::path(g.out_dir) / artifact_name).string(), bundle_to_json(bundle));

  auto out = open_csv(g, "solve_summary.csv",
                      "num_representatives,vi_iterations,vi_residual,wall_seconds");
  out << bundle.reps->size() << "," << bundle.mdp.vi_iterations << ","
      << format_double(bundle.mdp.vi_residual) << ","
      << (g.no_timing ? std::string() : format_double(elapsed)) << "\n";
  return 0;
}

int cmd_oracle(const GlobalOpts& g) {
  auto model = load_model(g.config);
  json be = section(g.config, "bound_experiment");
  int rho = be.value("oracle_rho", 200);
  double vi_threshold = section(g.config, "solver").value("vi_threshold", 1e-4);
  double capacity = section(g.config, "aggregation").value("capacity", 1e7);
  double t0 = now_seconds();
  BasePolicyBundle oracle =
      oracle_cost_function(*model, rho, vi_threshold, g.threads, capacity);
  double elapsed = now_seconds() - t0;

  fs::create_directories(g.out_dir);
  save_json_file((fs::path(g.out_dir) / "oracle_bundle.json").string(), bundle_to_json(oracle));
  auto out = open_csv(g, "oracle_summary.csv",
                      "rho,num_representatives,vi_iterations,wall_seconds");
  out << rho << "," << oracle.reps->size() << "," << oracle.mdp.vi_iterations << ","
      << (g.no_timing ? std::string() : format_double(elapsed)) << "\n";
  return 0;
}

int cmd_count_representatives(const GlobalOpts& g) {
  json c = section(g.config, "count");
  auto mfs = c.value("m_f_list", std::vector<int>{});
  auto rhos = c.value("rho_list", std::vector<int>{});
  auto out = open_csv(g, "counts.csv", "m_f,rho,count");
  for (int m : mfs)
    for (int rho : rhos)
      out << m << "," << rho << "," << format_double(RepresentativeBeliefSet::count(m, rho))
          << "\n";
  return 0;
}

int cmd_bound_experiment(const GlobalOpts& g) {
  auto model = load_model(g.config);
  json be = section(g.config, "bound_experiment");
  auto rho_list = be.value("rho_list", std::vector<int>{});
  int oracle_rho = be.value("oracle_rho", 200);
  long probe_points = be.value("probe_points", 1001L);
  double vi_threshold = section(g.config, "solver").value("vi_threshold", 1e-4);

  BasePolicyBundle oracle = oracle_cost_function(*model, oracle_rho, vi_threshold, g.threads);
  std::vector<Belief> probes = model->num_states() == 2
                                   ? line_probe_grid(probe_points)
                                   : random_probe_grid(model->num_states(), probe_points, g.seed);
  auto rows = bound_experiment(*model, rho_list, oracle, probes, vi_threshold, g.threads);
  auto out = open_csv(g, "bound_experiment.csv", "rho,epsilon_hat,bound,observed_error");
  for (const auto& r : rows)
    out << r.rho << "," << format_double(r.epsilon_hat) << "," << format_double(r.bound) << ","
        << format_double(r.observed_error) << "\n";
  return 0;
}

int cmd_evaluate(const GlobalOpts& g) {
  auto model = load_model(g.config);
  json ev = section(g.config, "evaluation");
  long episodes = ev.value("episodes", 1000L);
  long horizon = ev.value("horizon", 500L);
  auto policies = ev.value("policies", std::vector<std::string>{"base", "rollout"});
  Belief b0 = load_initial_belief(g.config, model->num_states());

  BasePolicyBundle bundle = solve_bundle(g, model);

  StagedModel env = StagedModel::stationary(model);
  std::shared_ptr<const PomdpModel> post_model = model;
  if (g.config.contains("scenario_switch")) {
    const json& sw = g.config.at("scenario_switch");
    env.switch_step = sw.at("step").get<long>();
    RecoveryParams pre_params = require_recovery_params(g.config);
    RecoveryParams post_params =
        sw.contains("params") ? recovery_params_from_json(sw.at("params"))
                              : ScenarioSwitch::default_delta(pre_params, env.switch_step,
                                                              sw.value("mix", 0.3))
                                    .post_switch_params;
    post_model = build_recovery_pomdp(post_params);
    env.post = post_model;
  }

  RolloutConfig rc = load_rollout_config(g.config, g.seed);
  std::optional<RolloutPlanner> planner_pre, planner_post;

  auto out = open_csv(g, "evaluate.csv",
                      "policy,mean,stddev,std_error,episodes,horizon,truncation_bound");
  for (const std::string& name : policies) {
    TimedPolicy policy;
    if (name == "base") {
      policy = make_base_policy(bundle);
    } else if (name == "rollout") {
      if (!planner_pre) planner_pre.emplace(model, &bundle, rc);
      if (env.stationary_env()) {
        policy = make_rollout_policy(*planner_pre);
      } else {
        // the planner adapts by planning on the post-switch model while the
        // offline bundle stays fixed
        if (!planner_post) planner_post.emplace(post_model, &bundle, rc);
        policy = make_switched_rollout_policy(*planner_pre, *planner_post, env.switch_step);
      }
    } else {
      throw ConfigError("unknown policy: " + name);
    }
    PolicyEvalStats stats =
        evaluate_policy_mc(env, policy, b0, episodes, horizon, g.seed, g.threads);
    if (episodes > 0)
      out << name << "," << format_double(stats.mean) << "," << format_double(stats.stddev) << ","
          << format_double(stats.std_error) << "," << stats.episodes << "," << horizon << ","
          << format_double(stats.truncation_bound) << "\n";
  }
  return 0;
}

int cmd_adaptation(const GlobalOpts& g) {
  auto model = load_model(g.config);
  json ad = section(g.config, "adaptation");
  if (!ad.contains("J1")) throw ConfigError("adaptation requires a reference cost J1");
  double J1 = ad.at("J1").get<double>();
  long episodes = ad.value("episodes", 200L);
  long horizon = section(g.config, "evaluation").value("horizon", 500L);
  auto budgets = ad.value("budgets", std::vector<std::vector<int>>{{1, 0}, {1, 10}, {2, 10}});

  // post-switch model: the scenario the stale policy must adapt to
  RecoveryParams pre_params = require_recovery_params(g.config);
  std::shared_ptr<const PomdpModel> post_model = model;
  if (g.config.contains("scenario_switch")) {
    const json& sw = g.config.at("scenario_switch");
    post_model = build_recovery_pomdp(
        sw.contains("params")
            ? recovery_params_from_json(sw.at("params"))
            : ScenarioSwitch::default_delta(pre_params, 0, sw.value("mix", 0.3))
                  .post_switch_params);
  }

  // bundle solved on the pre-switch model (now stale)
  BasePolicyBundle bundle = solve_bundle(g, model);
  Belief b0 = load_initial_belief(g.config, model->num_states());
  StagedModel env = StagedModel::stationary(post_model);

  PolicyEvalStats base =
      evaluate_policy_mc(env, make_base_policy(bundle), b0, episodes, horizon, g.seed, g.threads);
  double J0 = base.mean;
  if (J0 == J1) throw ConfigError("adaptation metric undefined: J0 equals J1");

  json record;
  record["J0"] = J0;
  record["J1"] = J1;
  record["episodes"] = episodes;
  record["horizon"] = horizon;
  json series = json::array();
  for (const auto& budget : budgets) {
    if (budget.size() != 2) throw ConfigError("each budget must be [lookahead, horizon]");
    RolloutConfig rc = load_rollout_config(g.config, g.seed);
    rc.lookahead = budget[0];
    rc.rollout_horizon = budget[1];
    RolloutPlanner planner(post_model, &bundle, rc);
    double t0 = now_seconds();
    PolicyEvalStats roll = evaluate_policy_mc(env, make_rollout_policy(planner), b0, episodes,
                                              horizon, g.seed, g.threads);
    double elapsed = now_seconds() - t0;
    json point;
    point["lookahead"] = rc.lookahead;
    point["rollout_horizon"] = rc.rollout_horizon;
    point["J_mu"] = roll.mean;
    point["std_error"] = roll.std_error;
    point["A"] = (J0 - roll.mean) / (J0 - J1);
    if (!g.no_timing) point["wall_seconds"] = elapsed;
    series.push_back(point);
  }
  record["series"] = series;
  record["config_hash"] = g.config_hash;
  record["seed"] = g.seed;
  fs::create_directories(g.out_dir);
  save_json_file((fs::path(g.out_dir) / "adaptation.json").string(), record);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"belief aggregation experiment runner"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON experiment config")->required();
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out_dir, "output directory");
  app.add_flag("--no-timing", g.no_timing, "omit wall-time fields for byte-stable reruns");

  auto* solve = app.add_subcommand("solve", "solve the aggregate MDP and write the bundle");
  auto* evaluate = app.add_subcommand("evaluate", "Monte Carlo policy evaluation");
  auto* bound = app.add_subcommand("bound-experiment", "error bound vs observed error per rho");
  auto* adaptation = app.add_subcommand("adaptation", "adaptation metric after a model change");
  auto* count = app.add_subcommand("count-representatives", "representative-set size table");
  auto* oracle = app.add_subcommand("oracle", "fine-grid reference cost function");
  for (auto* sub : {solve, evaluate, bound, adaptation, count, oracle}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    g.config = load_json_file(g.config_path);
    g.config_hash = stable_hash(g.config.dump());
    if (solve->parsed()) return cmd_solve(g, "bundle.json");
    if (evaluate->parsed()) return cmd_evaluate(g);
    if (bound->parsed()) return cmd_bound_experiment(g);
    if (adaptation->parsed()) return cmd_adaptation(g);
    if (count->parsed()) return cmd_count_representatives(g);
    if (oracle->parsed()) return cmd_oracle(g);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CapacityExceededError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return 3;
  } catch (const NonConvergenceError& e) {
    std::cerr << "convergence error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
