#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "beliefagg/aggregation.hpp"
#include "beliefagg/model.hpp"
#include "beliefagg/rollout.hpp"

namespace beliefagg {

/// Environment that may swap its parameters at a fixed step (the
/// non-stationary scenarios). A stationary environment has pre == post.
struct StagedModel {
  std::shared_ptr<const PomdpModel> pre;
  std::shared_ptr<const PomdpModel> post;
  long switch_step = 0;

  static StagedModel stationary(std::shared_ptr<const PomdpModel> m) {
    StagedModel s;
    s.pre = m;
    s.post = std::move(m);
    s.switch_step = 0;
    return s;
  }

  const std::shared_ptr<const PomdpModel>& at(long k) const {
    return k < switch_step ? pre : post;
  }
  bool stationary_env() const { return pre == post; }
};

struct PolicyEvalStats {
  double mean = 0.0;
  double stddev = 0.0;
  double std_error = 0.0;
  long episodes = 0;
  double truncation_bound = 0.0;
  std::vector<double> episode_costs;
};

/// Policy under evaluation: control as a function of (belief, step index).
using TimedPolicy = std::function<int(const Belief&, long)>;

/// Monte Carlo policy evaluation in the closed loop with exact belief
/// updates. The accumulated objective is the discounted sum of expected
/// stage costs ĝ(b_k, u_k) along the sampled trajectory, which estimates the
/// same quantity as realized costs with lower variance. Deterministic given
/// the seed; episodes are independent streams reduced in index order.
inline PolicyEvalStats evaluate_policy_mc(const StagedModel& env, const TimedPolicy& policy,
                                          const Belief& b0, long episodes, long horizon,
                                          uint64_t seed, int threads = 1) {
  PolicyEvalStats stats;
  stats.episodes = episodes;
  stats.episode_costs.assign(episodes, 0.0);
  if (episodes == 0) return stats;

  BeliefDynamics dyn_pre(*env.pre);
  std::optional<BeliefDynamics> dyn_post_store;
  if (env.post != env.pre) dyn_post_store.emplace(*env.post);
  const BeliefDynamics* dyn_post = dyn_post_store ? &*dyn_post_store : &dyn_pre;

  int n = dyn_pre.n;
  parallel_for(episodes, threads, [&](long e) {
    Rng rng = make_stream(seed, {0xe9150de, (uint64_t)e});
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    thread_local Belief b;
    thread_local std::vector<double> prior, lik;
    b.assign(b0.begin(), b0.end());
    prior.resize(n);
    lik.resize(n);
    int state = n - 1;
    {
      double r = unif(rng), acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += b0[i];
        if (r < acc) {
          state = i;
          break;
        }
      }
    }
    double disc = 1.0, total = 0.0;
    for (long k = 0; k < horizon; ++k) {
      const BeliefDynamics& dyn = k < env.switch_step ? dyn_pre : *dyn_post;
      int u = policy(b, k);
      total += disc * dyn.stage_cost(b.data(), u);
      TransitionSample smp = dyn.model->sample_step(state, u, rng);
      dyn.propagate(b.data(), u, prior.data());
      double norm = dyn.condition(prior.data(), u, smp.observation, b.data(), lik.data());
      if (norm <= 0.0) std::copy(prior.begin(), prior.end(), b.begin());
      state = smp.next_state;
      disc *= dyn.alpha;
    }
    stats.episode_costs[e] = total;
  });

  double sum = 0.0;
  for (double c : stats.episode_costs) sum += c;
  stats.mean = sum / episodes;
  double var = 0.0;
  for (double c : stats.episode_costs) var += (c - stats.mean) * (c - stats.mean);
  stats.stddev = episodes > 1 ? std::sqrt(var / (episodes - 1)) : 0.0;
  stats.std_error = episodes > 0 ? stats.stddev / std::sqrt((double)episodes) : 0.0;
  stats.truncation_bound = std::pow(env.post->discount(), (double)horizon) *
                           env.post->max_stage_cost() / (1.0 - env.post->discount());
  return stats;
}

inline TimedPolicy make_base_policy(const BasePolicyBundle& bundle) {
  return [&bundle](const Belief& b, long) { return bundle.control(b); };
}

/// Rollout policy that plans on the environment's active model (the bundle
/// stays fixed, which is the adaptation setting when the model changed).
inline TimedPolicy make_rollout_policy(const RolloutPlanner& planner) {
  return [&planner](const Belief& b, long) { return planner.control(b); };
}

inline TimedPolicy make_switched_rollout_policy(const RolloutPlanner& pre,
                                                const RolloutPlanner& post, long switch_step) {
  return [&pre, &post, switch_step](const Belief& b, long k) {
    return (k < switch_step ? pre : post).control(b);
  };
}

/// Uniform probe grid on the 1-simplex: beliefs (1 − t, t).
inline std::vector<Belief> line_probe_grid(long points) {
  std::vector<Belief> probes;
  probes.reserve(points);
  for (long i = 0; i < points; ++i) {
    double t = points == 1 ? 0.0 : double(i) / double(points - 1);
    probes.push_back({1.0 - t, t});
  }
  return probes;
}

/// Dirichlet(1,…,1) probe sample for higher-dimensional simplices.
inline std::vector<Belief> random_probe_grid(int n, long points, uint64_t seed) {
  std::vector<Belief> probes;
  probes.reserve(points);
  std::exponential_distribution<double> expo(1.0);
  for (long i = 0; i < points; ++i) {
    Rng rng = make_stream(seed, {0x980be, (uint64_t)i});
    Belief b(n);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      b[j] = expo(rng);
      sum += b[j];
    }
    for (double& v : b) v /= sum;
    probes.push_back(std::move(b));
  }
  return probes;
}

struct BoundExperimentRow {
  int rho = 0;
  double epsilon_hat = 0.0;
  double bound = 0.0;
  double observed_error = 0.0;
};

/// Error-bound experiment: for each ρ solve an identity-aggregation
/// bundle and compare ε̂/(1−α) with the observed sup error against the fine
/// oracle over the probe grid.
inline std::vector<BoundExperimentRow> bound_experiment(
    const PomdpModel& model, const std::vector<int>& rho_list, const BasePolicyBundle& oracle,
    const std::vector<Belief>& probes, double vi_threshold, int threads = 1) {
  auto oracle_fn = [&oracle](const Belief& b) { return oracle.value(b); };
  std::vector<BoundExperimentRow> rows;
  rows.reserve(rho_list.size());
  for (int rho : rho_list) {
    BasePolicyBundle bundle = solve_aggregate(model, FeatureSpace::identity(model.num_states()),
                                              rho, vi_threshold, AggregateMode::Exact, 0, 0,
                                              threads);
    ErrorBoundReport rep = epsilon_and_bound(bundle, oracle_fn, probes);
    rows.push_back({rho, rep.epsilon_hat, rep.bound, rep.observed_error});
  }
  return rows;
}

struct ProbeImprovement {
  Belief probe;
  double base_mean = 0.0, base_se = 0.0;
  double rollout_mean = 0.0, rollout_se = 0.0;
};

struct ImprovementReport {
  std::vector<ProbeImprovement> probes;
  double improved_fraction = 0.0;  // J_μ̃ ≤ J_μ within a 2σ margin
  double max_rollout_cost = 0.0;
};

/// Policy-improvement check: Monte Carlo estimates of the base and rollout policy
/// costs at each probe belief.
inline ImprovementReport verify_policy_improvement(std::shared_ptr<const PomdpModel> model,
                                                   const BasePolicyBundle& bundle,
                                                   const RolloutConfig& cfg,
                                                   const std::vector<Belief>& probes,
                                                   long episodes, long horizon, uint64_t seed,
                                                   int threads = 1) {
  RolloutPlanner planner(model, &bundle, cfg);
  StagedModel env = StagedModel::stationary(model);
  ImprovementReport report;
  long improved = 0;
  for (size_t i = 0; i < probes.size(); ++i) {
    ProbeImprovement pr;
    pr.probe = probes[i];
    PolicyEvalStats base = evaluate_policy_mc(env, make_base_policy(bundle), probes[i], episodes,
                                              horizon, splitmix64(seed + 2 * i), threads);
    PolicyEvalStats roll = evaluate_policy_mc(env, make_rollout_policy(planner), probes[i],
                                              episodes, horizon, splitmix64(seed + 2 * i + 1),
                                              threads);
    pr.base_mean = base.mean;
    pr.base_se = base.std_error;
    pr.rollout_mean = roll.mean;
    pr.rollout_se = roll.std_error;
    double margin = 2.0 * std::sqrt(base.std_error * base.std_error + roll.std_error * roll.std_error);
    if (roll.mean <= base.mean + margin) ++improved;
    report.max_rollout_cost = std::max(report.max_rollout_cost, roll.mean);
    report.probes.push_back(std::move(pr));
  }
  report.improved_fraction = probes.empty() ? 1.0 : double(improved) / probes.size();
  return report;
}

}  // namespace beliefagg
