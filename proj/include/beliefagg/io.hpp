#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "beliefagg/aggregation.hpp"
#include "beliefagg/model.hpp"
#include "beliefagg/recovery.hpp"

namespace beliefagg {

using nlohmann::json;

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

inline void save_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << "\n";
}

/// FNV-1a over the canonical dump; stable across runs for CSV metadata.
inline uint64_t stable_hash(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Model interchange: dense tables or a named factored-generator reference.
// ---------------------------------------------------------------------------

inline json recovery_params_to_json(const RecoveryParams& p) {
  json j;
  j["replicas"] = p.replicas;
  if (!p.adjacency.empty()) j["adjacency"] = p.adjacency;
  j["base_compromise_rate"] = p.base_compromise_rate;
  j["obs_support"] = p.obs_support;
  j["obs_safe"] = p.obs_safe;
  j["obs_compromised"] = p.obs_compromised;
  j["intrusion_cost_weight"] = p.intrusion_cost_weight;
  j["recovery_cost_weight"] = p.recovery_cost_weight;
  j["recovery_bonus_weight"] = p.recovery_bonus_weight;
  j["discount"] = p.discount;
  return j;
}

inline RecoveryParams recovery_params_from_json(const json& j) {
  RecoveryParams p;
  try {
    p.replicas = j.at("replicas").get<int>();
    if (j.contains("adjacency") && !j["adjacency"].is_string())
      p.adjacency = j["adjacency"].get<std::vector<std::vector<int>>>();
    p.base_compromise_rate = j.value("base_compromise_rate", p.base_compromise_rate);
    p.obs_support = j.value("obs_support", p.obs_support);
    if (j.contains("obs_safe")) p.obs_safe = j["obs_safe"].get<std::vector<double>>();
    if (j.contains("obs_compromised"))
      p.obs_compromised = j["obs_compromised"].get<std::vector<double>>();
    if (j.contains("betabin_safe")) {
      auto v = j["betabin_safe"].get<std::vector<double>>();
      p.obs_safe = betabin_pmf(p.obs_support - 1, v.at(0), v.at(1));
    }
    if (j.contains("betabin_compromised")) {
      auto v = j["betabin_compromised"].get<std::vector<double>>();
      p.obs_compromised = betabin_pmf(p.obs_support - 1, v.at(0), v.at(1));
    }
    p.intrusion_cost_weight = j.value("intrusion_cost_weight", p.intrusion_cost_weight);
    p.recovery_cost_weight = j.value("recovery_cost_weight", p.recovery_cost_weight);
    p.recovery_bonus_weight = j.value("recovery_bonus_weight", p.recovery_bonus_weight);
    p.discount = j.value("discount", p.discount);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad recovery parameters: ") + e.what());
  }
  return p;
}

inline json model_to_json(const DenseModel& m) {
  json j;
  j["n"] = m.num_states();
  j["controls"] = m.num_controls();
  j["observations"] = m.num_observations();
  j["discount"] = m.discount();
  j["transition"] = m.transition_table();
  j["observation"] = m.observation_table();
  j["cost"] = m.cost_table();
  return j;
}

inline std::shared_ptr<const PomdpModel> model_from_json(const json& j) {
  try {
    if (j.contains("generator")) {
      std::string g = j.at("generator").get<std::string>();
      if (g != "recovery") throw ConfigError("unknown generator: " + g);
      return build_recovery_pomdp(recovery_params_from_json(j.at("params")));
    }
    return std::make_shared<DenseModel>(
        j.at("n").get<int>(), j.at("controls").get<int>(), j.at("observations").get<int>(),
        j.at("discount").get<double>(), j.at("transition").get<std::vector<double>>(),
        j.at("observation").get<std::vector<double>>(), j.at("cost").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad model document: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Solved-bundle artifact: header, representative list, CSR transition rows,
// cost table, r*, π*.
// ---------------------------------------------------------------------------

inline json bundle_to_json(const BasePolicyBundle& bundle) {
  const AggregateMdp& mdp = bundle.mdp;
  json j;
  j["format"] = "beliefagg-bundle-v1";
  j["m_f"] = bundle.reps->num_features();
  j["rho"] = bundle.reps->resolution();
  j["controls"] = mdp.num_controls;
  j["alpha"] = mdp.alpha;
  j["mode"] = mdp.mode == AggregateMode::Exact ? "exact" : "sampled";
  j["nsim"] = mdp.nsim;
  j["vi_iterations"] = mdp.vi_iterations;

  json fs;
  fs["state_to_feature"] = bundle.features->state_to_feature;
  fs["disagg"] = bundle.features->disagg;
  j["feature_space"] = fs;

  // representatives are reproducible from (m_f, rho); store the count only
  j["num_states"] = mdp.num_states();

  std::vector<long> indptr{0};
  std::vector<long> indices;
  std::vector<double> probs;
  for (const auto& row : mdp.rows) {
    for (const auto& [t, p] : row) {
      indices.push_back(t);
      probs.push_back(p);
    }
    indptr.push_back((long)indices.size());
  }
  j["transition_indptr"] = indptr;
  j["transition_indices"] = indices;
  j["transition_probs"] = probs;
  j["stage_cost"] = mdp.stage_cost;
  j["value"] = mdp.value;
  j["policy"] = mdp.policy;
  return j;
}

inline BasePolicyBundle bundle_from_json(const json& j, double capacity = 1e7) {
  try {
    if (j.value("format", "") != "beliefagg-bundle-v1")
      throw ConfigError("not a beliefagg bundle artifact");
    BasePolicyBundle bundle;
    auto s2f = j.at("feature_space").at("state_to_feature").get<std::vector<int>>();
    auto fs = FeatureSpace::grouping((int)s2f.size(), s2f);
    fs.disagg = j.at("feature_space").at("disagg").get<std::vector<std::vector<double>>>();
    bundle.features = std::make_shared<const FeatureSpace>(std::move(fs));
    bundle.reps = std::make_shared<const RepresentativeBeliefSet>(
        RepresentativeBeliefSet::enumerate(j.at("m_f").get<int>(), j.at("rho").get<int>(),
                                           capacity));
    AggregateMdp& mdp = bundle.mdp;
    mdp.features = bundle.features;
    mdp.reps = bundle.reps;
    mdp.num_controls = j.at("controls").get<int>();
    mdp.alpha = j.at("alpha").get<double>();
    mdp.mode = j.value("mode", "exact") == "exact" ? AggregateMode::Exact : AggregateMode::Sampled;
    mdp.nsim = j.value("nsim", 0L);
    mdp.vi_iterations = j.value("vi_iterations", 0L);
    auto indptr = j.at("transition_indptr").get<std::vector<long>>();
    auto indices = j.at("transition_indices").get<std::vector<long>>();
    auto probs = j.at("transition_probs").get<std::vector<double>>();
    mdp.rows.resize(indptr.size() - 1);
    for (size_t r = 0; r + 1 < indptr.size(); ++r)
      for (long k = indptr[r]; k < indptr[r + 1]; ++k)
        mdp.rows[r].emplace_back((int)indices[k], probs[k]);
    mdp.stage_cost = j.at("stage_cost").get<std::vector<double>>();
    mdp.value = j.at("value").get<std::vector<double>>();
    mdp.policy = j.at("policy").get<std::vector<int>>();
    mdp.solved = !mdp.value.empty();
    return bundle;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad bundle artifact: ") + e.what());
  }
}

inline json particles_to_json(const std::vector<int>& particles) { return json(particles); }

}  // namespace beliefagg
