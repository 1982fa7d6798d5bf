#include <doctest.h>

#include <cstdio>

#include "beliefagg/io.hpp"
#include "helpers.hpp"

using namespace beliefagg;

TEST_CASE("dense model round-trips through JSON") {
  auto m = testutil::random_model(3, 2, 2, 0.95, 51);
  json j = model_to_json(*m);
  auto back = model_from_json(j);
  CHECK(back->num_states() == 3);
  CHECK(back->discount() == doctest::Approx(0.95));
  for (int i = 0; i < 3; ++i)
    for (int u = 0; u < 2; ++u)
      for (int k = 0; k < 3; ++k) {
        CHECK(back->transition(i, u, k) == m->transition(i, u, k));
        CHECK(back->cost(i, u, k) == m->cost(i, u, k));
      }
  for (int z = 0; z < 2; ++z)
    for (int k = 0; k < 3; ++k)
      for (int u = 0; u < 2; ++u)
        CHECK(back->observation_prob(z, k, u) == m->observation_prob(z, k, u));
}

TEST_CASE("recovery parameters round-trip with every weight") {
  RecoveryParams p;
  p.replicas = 3;
  p.adjacency = {{1}, {0, 2}, {1}};
  p.base_compromise_rate = 0.15;
  p.intrusion_cost_weight = 2.5;
  p.recovery_cost_weight = 0.5;
  p.recovery_bonus_weight = 0.25;
  p.discount = 0.9;
  RecoveryParams q = recovery_params_from_json(recovery_params_to_json(p));
  CHECK(q.replicas == p.replicas);
  CHECK(q.adjacency == p.adjacency);
  CHECK(q.base_compromise_rate == p.base_compromise_rate);
  CHECK(q.obs_safe == p.obs_safe);
  CHECK(q.obs_compromised == p.obs_compromised);
  CHECK(q.intrusion_cost_weight == p.intrusion_cost_weight);
  CHECK(q.recovery_cost_weight == p.recovery_cost_weight);
  CHECK(q.recovery_bonus_weight == p.recovery_bonus_weight);
  CHECK(q.discount == p.discount);

  SUBCASE("betabin shortcut fields rebuild the distributions") {
    json j = {{"replicas", 1}, {"betabin_safe", {0.7, 3.0}}, {"betabin_compromised", {1.0, 0.7}}};
    RecoveryParams r = recovery_params_from_json(j);
    CHECK(r.obs_safe == betabin_pmf(7, 0.7, 3.0));
    CHECK(r.obs_compromised == betabin_pmf(7, 1.0, 0.7));
  }
}

TEST_CASE("generator documents rebuild the factored model") {
  json j = {{"generator", "recovery"}, {"params", {{"replicas", 2}}}};
  auto m = model_from_json(j);
  CHECK(m->num_states() == 4);
  CHECK(m->num_observations() == 64);
  CHECK_THROWS_AS(model_from_json(json{{"generator", "unknown"}}), ConfigError);
}

TEST_CASE("solved bundles round-trip exactly") {
  RecoveryParams params;
  params.replicas = 1;
  auto model = build_recovery_pomdp(params);
  auto bundle = solve_aggregate(*model, FeatureSpace::identity(2), 7, 1e-4,
                                AggregateMode::Exact);
  json j = bundle_to_json(bundle);
  BasePolicyBundle back = bundle_from_json(j);
  CHECK(back.mdp.value == bundle.mdp.value);
  CHECK(back.mdp.policy == bundle.mdp.policy);
  CHECK(back.mdp.stage_cost == bundle.mdp.stage_cost);
  CHECK(back.mdp.alpha == bundle.mdp.alpha);
  REQUIRE(back.mdp.rows.size() == bundle.mdp.rows.size());
  for (size_t r = 0; r < back.mdp.rows.size(); ++r) CHECK(back.mdp.rows[r] == bundle.mdp.rows[r]);
  CHECK(back.reps->size() == bundle.reps->size());
  Belief b = {0.31, 0.69};
  CHECK(back.value(b) == bundle.value(b));
  CHECK(back.control(b) == bundle.control(b));
  CHECK_THROWS_AS(bundle_from_json(json{{"format", "other"}}), ConfigError);
}

TEST_CASE("file helpers and hashing") {
  std::string path = "io_test_tmp.json";
  json j = {{"a", 1}, {"b", {1, 2, 3}}};
  save_json_file(path, j);
  CHECK(load_json_file(path) == j);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_json_file("does_not_exist.json"), ConfigError);

  std::string bad = "bad_tmp.json";
  {
    std::ofstream out(bad);
    out << "{not json";
  }
  CHECK_THROWS_AS(load_json_file(bad), ConfigError);
  std::remove(bad.c_str());

  CHECK(stable_hash("") == 0xcbf29ce484222325ull);
  CHECK(stable_hash("abc") == stable_hash("abc"));
  CHECK(stable_hash("abc") != stable_hash("abd"));
}
