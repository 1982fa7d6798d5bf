#include <doctest.h>

#include "beliefagg/recovery.hpp"

using namespace beliefagg;

TEST_CASE("beta-binomial alert distributions") {
  auto safe = betabin_pmf(7, 0.7, 3.0);
  auto comp = betabin_pmf(7, 1.0, 0.7);
  CHECK(safe[0] == doctest::Approx(0.4204).epsilon(1e-3));
  CHECK(comp[0] == doctest::Approx(0.0909).epsilon(1e-3));
  CHECK(comp[7] == doctest::Approx(0.2147).epsilon(1e-3));
  double ssum = 0.0, csum = 0.0;
  for (int z = 0; z < 8; ++z) {
    ssum += safe[z];
    csum += comp[z];
  }
  CHECK(ssum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(csum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(betabin_pmf(7, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(betabin_pmf(-1, 1.0, 1.0), ConfigError);
}

TEST_CASE("full alert distributions match the reference bars") {
  const double safe_ref[8] = {
      0.4204381193405085,   0.22890519830761025, 0.14592706392110147,
      0.09381025537785098,  0.05784965748300809, 0.03262720682041655,
      0.015497923239697894, 0.0049445755098083705};
  const double comp_ref[8] = {
      0.0909090909090911,  0.09497964721845345, 0.09997857601942456,
      0.10636018725470703, 0.1149839862213048,  0.12775998469033872,
      0.15030586434157509, 0.21472266334510712};
  RecoveryParams params;
  for (int z = 0; z < 8; ++z) {
    CHECK(std::abs(params.obs_safe[z] - safe_ref[z]) < 5e-4);
    CHECK(std::abs(params.obs_compromised[z] - comp_ref[z]) < 5e-4);
  }
}

TEST_CASE("single-replica transition law") {
  RecoveryParams params;
  params.replicas = 1;
  auto m = build_recovery_pomdp(params);
  CHECK(m->num_states() == 2);
  CHECK(m->num_controls() == 2);
  CHECK(m->num_observations() == 8);
  // no-op: safe compromises at the base rate, compromised absorbs
  CHECK(m->transition(0, 0, 1) == doctest::Approx(0.2));
  CHECK(m->transition(0, 0, 0) == doctest::Approx(0.8));
  CHECK(m->transition(1, 0, 1) == doctest::Approx(1.0));
  // recover: next state is surely safe
  CHECK(m->transition(1, 1, 0) == doctest::Approx(1.0));
  CHECK(m->transition(0, 1, 0) == doctest::Approx(1.0));
}

TEST_CASE("compromise rate scales with hostile neighbors") {
  RecoveryParams params;
  params.replicas = 2;
  auto m = build_recovery_pomdp(params);
  // state (1,0): replica 1 safe with one compromised neighbor -> 0.4
  // j must keep replica 0 compromised under no-op
  CHECK(m->transition(0b01, 0, 0b11) == doctest::Approx(0.4));
  CHECK(m->transition(0b01, 0, 0b01) == doctest::Approx(0.6));
  CHECK(m->transition(0b01, 0, 0b00) == doctest::Approx(0.0));

  SUBCASE("adjacency restricts the influence") {
    RecoveryParams isolated = params;
    isolated.adjacency = {{}, {}};  // no edges
    auto mi = build_recovery_pomdp(isolated);
    CHECK(mi->transition(0b01, 0, 0b11) == doctest::Approx(0.2));
  }
}

TEST_CASE("stage cost is additive over replicas") {
  RecoveryParams params;
  params.replicas = 2;
  auto m = build_recovery_pomdp(params);
  // state (1,0), control (0,1): intrusion 2 on replica 0, recovery 1 on safe
  // replica 1
  CHECK(m->cost(0b01, 0b10, 0) == doctest::Approx(3.0));
  CHECK(m->cost(0b00, 0b00, 0) == doctest::Approx(0.0));
  // recovering a compromised replica nets the bonus
  CHECK(m->cost(0b01, 0b01, 0) == doctest::Approx(-1.0));
  CHECK(m->cost(0b11, 0b11, 0) == doctest::Approx(-2.0));
  CHECK(m->max_stage_cost() == doctest::Approx(4.0));
}

TEST_CASE("factored evaluation matches the dense tensors") {
  RecoveryParams params;
  params.replicas = 2;
  RecoveryModel factored(params);
  auto dense = densify(factored);
  int n = factored.num_states(), nu = factored.num_controls(), nz = factored.num_observations();
  for (int i = 0; i < n; ++i)
    for (int u = 0; u < nu; ++u) {
      double mass = 0.0;
      for (int j = 0; j < n; ++j) {
        CHECK(factored.transition(i, u, j) ==
              doctest::Approx(dense->transition(i, u, j)).epsilon(1e-12));
        mass += factored.transition(i, u, j);
      }
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    }
  std::vector<double> lik(n);
  for (int z = 0; z < nz; ++z) {
    factored.observation_likelihoods(z, 0, lik);
    for (int j = 0; j < n; ++j) {
      CHECK(lik[j] == doctest::Approx(factored.observation_prob(z, j, 0)).epsilon(1e-12));
      CHECK(lik[j] == doctest::Approx(dense->observation_prob(z, j, 0)).epsilon(1e-12));
    }
  }
  for (int j = 0; j < n; ++j) {
    double mass = 0.0;
    for (int z = 0; z < nz; ++z) mass += factored.observation_prob(z, j, 0);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("compromise is absorbing under inaction") {
  RecoveryParams params;
  params.replicas = 3;
  RecoveryModel m(params);
  int full = 0b111;
  CHECK(m.transition(full, 0, full) == doctest::Approx(1.0));
  Rng rng = make_stream(1, {2});
  for (int t = 0; t < 20; ++t) CHECK(m.sample_step(full, 0, rng).next_state == full);
}

TEST_CASE("sampler agrees with the transition and observation tables") {
  RecoveryParams params;
  params.replicas = 2;
  RecoveryModel m(params);
  Rng rng = make_stream(8, {3});
  const int trials = 60000;
  std::vector<double> freq(4, 0.0);
  double z0 = 0.0;
  for (int t = 0; t < trials; ++t) {
    auto s = m.sample_step(0b01, 0, rng);
    freq[s.next_state] += 1.0;
    z0 += (s.observation == 0);
  }
  for (int j = 0; j < 4; ++j)
    CHECK(freq[j] / trials == doctest::Approx(m.transition(0b01, 0, j)).epsilon(0.05));
  double expect_z0 = 0.0;
  for (int j = 0; j < 4; ++j)
    expect_z0 += m.transition(0b01, 0, j) * m.observation_prob(0, j, 0);
  CHECK(z0 / trials == doctest::Approx(expect_z0).epsilon(0.05));
}

TEST_CASE("parameter validation") {
  RecoveryParams params;
  params.replicas = 0;
  CHECK_THROWS_AS(RecoveryModel{params}, ConfigError);
  params.replicas = 2;
  params.adjacency = {{0}, {0}};  // self-loop
  CHECK_THROWS_AS(RecoveryModel{params}, ConfigError);
  params.adjacency.clear();
  params.obs_safe = {1.0};  // wrong support
  CHECK_THROWS_AS(RecoveryModel{params}, ConfigError);
  params = RecoveryParams{};
  params.discount = 1.0;
  CHECK_THROWS_AS(RecoveryModel{params}, ConfigError);
}

TEST_CASE("zone feature space") {
  RecoveryParams params;
  params.replicas = 4;
  auto fs = zone_feature_space(params, {{0, 1}, {2, 3}});
  CHECK(fs.num_features == 4);
  CHECK(fs.num_states() == 16);
  // state 0b0001: zone 0 has a compromised replica -> feature 0b01
  CHECK(fs.state_to_feature[0b0001] == 0b01);
  CHECK(fs.state_to_feature[0b0100] == 0b10);
  CHECK(fs.state_to_feature[0b0110] == 0b11);
  CHECK(fs.state_to_feature[0] == 0);
  // uniform disaggregation over consistent states
  Belief b = fs.disaggregate({1.0, 0.0, 0.0, 0.0});
  CHECK(b[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(zone_feature_space(params, {{0, 1}, {1, 2, 3}}), ConfigError);
  CHECK_THROWS_AS(zone_feature_space(params, {{0, 1}, {2}}), ConfigError);
}

TEST_CASE("scenario switch shifts the safe alert distribution") {
  RecoveryParams pre;
  pre.replicas = 1;
  auto sw = ScenarioSwitch::default_delta(pre, 10);
  CHECK(sw.switch_step == 10);
  for (int z = 0; z < 8; ++z) {
    double want = 0.7 * pre.obs_safe[z] + 0.3 * pre.obs_compromised[z];
    CHECK(sw.post_switch_params.obs_safe[z] == doctest::Approx(want).epsilon(1e-12));
    CHECK(sw.post_switch_params.obs_compromised[z] ==
          doctest::Approx(pre.obs_compromised[z]));
  }
  auto pre_m = build_recovery_pomdp(pre);
  auto post_m = build_recovery_pomdp(sw.post_switch_params);
  CHECK(apply_scenario_switch(pre_m, post_m, sw, 9) == pre_m);
  CHECK(apply_scenario_switch(pre_m, post_m, sw, 10) == post_m);

  SUBCASE("identity delta leaves the model unchanged") {
    auto id = ScenarioSwitch::default_delta(pre, 5, 0.0);
    for (int z = 0; z < 8; ++z)
      CHECK(id.post_switch_params.obs_safe[z] == doctest::Approx(pre.obs_safe[z]));
  }
}
