#include <doctest.h>

#include "beliefagg/model.hpp"
#include "beliefagg/recovery.hpp"
#include "helpers.hpp"

using namespace beliefagg;

namespace {

std::shared_ptr<const PomdpModel> k1_model() {
  RecoveryParams p;
  p.replicas = 1;
  return build_recovery_pomdp(p);
}

}  // namespace

TEST_CASE("exact Bayes update on the single-replica model") {
  auto m = k1_model();
  // b=(0.5,0.5), no-op, z=0: prior=(0.4,0.6),
  // posterior(comp) = 0.6*0.0909 / (0.6*0.0909 + 0.4*0.4204)
  auto b = belief_update_exact(*m, {0.5, 0.5}, 0, 0);
  REQUIRE(b.has_value());
  CHECK((*b)[1] == doctest::Approx(0.2449).epsilon(1e-3));
  CHECK((*b)[0] + (*b)[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single-state degenerate model") {
  DenseModel m(1, 1, 1, 0.5, {1.0}, {1.0}, {1.0});
  auto b = belief_update_exact(m, {1.0}, 0, 0);
  REQUIRE(b.has_value());
  CHECK((*b)[0] == doctest::Approx(1.0));
}

TEST_CASE("zero-likelihood observation reports failure") {
  // state 0 absorbing under control 0; observation 1 impossible from state 0
  DenseModel m(2, 1, 2, 0.9, {1, 0, 0, 1}, {1, 0, 0, 1}, {0, 0, 0, 0});
  CHECK_FALSE(belief_update_exact(m, {1.0, 0.0}, 0, 1).has_value());
}

TEST_CASE("expected stage cost on the single-replica model") {
  auto m = k1_model();
  CHECK(stage_cost_expected(*m, {1.0, 0.0}, 1) == doctest::Approx(1.0));   // recover safe
  CHECK(stage_cost_expected(*m, {0.0, 1.0}, 0) == doctest::Approx(2.0));   // ignore intrusion
  CHECK(stage_cost_expected(*m, {0.5, 0.5}, 0) == doctest::Approx(1.0));   // linearity
}

TEST_CASE("observation probability given belief") {
  auto m = k1_model();
  // b=(1,0), no-op, z=0: 0.8*0.42044 + 0.2*0.09091
  CHECK(obs_prob_given_belief(*m, {1.0, 0.0}, 0, 0) == doctest::Approx(0.35454).epsilon(1e-4));

  SUBCASE("sums to one over the alphabet") {
    for (int u = 0; u < m->num_controls(); ++u) {
      double total = 0.0;
      for (int z = 0; z < m->num_observations(); ++z)
        total += obs_prob_given_belief(*m, {0.3, 0.7}, u, z);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
    }
  }
}

TEST_CASE("exact update matches joint-enumeration posterior on random models") {
  for (uint64_t seed = 0; seed < 8; ++seed) {
    int n = 2 + (int)(seed % 4);  // n in [2,5]
    auto m = testutil::random_model(n, 2, 3, 0.9, seed);
    Belief b = testutil::random_belief(n, seed + 100);
    for (int u = 0; u < 2; ++u)
      for (int z = 0; z < 3; ++z) {
        // joint over (i,j): b(i) p_ij(u) p(z|j,u), marginalized over i
        Belief post(n, 0.0);
        double norm = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            double w = b[i] * m->transition(i, u, j) * m->observation_prob(z, j, u);
            post[j] += w;
            norm += w;
          }
        for (double& v : post) v /= norm;
        auto got = belief_update_exact(*m, b, u, z);
        REQUIRE(got.has_value());
        for (int j = 0; j < n; ++j) CHECK((*got)[j] == doctest::Approx(post[j]).epsilon(1e-10));
      }
  }
}

TEST_CASE("belief updates stay on the simplex") {
  auto m = k1_model();
  Belief b = {0.9, 0.1};
  for (int step = 0; step < 40; ++step) {
    auto nb = belief_update_exact(*m, b, step % 2, step % 8);
    if (!nb) continue;
    b = *nb;
    double sum = 0.0;
    for (double v : b) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("dense model validation rejects bad tables") {
  CHECK_THROWS_AS(DenseModel(1, 1, 1, 1.5, {1.0}, {1.0}, {0.0}), ConfigError);
  CHECK_THROWS_AS(DenseModel(2, 1, 1, 0.9, {0.5, 0.4, 0, 1}, {1, 1}, {0, 0, 0, 0}), ConfigError);
  CHECK_THROWS_AS(DenseModel(1, 1, 1, 0.9, {1.0, 1.0}, {1.0}, {0.0}), ConfigError);
}

TEST_CASE("simulate_policy on a deterministic single-state model") {
  DenseModel m(1, 1, 1, 0.5, {1.0}, {1.0}, {1.0});
  auto traj = simulate_policy(m, [](const Belief&) { return 0; }, {1.0}, 1, 7);
  CHECK(traj.discounted_cost == doctest::Approx(1.0));
  CHECK(traj.steps.size() == 1);
}

TEST_CASE("simulate_policy is deterministic given the seed") {
  auto m = k1_model();
  auto pol = [](const Belief& b) { return b[1] > 0.5 ? 1 : 0; };
  auto a = simulate_policy(*m, pol, {1.0, 0.0}, 60, 42);
  auto b = simulate_policy(*m, pol, {1.0, 0.0}, 60, 42);
  REQUIRE(a.steps.size() == b.steps.size());
  CHECK(a.discounted_cost == b.discounted_cost);
  for (size_t k = 0; k < a.steps.size(); ++k) {
    CHECK(a.steps[k].control == b.steps[k].control);
    CHECK(a.steps[k].observation == b.steps[k].observation);
  }
}

TEST_CASE("trajectory discounted cost recomputes from steps") {
  auto m = k1_model();
  auto traj = simulate_policy(*m, [](const Belief&) { return 1; }, {0.5, 0.5}, 30, 3);
  double disc = 1.0, total = 0.0;
  for (const auto& s : traj.steps) {
    total += disc * s.stage_cost;
    disc *= m->discount();
  }
  CHECK(traj.discounted_cost == doctest::Approx(total).epsilon(1e-9));
  CHECK(traj.truncation_bound > 0.0);
}

TEST_CASE("always-recover policy matches the analytic chain value") {
  // Under always-recover the next state is surely safe, so the realized cost
  // is g(i, recover): 1 if safe, -1 if compromised. From b0 = safe the state
  // stays safe forever and the discounted cost is 1/(1-alpha).
  auto m = k1_model();
  auto traj = simulate_policy(*m, [](const Belief&) { return 1; }, {1.0, 0.0}, 2000, 5);
  CHECK(traj.discounted_cost ==
        doctest::Approx(1.0 / (1.0 - m->discount())).epsilon(1e-6));
}

TEST_CASE("sampler frequencies track the tables") {
  auto m = testutil::random_model(3, 2, 3, 0.9, 77);
  Rng rng = make_stream(9, {1});
  const int trials = 40000;
  std::vector<double> freq_j(3, 0.0), freq_z(3, 0.0);
  for (int t = 0; t < trials; ++t) {
    TransitionSample s = m->sample_step(1, 0, rng);
    freq_j[s.next_state] += 1.0;
    freq_z[s.observation] += 1.0;
  }
  for (int j = 0; j < 3; ++j) {
    double expect = m->transition(1, 0, j);
    CHECK(freq_j[j] / trials == doctest::Approx(expect).epsilon(0.05));
  }
  double z0 = 0.0;
  for (int j = 0; j < 3; ++j) z0 += m->transition(1, 0, j) * m->observation_prob(0, j, 0);
  CHECK(freq_z[0] / trials == doctest::Approx(z0).epsilon(0.05));
}
