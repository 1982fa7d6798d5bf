#include <doctest.h>

#include "beliefagg/particle_filter.hpp"
#include "beliefagg/recovery.hpp"
#include "helpers.hpp"

using namespace beliefagg;

TEST_CASE("pf_init draws from the initial belief") {
  SUBCASE("point mass") {
    ParticleSet p = pf_init({0, 0, 0, 1.0}, 50, 1);
    for (int j : p.particles) CHECK(j == 3);
  }
  SUBCASE("uniform law of large numbers") {
    ParticleSet p = pf_init({0.5, 0.5}, 100000, 2);
    double frac = 0.0;
    for (int j : p.particles) frac += (j == 0);
    CHECK(frac / p.size() == doctest::Approx(0.5).epsilon(0.02));
  }
  SUBCASE("single particle accepted") { CHECK(pf_init({1.0}, 1, 3).size() == 1); }
  SUBCASE("zero particles rejected") { CHECK_THROWS_AS(pf_init({1.0}, 0, 3), ConfigError); }
}

TEST_CASE("pf_belief is the empirical measure") {
  CHECK(pf_belief({{0, 0, 1, 1}}, 2) == Belief{0.5, 0.5});
  CHECK(pf_belief({{2, 2, 2}}, 3) == Belief{0.0, 0.0, 1.0});
  CHECK(pf_belief({{0, 1, 1}}, 3) == Belief{1.0 / 3, 2.0 / 3, 0.0});
}

TEST_CASE("deterministic channel collapses the particles") {
  // control 0 sends everything to state 1, which emits observation 1 surely
  DenseModel m(2, 1, 2, 0.9, {0, 1, 0, 1}, {1, 0, 0, 1}, {0, 0, 0, 0});
  ParticleSet p = pf_init({0.5, 0.5}, 64, 4);
  auto res = pf_update(m, p, 0, 1, 5);
  CHECK_FALSE(res.degenerate);
  for (int j : res.particles.particles) CHECK(j == 1);
}

TEST_CASE("all-zero weights flag the degenerate fallback") {
  // both states absorb; observation 1 is impossible from state 0
  DenseModel m(2, 1, 2, 0.9, {1, 0, 0, 1}, {1, 0, 0, 1}, {0, 0, 0, 0});
  ParticleSet p = pf_init({1.0, 0.0}, 32, 6);
  auto res = pf_update(m, p, 0, 1, 7);
  CHECK(res.degenerate);
  CHECK(res.particles.size() == 32);  // propagated prior set kept
  for (int j : res.particles.particles) CHECK(j == 0);
}

TEST_CASE("systematic resampling is unbiased") {
  std::vector<double> w = {0.1, 0.2, 0.3, 0.4};
  const int m = 1000, reps = 400;
  std::vector<double> counts(4, 0.0);
  for (int r = 0; r < reps; ++r) {
    Rng rng = make_stream(11, {(uint64_t)r});
    for (int pick : systematic_resample(w, m, rng)) counts[pick] += 1.0;
  }
  for (int k = 0; k < 4; ++k)
    CHECK(counts[k] / (double(m) * reps) == doctest::Approx(w[k]).epsilon(0.02));
}

TEST_CASE("filter tracks the exact filter on the single-replica model") {
  RecoveryParams params;
  params.replicas = 1;
  auto model = build_recovery_pomdp(params);
  auto tv = [&](int particles, uint64_t seed) {
    Rng rng = make_stream(seed, {0x7f});
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Belief b = {1.0, 0.0};
    ParticleSet p = pf_init(b, particles, seed);
    int state = 0;
    double total = 0.0;
    const int steps = 50;
    for (int k = 0; k < steps; ++k) {
      int u = (int)(unif(rng) * 2);
      TransitionSample s = model->sample_step(state, u, rng);
      state = s.next_state;
      b = *belief_update_exact(*model, b, u, s.observation);
      auto res = pf_update(*model, p, u, s.observation, splitmix64(seed + 31 * k));
      p = res.particles;
      Belief bh = pf_belief(p, 2);
      total += 0.5 * (std::abs(bh[0] - b[0]) + std::abs(bh[1] - b[1]));
    }
    return total / steps;
  };
  double mean_small = 0.0, mean_large = 0.0;
  const int runs = 20;
  for (uint64_t s = 0; s < runs; ++s) {
    mean_small += tv(100, s);
    mean_large += tv(10000, s);
  }
  mean_small /= runs;
  mean_large /= runs;
  CHECK(mean_large < mean_small);  // consistency in M
  CHECK(mean_large < 0.03);
}

TEST_CASE("pf_belief always lands on the simplex") {
  auto m = testutil::random_model(4, 2, 3, 0.9, 21);
  ParticleSet p = pf_init(testutil::random_belief(4, 22), 500, 23);
  for (int k = 0; k < 20; ++k) {
    auto res = pf_update(*m, p, k % 2, k % 3, splitmix64(1000 + k));
    p = res.particles;
    Belief b = pf_belief(p, 4);
    double sum = 0.0;
    for (double v : b) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.size() == 500);
  }
}
