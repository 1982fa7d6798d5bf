#pragma once

#include <vector>

#include "beliefagg/model.hpp"

namespace beliefagg {

/// Empirical-measure belief estimate: M state indices, fixed M across updates.
struct ParticleSet {
  std::vector<int> particles;

  int size() const { return (int)particles.size(); }
};

struct ParticleUpdateResult {
  ParticleSet particles;
  /// Set when every propagated particle had zero observation likelihood; the
  /// returned set is then the propagated (prior) set, unweighted.
  bool degenerate = false;
};

inline ParticleSet pf_init(const Belief& b0, int m, uint64_t seed) {
  if (m < 1) throw ConfigError("particle count must be >= 1");
  Rng rng = make_stream(seed, {0x9f1});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int n = (int)b0.size();
  ParticleSet set;
  set.particles.resize(m);
  for (int s = 0; s < m; ++s) {
    double r = unif(rng), acc = 0.0;
    int pick = n - 1;
    for (int i = 0; i < n; ++i) {
      acc += b0[i];
      if (r < acc) {
        pick = i;
        break;
      }
    }
    set.particles[s] = pick;
  }
  return set;
}

/// Systematic resampling: one uniform draw, stride 1/M over the weight CDF.
inline std::vector<int> systematic_resample(const std::vector<double>& weights, int m, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double step = total / m;
  double pos = unif(rng) * step;
  std::vector<int> out;
  out.reserve(m);
  double acc = 0.0;
  int idx = 0;
  int nw = (int)weights.size();
  for (int s = 0; s < m; ++s) {
    double target = pos + s * step;
    while (idx < nw - 1 && acc + weights[idx] <= target) acc += weights[idx++];
    out.push_back(idx);
  }
  return out;
}

/// Bootstrap step: propagate each particle through p_ij(u), weight by
/// p(z|j,u), resample M by systematic resampling.
inline ParticleUpdateResult pf_update(const PomdpModel& model, const ParticleSet& p, int u, int z,
                                      uint64_t seed) {
  Rng rng = make_stream(seed, {0x9f2});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int m = p.size();
  int n = model.num_states();
  std::vector<int> propagated(m);
  std::vector<double> weights(m);
  double wsum = 0.0;
  for (int s = 0; s < m; ++s) {
    int i = p.particles[s];
    double r = unif(rng), acc = 0.0;
    int j = n - 1;
    for (int cand = 0; cand < n; ++cand) {
      acc += model.transition(i, u, cand);
      if (r < acc) {
        j = cand;
        break;
      }
    }
    propagated[s] = j;
    weights[s] = model.observation_prob(z, j, u);
    wsum += weights[s];
  }
  ParticleUpdateResult res;
  if (wsum <= 0.0) {
    res.particles.particles = std::move(propagated);
    res.degenerate = true;
    return res;
  }
  std::vector<int> picks = systematic_resample(weights, m, rng);
  res.particles.particles.resize(m);
  for (int s = 0; s < m; ++s) res.particles.particles[s] = propagated[picks[s]];
  return res;
}

/// b̂(j) = (1/M) #{s : particle_s = j}. Sums to 1 exactly in rationals.
inline Belief pf_belief(const ParticleSet& p, int n) {
  Belief b(n, 0.0);
  for (int j : p.particles) b[j] += 1.0;
  double inv = 1.0 / p.size();
  for (double& v : b) v *= inv;
  return b;
}

}  // namespace beliefagg
