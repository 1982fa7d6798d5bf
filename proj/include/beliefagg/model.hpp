#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "beliefagg/common.hpp"

namespace beliefagg {

using Belief = std::vector<double>;

inline constexpr double kProbTolerance = 1e-9;

inline bool is_distribution(std::span<const double> p, double tol = kProbTolerance) {
  double sum = 0.0;
  for (double v : p) {
    if (v < -tol || !std::isfinite(v)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

struct TransitionSample {
  int next_state = 0;
  int observation = 0;
  double cost = 0.0;
};

/// Finite controlled stochastic model with an observation channel.
/// States, controls and observations are indexed from 0. Implementations are
/// immutable after construction and safe to share across threads.
class PomdpModel {
public:
  virtual ~PomdpModel() = default;

  virtual int num_states() const = 0;
  virtual int num_controls() const = 0;
  virtual int num_observations() const = 0;
  virtual double discount() const = 0;

  /// p_ij(u)
  virtual double transition(int i, int u, int j) const = 0;
  /// p(z | j, u), observation emitted from the post-transition state j.
  virtual double observation_prob(int z, int j, int u) const = 0;
  /// g(i, u, j)
  virtual double cost(int i, int u, int j) const = 0;

  /// Fills out[j] = p(z | j, u) for all j. Factored models override this with
  /// a cheaper product evaluation.
  virtual void observation_likelihoods(int z, int u, std::span<double> out) const {
    int n = num_states();
    for (int j = 0; j < n; ++j) out[j] = observation_prob(z, j, u);
  }

  /// Draws (j, z, cost) given (i, u). Default: inverse-CDF over the tables.
  virtual TransitionSample sample_step(int i, int u, Rng& rng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int n = num_states();
    int nz = num_observations();
    TransitionSample s;
    double r = unif(rng), acc = 0.0;
    s.next_state = n - 1;
    for (int j = 0; j < n; ++j) {
      acc += transition(i, u, j);
      if (r < acc) {
        s.next_state = j;
        break;
      }
    }
    r = unif(rng);
    acc = 0.0;
    s.observation = nz - 1;
    for (int z = 0; z < nz; ++z) {
      acc += observation_prob(z, s.next_state, u);
      if (r < acc) {
        s.observation = z;
        break;
      }
    }
    s.cost = cost(i, u, s.next_state);
    return s;
  }

  /// Σ_j p_ij(u) g(i,u,j)
  virtual double expected_cost(int i, int u) const {
    int n = num_states();
    double g = 0.0;
    for (int j = 0; j < n; ++j) g += transition(i, u, j) * cost(i, u, j);
    return g;
  }

  /// Upper bound on |g| used in truncation-error reports. The default scans
  /// every (i,u,j) triple; factored models override with a closed form or a
  /// sampled scan.
  virtual double max_stage_cost() const {
    int n = num_states(), nu = num_controls();
    double m = 0.0;
    for (int i = 0; i < n; ++i)
      for (int u = 0; u < nu; ++u)
        for (int j = 0; j < n; ++j)
          if (transition(i, u, j) > 0.0) m = std::max(m, std::abs(cost(i, u, j)));
    return m;
  }
};

/// Dense tabular model. Row-major layout matches the JSON interchange format:
/// transition[i][u][j], observation[j][u][z], cost[i][u][j].
class DenseModel final : public PomdpModel {
public:
  DenseModel(int n, int nu, int nz, double alpha, std::vector<double> trans,
             std::vector<double> obs, std::vector<double> g)
      : n_(n), nu_(nu), nz_(nz), alpha_(alpha), trans_(std::move(trans)),
        obs_(std::move(obs)), cost_(std::move(g)) {
    if (n <= 0 || nu <= 0 || nz <= 0) throw ConfigError("model dimensions must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("discount must lie in (0,1)");
    if ((long)trans_.size() != (long)n * nu * n || (long)obs_.size() != (long)n * nu * nz ||
        (long)cost_.size() != (long)n * nu * n)
      throw ConfigError("model table sizes do not match dimensions");
    for (int i = 0; i < n; ++i)
      for (int u = 0; u < nu; ++u) {
        if (!is_distribution({&trans_[((long)i * nu + u) * n], (size_t)n}))
          throw ConfigError("transition rows must be stochastic");
        if (!is_distribution({&obs_[((long)i * nu + u) * nz], (size_t)nz}))
          throw ConfigError("observation rows must be stochastic");
      }
  }

  int num_states() const override { return n_; }
  int num_controls() const override { return nu_; }
  int num_observations() const override { return nz_; }
  double discount() const override { return alpha_; }

  double transition(int i, int u, int j) const override {
    return trans_[((long)i * nu_ + u) * n_ + j];
  }
  double observation_prob(int z, int j, int u) const override {
    return obs_[((long)j * nu_ + u) * nz_ + z];
  }
  double cost(int i, int u, int j) const override {
    return cost_[((long)i * nu_ + u) * n_ + j];
  }

  const std::vector<double>& transition_table() const { return trans_; }
  const std::vector<double>& observation_table() const { return obs_; }
  const std::vector<double>& cost_table() const { return cost_; }

private:
  int n_, nu_, nz_;
  double alpha_;
  std::vector<double> trans_, obs_, cost_;
};

/// Materializes any model into dense tables. Guarded by an entry budget since
/// factored models can be far too large to tabulate.
inline std::shared_ptr<DenseModel> densify(const PomdpModel& m, long max_entries = 10'000'000) {
  long n = m.num_states(), nu = m.num_controls(), nz = m.num_observations();
  if (n * nu * n > max_entries || n * nu * nz > max_entries)
    throw CapacityExceededError("model too large to tabulate");
  std::vector<double> t((size_t)(n * nu * n)), o((size_t)(n * nu * nz)), g((size_t)(n * nu * n));
  for (int i = 0; i < n; ++i)
    for (int u = 0; u < nu; ++u)
      for (int j = 0; j < n; ++j) {
        t[((long)i * nu + u) * n + j] = m.transition(i, u, j);
        g[((long)i * nu + u) * n + j] = m.cost(i, u, j);
      }
  for (int j = 0; j < n; ++j)
    for (int u = 0; u < nu; ++u)
      for (int z = 0; z < nz; ++z) o[((long)j * nu + u) * nz + z] = m.observation_prob(z, j, u);
  return std::make_shared<DenseModel>((int)n, (int)nu, (int)nz, m.discount(), std::move(t),
                                      std::move(o), std::move(g));
}

/// Exact Bayes filter step: b'(j) ∝ p(z|j,u) Σ_i b(i) p_ij(u).
/// Returns nullopt when the observation has zero likelihood under (b,u);
/// the caller decides the fallback.
inline std::optional<Belief> belief_update_exact(const PomdpModel& m, const Belief& b, int u,
                                                 int z) {
  int n = m.num_states();
  assert((int)b.size() == n);
  Belief prior(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double bi = b[i];
    if (bi == 0.0) continue;
    for (int j = 0; j < n; ++j) prior[j] += bi * m.transition(i, u, j);
  }
  std::vector<double> lik(n);
  m.observation_likelihoods(z, u, lik);
  double norm = 0.0;
  for (int j = 0; j < n; ++j) {
    prior[j] *= lik[j];
    norm += prior[j];
  }
  if (norm <= 0.0) return std::nullopt;
  for (double& v : prior) v /= norm;
  return prior;
}

/// ĝ(b,u) = Σ_i b(i) Σ_j p_ij(u) g(i,u,j)
inline double stage_cost_expected(const PomdpModel& m, const Belief& b, int u) {
  int n = m.num_states();
  double g = 0.0;
  for (int i = 0; i < n; ++i)
    if (b[i] != 0.0) g += b[i] * m.expected_cost(i, u);
  return g;
}

/// p̂(z|b,u) = Σ_i b(i) Σ_j p_ij(u) p(z|j,u)
inline double obs_prob_given_belief(const PomdpModel& m, const Belief& b, int u, int z) {
  int n = m.num_states();
  Belief prior(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double bi = b[i];
    if (bi == 0.0) continue;
    for (int j = 0; j < n; ++j) prior[j] += bi * m.transition(i, u, j);
  }
  std::vector<double> lik(n);
  m.observation_likelihoods(z, u, lik);
  double p = 0.0;
  for (int j = 0; j < n; ++j) p += prior[j] * lik[j];
  return p;
}

struct TrajectoryStep {
  Belief belief;
  int control = 0;
  int observation = 0;
  double stage_cost = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double discounted_cost = 0.0;
  /// α^horizon · g_max / (1−α); reported alongside the truncated sum.
  double truncation_bound = 0.0;
};

using BeliefPolicy = std::function<int(const Belief&)>;

/// Runs the closed loop with exact belief updates. The hidden state is drawn
/// from b0 and evolved with the model sampler; the realized stage costs are
/// discounted and summed. Deterministic given the seed.
inline Trajectory simulate_policy(const PomdpModel& m, const BeliefPolicy& policy,
                                  const Belief& b0, int horizon, uint64_t seed) {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  Rng rng = make_stream(seed, {0xbead5});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int n = m.num_states();
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
  Trajectory traj;
  traj.steps.reserve(horizon);
  Belief b = b0;
  double disc = 1.0;
  for (int k = 0; k < horizon; ++k) {
    int u = policy(b);
    TransitionSample s = m.sample_step(state, u, rng);
    traj.steps.push_back({b, u, s.observation, s.cost});
    traj.discounted_cost += disc * s.cost;
    disc *= m.discount();
    auto nb = belief_update_exact(m, b, u, s.observation);
    if (!nb) throw std::logic_error("exact update failed on a model-sampled observation");
    b = std::move(*nb);
    state = s.next_state;
  }
  traj.truncation_bound = disc * m.max_stage_cost() / (1.0 - m.discount());
  return traj;
}

}  // namespace beliefagg
