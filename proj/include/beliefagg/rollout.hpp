#pragma once

#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <vector>

#include "beliefagg/aggregation.hpp"
#include "beliefagg/model.hpp"

namespace beliefagg {

/// Compiled snapshot of a model for fast closed-loop work: flat transition
/// matrices per control and a precomputed expected-stage-cost table.
/// Observation likelihoods and step sampling stay on the model (factored
/// models provide fast overrides).
struct BeliefDynamics {
  const PomdpModel* model = nullptr;
  int n = 0, nu = 0;
  long nz = 0;
  double alpha = 0.0;
  std::vector<double> trans;    // [u][i][j]
  std::vector<double> gbar;     // [i][u]
  std::vector<double> obs_lik;  // [z][j], cached when small enough (and the
                                // observation channel is control-independent
                                // in every model here, so u is dropped)

  explicit BeliefDynamics(const PomdpModel& m, long max_entries = 1L << 24) : model(&m) {
    n = m.num_states();
    nu = m.num_controls();
    nz = m.num_observations();
    alpha = m.discount();
    if ((long)n * n * nu > max_entries)
      throw CapacityExceededError("model too large for compiled belief dynamics");
    trans.resize((size_t)nu * n * n);
    gbar.resize((size_t)n * nu);
    for (int u = 0; u < nu; ++u)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) trans[((size_t)u * n + i) * n + j] = m.transition(i, u, j);
    for (int i = 0; i < n; ++i)
      for (int u = 0; u < nu; ++u) gbar[(size_t)i * nu + u] = m.expected_cost(i, u);
    if (nz * n <= max_entries && obs_control_independent(m)) {
      obs_lik.resize((size_t)nz * n);
      for (long z = 0; z < nz; ++z)
        m.observation_likelihoods((int)z, 0, {&obs_lik[(size_t)z * n], (size_t)n});
    }
  }

  static bool obs_control_independent(const PomdpModel& m) {
    int n = m.num_states(), nu = m.num_controls();
    long nz = m.num_observations();
    if (nu == 1) return true;
    if ((double)nz * n * nu > 4e7) return false;
    for (long z = 0; z < nz; ++z)
      for (int j = 0; j < n; ++j) {
        double p0 = m.observation_prob((int)z, j, 0);
        for (int u = 1; u < nu; ++u)
          if (m.observation_prob((int)z, j, u) != p0) return false;
      }
    return true;
  }

  double stage_cost(const double* b, int u) const {
    double g = 0.0;
    for (int i = 0; i < n; ++i) g += b[i] * gbar[(size_t)i * nu + u];
    return g;
  }

  void propagate(const double* b, int u, double* prior) const {
    const double* t = &trans[(size_t)u * n * n];
    for (int j = 0; j < n; ++j) prior[j] = 0.0;
    for (int i = 0; i < n; ++i) {
      double bi = b[i];
      if (bi == 0.0) continue;
      const double* row = t + (size_t)i * n;
      for (int j = 0; j < n; ++j) prior[j] += bi * row[j];
    }
  }

  /// out ∝ prior .* p(z|·,u); returns the normalizer p̂(z|b,u) (0 on zero
  /// likelihood, out untouched in that case).
  double condition(const double* prior, int u, int z, double* out, double* lik_scratch) const {
    const double* lik = lik_scratch;
    if (!obs_lik.empty()) {
      lik = &obs_lik[(size_t)z * n];
    } else {
      model->observation_likelihoods(z, u, {lik_scratch, (size_t)n});
    }
    double norm = 0.0;
    for (int j = 0; j < n; ++j) {
      double v = prior[j] * lik[j];
      out[j] = v;
      norm += v;
    }
    if (norm <= 0.0) return 0.0;
    double inv = 1.0 / norm;
    for (int j = 0; j < n; ++j) out[j] *= inv;
    return norm;
  }
};

struct RolloutConfig {
  int lookahead = 1;       // ℓ
  int rollout_horizon = 10;  // m
  int num_sims = 20;       // L
  uint64_t seed = 0;
  /// Expectation over observations is exact (with pruning) when the
  /// observation alphabet is at most obs_exact_limit, sampled otherwise.
  long obs_exact_limit = 64;
  int obs_samples = 64;
  double prune_threshold = 1e-6;
  long node_budget = 2'000'000;
};

struct DecisionReport {
  std::vector<double> q_values;
  int chosen = 0;
  long leaf_evaluations = 0;
  bool sampled_observations = false;
};

/// Online controller: ℓ-step lookahead minimization with m-step, L-simulation
/// evaluation of the base policy and terminal cost J̃. The planner never
/// mutates the bundle; a model differing from the one the bundle was solved
/// on is exactly the adaptation setting.
class RolloutPlanner {
public:
  RolloutPlanner(std::shared_ptr<const PomdpModel> model, const BasePolicyBundle* bundle,
                 RolloutConfig config)
      : model_(std::move(model)), dyn_(*model_), bundle_(bundle), cfg_(config) {
    if (cfg_.lookahead < 1 || cfg_.rollout_horizon < 0 || cfg_.num_sims < 1)
      throw ConfigError("rollout config requires lookahead >= 1, m >= 0, L >= 1");
    double branch = dyn_.nz <= cfg_.obs_exact_limit ? (double)dyn_.nz : (double)cfg_.obs_samples;
    double nodes = dyn_.nu;
    for (int d = 1; d < cfg_.lookahead; ++d) nodes *= branch * dyn_.nu;
    if (nodes > (double)cfg_.node_budget)
      throw CapacityExceededError("lookahead tree exceeds the node budget");
  }

  const RolloutConfig& config() const { return cfg_; }
  const PomdpModel& model() const { return *model_; }

  /// J̃_μ(b): average over L seeded m-step simulations of the base policy,
  /// accumulating expected stage costs along sampled belief trajectories,
  /// plus the discounted terminal approximation J̃.
  double cost_to_go(const Belief& b, uint64_t stream = 0) const {
    if (cfg_.rollout_horizon == 0) return bundle_->value(b);
    int n = dyn_.n;
    thread_local Belief cur;
    thread_local std::vector<double> prior, lik;
    cur.resize(n);
    prior.resize(n);
    lik.resize(n);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double total = 0.0;
    for (int s = 0; s < cfg_.num_sims; ++s) {
      Rng rng = make_stream(cfg_.seed, {0xc057, stream, (uint64_t)s});
      std::copy(b.begin(), b.end(), cur.begin());
      int state = sample_index(b.data(), n, unif(rng));
      double disc = 1.0, acc = 0.0;
      for (int step = 0; step < cfg_.rollout_horizon; ++step) {
        int u = bundle_->control(cur);
        acc += disc * dyn_.stage_cost(cur.data(), u);
        TransitionSample smp = model_->sample_step(state, u, rng);
        dyn_.propagate(cur.data(), u, prior.data());
        double norm = dyn_.condition(prior.data(), u, smp.observation, cur.data(), lik.data());
        if (norm <= 0.0) {
          // cannot happen for model-sampled observations with an exact filter
          std::copy(prior.begin(), prior.end(), cur.begin());
        }
        state = smp.next_state;
        disc *= dyn_.alpha;
      }
      acc += disc * bundle_->value(cur);
      total += acc;
    }
    return total / cfg_.num_sims;
  }

  int control(const Belief& b) const {
    DecisionReport rep;
    return control_with_report(b, rep);
  }

  int control_with_report(const Belief& b, DecisionReport& rep) const {
    int nu = dyn_.nu;
    rep.q_values.assign(nu, 0.0);
    rep.leaf_evaluations = 0;
    rep.sampled_observations = dyn_.nz > cfg_.obs_exact_limit;
    double best = std::numeric_limits<double>::infinity();
    int best_u = 0;
    std::vector<double> cur(b.begin(), b.end());
    // seed the sampling paths from the belief itself: the policy stays a
    // deterministic function of the belief, but distinct beliefs draw
    // distinct observation samples, so per-decision sampling error averages
    // out along a trajectory instead of repeating systematically
    uint64_t path = 0xdec1de;
    for (int i = 0; i < dyn_.n; ++i) {
      uint64_t bits;
      std::memcpy(&bits, &cur[i], sizeof bits);
      path = splitmix64(path ^ bits);
    }
    for (int u = 0; u < nu; ++u) {
      // common random numbers across controls: the same stream drives every
      // branch so the argmin compares Q estimates under shared noise
      double q = q_value(cur.data(), u, 1, path, rep);
      rep.q_values[u] = q;
      if (q < best) {
        best = q;
        best_u = u;
      }
    }
    rep.chosen = best_u;
    return best_u;
  }

private:
  static int sample_index(const double* p, int n, double r) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += p[i];
      if (r < acc) return i;
    }
    return n - 1;
  }

  double lookahead_value(const double* b, int depth, uint64_t path, DecisionReport& rep) const {
    if (depth == cfg_.lookahead) {
      ++rep.leaf_evaluations;
      thread_local Belief tmp;
      tmp.assign(b, b + dyn_.n);
      return cost_to_go(tmp, path);
    }
    double best = std::numeric_limits<double>::infinity();
    for (int u = 0; u < dyn_.nu; ++u)
      best = std::min(best, q_value(b, u, depth + 1, splitmix64(path ^ (uint64_t)(u + 1)), rep));
    return best;
  }

  /// ĝ(b,u) + α E_z[ value(F(b,u,z)) ]; exact over z with pruning and
  /// renormalization, or sampled when the alphabet is too large.
  double q_value(const double* b, int u, int next_depth, uint64_t path, DecisionReport& rep) const {
    int n = dyn_.n;
    // per-depth scratch: recursion through lookahead_value re-enters here, so
    // size for the full depth up front (a later resize would move the inner
    // vectors out from under the outer recursion levels)
    thread_local std::vector<std::vector<double>> scratch;
    if ((int)scratch.size() < 3 * cfg_.lookahead) scratch.resize(3 * cfg_.lookahead);
    std::vector<double>& prior = scratch[3 * (next_depth - 1)];
    std::vector<double>& post = scratch[3 * (next_depth - 1) + 1];
    std::vector<double>& lik = scratch[3 * (next_depth - 1) + 2];
    prior.resize(n);
    post.resize(n);
    lik.resize(n);
    double g = dyn_.stage_cost(b, u);
    dyn_.propagate(b, u, prior.data());
    double acc = 0.0;
    if (!rep.sampled_observations) {
      double kept = 0.0;
      for (long z = 0; z < dyn_.nz; ++z) {
        double pz = dyn_.condition(prior.data(), u, (int)z, post.data(), lik.data());
        if (pz < cfg_.prune_threshold) continue;
        kept += pz;
        acc += pz * lookahead_value(post.data(), next_depth, splitmix64(path ^ (uint64_t)(z * 2 + 1)), rep);
      }
      if (kept > 0.0) acc /= kept;  // renormalize over unpruned branches
    } else {
      Rng rng = make_stream(cfg_.seed, {0x0b5, path});
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (int s = 0; s < cfg_.obs_samples; ++s) {
        int i = sample_index(b, n, unif(rng));
        TransitionSample smp = model_->sample_step(i, u, rng);
        double pz = dyn_.condition(prior.data(), u, smp.observation, post.data(), lik.data());
        if (pz <= 0.0) continue;
        acc += lookahead_value(post.data(), next_depth, splitmix64(path ^ (uint64_t)(s * 2 + 1)), rep);
      }
      acc /= cfg_.obs_samples;
    }
    return g + dyn_.alpha * acc;
  }

  std::shared_ptr<const PomdpModel> model_;
  BeliefDynamics dyn_;
  const BasePolicyBundle* bundle_;
  RolloutConfig cfg_;
};

}  // namespace beliefagg
