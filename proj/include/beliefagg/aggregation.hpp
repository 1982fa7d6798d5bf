#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <unordered_map>
#include <vector>

#include "beliefagg/model.hpp"

namespace beliefagg {

/// First aggregation stage: feature states y with member sets I_y (a full
/// partition of X), disaggregation distributions d_y supported on I_y, and
/// deterministic aggregation membership φ_jy.
struct FeatureSpace {
  int num_features = 0;
  std::vector<int> state_to_feature;        // φ as a function X -> F
  std::vector<std::vector<int>> members;    // I_y
  std::vector<std::vector<double>> disagg;  // d_y over members[y], row-stochastic

  static FeatureSpace identity(int n) {
    FeatureSpace fs;
    fs.num_features = n;
    fs.state_to_feature.resize(n);
    fs.members.resize(n);
    fs.disagg.resize(n);
    for (int i = 0; i < n; ++i) {
      fs.state_to_feature[i] = i;
      fs.members[i] = {i};
      fs.disagg[i] = {1.0};
    }
    return fs;
  }

  /// Grouping with uniform disaggregation over each member set.
  static FeatureSpace grouping(int n, std::vector<int> state_to_feature) {
    FeatureSpace fs;
    fs.state_to_feature = std::move(state_to_feature);
    if ((int)fs.state_to_feature.size() != n)
      throw ConfigError("state_to_feature must cover every state");
    fs.num_features = 1 + *std::max_element(fs.state_to_feature.begin(),
                                            fs.state_to_feature.end());
    fs.members.resize(fs.num_features);
    for (int i = 0; i < n; ++i) {
      int y = fs.state_to_feature[i];
      if (y < 0) throw ConfigError("feature indices must be nonnegative");
      fs.members[y].push_back(i);
    }
    fs.disagg.resize(fs.num_features);
    for (int y = 0; y < fs.num_features; ++y) {
      if (fs.members[y].empty()) throw ConfigError("every feature state needs a member state");
      fs.disagg[y].assign(fs.members[y].size(), 1.0 / fs.members[y].size());
    }
    return fs;
  }

  int num_states() const { return (int)state_to_feature.size(); }

  /// q(y) = Σ_i b(i) φ_iy
  void feature_belief(const Belief& b, std::vector<double>& q) const {
    q.assign(num_features, 0.0);
    int n = num_states();
    for (int i = 0; i < n; ++i) q[state_to_feature[i]] += b[i];
  }
  std::vector<double> feature_belief(const Belief& b) const {
    std::vector<double> q;
    feature_belief(b, q);
    return q;
  }

  /// b(i) = Σ_y q(y) d_yi
  Belief disaggregate(const std::vector<double>& q) const {
    Belief b(num_states(), 0.0);
    for (int y = 0; y < num_features; ++y) {
      if (q[y] == 0.0) continue;
      const auto& mem = members[y];
      const auto& d = disagg[y];
      for (size_t k = 0; k < mem.size(); ++k) b[mem[k]] += q[y] * d[k];
    }
    return b;
  }
};

/// Uniform simplex grid over the feature space: points β/ρ with Σβ = ρ,
/// ordered ascending lexicographically on β. |points| = C(ρ+m_f−1, m_f−1).
class RepresentativeBeliefSet {
public:
  static double count(int m_f, int rho) { return binomial_double(rho + m_f - 1, m_f - 1); }

  static RepresentativeBeliefSet enumerate(int m_f, int rho, double capacity = 1e7) {
    if (m_f < 1 || rho < 1) throw ConfigError("m_f and rho must be >= 1");
    double c = count(m_f, rho);
    if (c > capacity)
      throw CapacityExceededError("representative set of size " + std::to_string(c) +
                                  " exceeds capacity " + std::to_string(capacity));
    RepresentativeBeliefSet set;
    set.m_f_ = m_f;
    set.rho_ = rho;
    set.beta_.reserve((size_t)c);
    std::vector<int> beta(m_f, 0);
    enumerate_rec(beta, 0, rho, set.beta_);
    set.points_.resize(set.beta_.size() * m_f);
    for (size_t k = 0; k < set.beta_.size(); ++k)
      for (int y = 0; y < m_f; ++y) set.points_[k * m_f + y] = double(set.beta_[k][y]) / rho;
    return set;
  }

  int num_features() const { return m_f_; }
  int resolution() const { return rho_; }
  long size() const { return (long)beta_.size(); }
  const std::vector<int>& beta(long k) const { return beta_[k]; }
  std::span<const double> point(long k) const { return {&points_[k * m_f_], (size_t)m_f_}; }

  /// Φ on the feature simplex: argmin over q̃ of ‖q̃ − q‖∞, ties broken by the
  /// smallest index in the canonical ascending-lexicographic order.
  long nearest(std::span<const double> q) const {
    if (m_f_ <= 12 && size() > (1L << m_f_)) {
      long k = nearest_windowed(q);
      if (k >= 0) return k;
    }
    return nearest_scan(q);
  }

  long nearest_scan(std::span<const double> q) const {
    long best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    long m = size();
    for (long k = 0; k < m; ++k) {
      const double* p = &points_[k * m_f_];
      double d = 0.0;
      for (int y = 0; y < m_f_; ++y) d = std::max(d, std::abs(p[y] - q[y]));
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  }

  /// Lexicographic rank of a composition, i.e. its index in this set.
  long index_of(const std::vector<int>& beta) const {
    long rank = 0;
    int remaining = rho_;
    for (int y = 0; y < m_f_ - 1; ++y) {
      for (int v = 0; v < beta[y]; ++v)
        rank += (long)binomial_double(remaining - v + m_f_ - y - 2, m_f_ - y - 2);
      remaining -= beta[y];
    }
    return rank;
  }

private:
  static void enumerate_rec(std::vector<int>& beta, int pos, int remaining,
                            std::vector<std::vector<int>>& out) {
    if (pos == (int)beta.size() - 1) {
      beta[pos] = remaining;
      out.push_back(beta);
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      beta[pos] = v;
      enumerate_rec(beta, pos + 1, remaining - v, out);
    }
  }

  /// Exact nearest point restricted to the floor/ceil window of q·ρ. All
  /// optima lie in that window whenever the window optimum is < 1/ρ; when it
  /// is not (exact grid ties), returns -1 and the caller falls back to the
  /// full scan, keeping the tie rule identical in both paths.
  long nearest_windowed(std::span<const double> q) const {
    int m = m_f_;
    thread_local std::vector<int> flo, sel, beta, best_beta;
    flo.resize(m);
    int deficit = rho_;
    for (int y = 0; y < m; ++y) {
      double t = q[y] * rho_;
      double f = std::floor(t);
      f = std::max(0.0, std::min<double>(f, rho_));
      flo[y] = (int)f;
      deficit -= flo[y];
    }
    if (deficit < 0 || deficit > m) return -1;
    // Choose `deficit` coordinates to ceil; enumerate all C(m, deficit)
    // selections and keep the exact argmin with lex-smallest beta on ties.
    sel.resize(deficit);
    for (int i = 0; i < deficit; ++i) sel[i] = i;
    beta.resize(m);
    best_beta.clear();
    double best_d = std::numeric_limits<double>::infinity();
    while (true) {
      beta.assign(flo.begin(), flo.end());
      for (int i = 0; i < deficit; ++i) beta[sel[i]] += 1;
      double d = 0.0;
      for (int y = 0; y < m; ++y) d = std::max(d, std::abs(double(beta[y]) / rho_ - q[y]));
      if (d < best_d || (d == best_d && beta < best_beta)) {
        best_d = d;
        best_beta = beta;
      }
      // next combination
      if (deficit == 0) break;
      int i = deficit - 1;
      while (i >= 0 && sel[i] == m - deficit + i) --i;
      if (i < 0) break;
      ++sel[i];
      for (int j = i + 1; j < deficit; ++j) sel[j] = sel[j - 1] + 1;
    }
    if (best_beta.empty()) return -1;
    if (best_d >= (1.0 - 1e-9) / rho_) return -1;  // possible tie with out-of-window points
    return index_of(best_beta);
  }

  int m_f_ = 0, rho_ = 0;
  std::vector<std::vector<int>> beta_;
  std::vector<double> points_;  // flattened, row k = beta_[k]/rho
};

/// Φ: belief -> index of the nearest representative feature belief.
inline long phi_map(const Belief& b, const FeatureSpace& fs, const RepresentativeBeliefSet& reps) {
  thread_local std::vector<double> q;
  fs.feature_belief(b, q);
  return reps.nearest(q);
}

enum class AggregateMode { Exact, Sampled };

/// Finite MDP over representative feature beliefs (sparse rows per (q̃,u)).
struct AggregateMdp {
  std::shared_ptr<const FeatureSpace> features;
  std::shared_ptr<const RepresentativeBeliefSet> reps;
  int num_controls = 0;
  double alpha = 0.0;
  AggregateMode mode = AggregateMode::Exact;
  long nsim = 0;

  std::vector<std::vector<std::pair<int, double>>> rows;  // index s*nu+u
  std::vector<double> stage_cost;                         // index s*nu+u

  bool solved = false;
  std::vector<double> value;  // r*
  std::vector<int> policy;    // π*
  long vi_iterations = 0;
  double vi_residual = 0.0;

  long num_states() const { return reps->size(); }
};

/// Builds the aggregate MDP. Exact mode sums over the observation alphabet;
/// sampled mode draws nsim observations per (q̃,u) from p̂(·|b,u).
inline AggregateMdp build_aggregate_mdp(const PomdpModel& model,
                                        std::shared_ptr<const FeatureSpace> fs,
                                        std::shared_ptr<const RepresentativeBeliefSet> reps,
                                        AggregateMode mode, long nsim = 10'000, uint64_t seed = 0,
                                        int threads = 1, double work_capacity = 4e11) {
  int n = model.num_states();
  int nu = model.num_controls();
  int nz = model.num_observations();
  if ((int)fs->num_states() != n) throw ConfigError("feature space does not match model");
  long ns = reps->size();
  double work = double(ns) * nu * (mode == AggregateMode::Exact ? (double)nz : (double)nsim) * n;
  if (work > work_capacity)
    throw CapacityExceededError("aggregate MDP construction work exceeds budget");

  AggregateMdp mdp;
  mdp.features = fs;
  mdp.reps = std::move(reps);
  mdp.num_controls = nu;
  mdp.alpha = model.discount();
  mdp.mode = mode;
  mdp.nsim = (mode == AggregateMode::Sampled) ? nsim : 0;
  mdp.rows.resize(ns * nu);
  mdp.stage_cost.assign(ns * nu, 0.0);

  parallel_for(ns, threads, [&](long s) {
    std::vector<double> prior(n), post(n), lik(n), q;
    Belief b = fs->disaggregate(std::vector<double>(mdp.reps->point(s).begin(),
                                                    mdp.reps->point(s).end()));
    for (int u = 0; u < nu; ++u) {
      long su = s * nu + u;
      mdp.stage_cost[su] = stage_cost_expected(model, b, u);
      std::fill(prior.begin(), prior.end(), 0.0);
      for (int i = 0; i < n; ++i) {
        double bi = b[i];
        if (bi == 0.0) continue;
        for (int j = 0; j < n; ++j) prior[j] += bi * model.transition(i, u, j);
      }
      std::map<long, double> acc;
      if (mode == AggregateMode::Exact) {
        for (int z = 0; z < nz; ++z) {
          model.observation_likelihoods(z, u, lik);
          double pz = 0.0;
          for (int j = 0; j < n; ++j) {
            post[j] = prior[j] * lik[j];
            pz += post[j];
          }
          if (pz <= 0.0) continue;
          double inv = 1.0 / pz;
          q.assign(fs->num_features, 0.0);
          for (int j = 0; j < n; ++j) q[fs->state_to_feature[j]] += post[j] * inv;
          acc[mdp.reps->nearest(q)] += pz;
        }
      } else {
        Rng rng = make_stream(seed, {0xa66, (uint64_t)s, (uint64_t)u});
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double w = 1.0 / nsim;
        for (long t = 0; t < nsim; ++t) {
          // z ~ p̂(·|b,u): draw i~b, then (j,z) from the model sampler.
          double r = unif(rng), cum = 0.0;
          int i = n - 1;
          for (int cand = 0; cand < n; ++cand) {
            cum += b[cand];
            if (r < cum) {
              i = cand;
              break;
            }
          }
          TransitionSample smp = model.sample_step(i, u, rng);
          model.observation_likelihoods(smp.observation, u, lik);
          double pz = 0.0;
          for (int j = 0; j < n; ++j) {
            post[j] = prior[j] * lik[j];
            pz += post[j];
          }
          if (pz <= 0.0) continue;  // cannot happen: z was drawn from the model
          double inv = 1.0 / pz;
          q.assign(fs->num_features, 0.0);
          for (int j = 0; j < n; ++j) q[fs->state_to_feature[j]] += post[j] * inv;
          acc[mdp.reps->nearest(q)] += w;
        }
      }
      auto& row = mdp.rows[su];
      row.assign(acc.begin(), acc.end());
    }
  });
  return mdp;
}

/// Value iteration: r ← min_u [Ĝ(·,u) + α P(·,u,·) r] until the sup-norm
/// change is ≤ threshold. π* takes the smallest minimizing control index.
inline void value_iteration(AggregateMdp& mdp, double threshold, long max_iterations = 1'000'000) {
  long ns = mdp.num_states();
  int nu = mdp.num_controls;
  std::vector<double> r(ns, 0.0), next(ns, 0.0);
  double diff = std::numeric_limits<double>::infinity();
  long iter = 0;
  while (diff > threshold) {
    if (++iter > max_iterations)
      throw NonConvergenceError("value iteration exceeded max iterations");
    diff = 0.0;
    for (long s = 0; s < ns; ++s) {
      double best = std::numeric_limits<double>::infinity();
      for (int u = 0; u < nu; ++u) {
        long su = s * nu + u;
        double v = mdp.stage_cost[su];
        double ev = 0.0;
        for (const auto& [t, p] : mdp.rows[su]) ev += p * r[t];
        v += mdp.alpha * ev;
        if (v < best) best = v;
      }
      next[s] = best;
      diff = std::max(diff, std::abs(best - r[s]));
    }
    std::swap(r, next);
  }
  mdp.value = r;
  mdp.policy.assign(ns, 0);
  for (long s = 0; s < ns; ++s) {
    double best = std::numeric_limits<double>::infinity();
    for (int u = 0; u < nu; ++u) {
      long su = s * nu + u;
      double v = mdp.stage_cost[su];
      for (const auto& [t, p] : mdp.rows[su]) v += mdp.alpha * p * r[t];
      if (v < best) {
        best = v;
        mdp.policy[s] = u;
      }
    }
  }
  mdp.solved = true;
  mdp.vi_iterations = iter;
  mdp.vi_residual = diff;
}

/// Offline product: J̃(b) = r*(Φ(b)), μ(b) = π*(Φ(b)); piecewise constant on
/// the partition induced by Φ.
struct BasePolicyBundle {
  std::shared_ptr<const FeatureSpace> features;
  std::shared_ptr<const RepresentativeBeliefSet> reps;
  AggregateMdp mdp;

  long rep_index(const Belief& b) const { return phi_map(b, *features, *reps); }
  double value(const Belief& b) const { return mdp.value[rep_index(b)]; }
  int control(const Belief& b) const { return mdp.policy[rep_index(b)]; }
};

inline BasePolicyBundle solve_aggregate(const PomdpModel& model, FeatureSpace fs, int rho,
                                        double vi_threshold, AggregateMode mode,
                                        long nsim = 10'000, uint64_t seed = 0, int threads = 1,
                                        double capacity = 1e7) {
  auto fsp = std::make_shared<const FeatureSpace>(std::move(fs));
  auto reps = std::make_shared<const RepresentativeBeliefSet>(
      RepresentativeBeliefSet::enumerate(fsp->num_features, rho, capacity));
  BasePolicyBundle bundle;
  bundle.features = fsp;
  bundle.reps = reps;
  bundle.mdp = build_aggregate_mdp(model, fsp, reps, mode, nsim, seed, threads);
  value_iteration(bundle.mdp, vi_threshold);
  return bundle;
}

struct ErrorBoundReport {
  double epsilon_hat = 0.0;     // max over Φ-cells of (max − min) oracle value
  double bound = 0.0;           // epsilon_hat / (1 − α)
  double observed_error = 0.0;  // max |J̃ − oracle| over the probe grid
  long nonempty_cells = 0;
};

/// Empirical error-bound diagnostics: groups probe beliefs by Φ, measures the
/// oracle's variation within each cell, and compares ε̂/(1−α) against the
/// observed approximation error.
inline ErrorBoundReport epsilon_and_bound(const BasePolicyBundle& bundle,
                                          const std::function<double(const Belief&)>& oracle,
                                          const std::vector<Belief>& probes) {
  std::unordered_map<long, std::pair<double, double>> cells;  // cell -> (min, max)
  ErrorBoundReport rep;
  for (const Belief& b : probes) {
    long k = bundle.rep_index(b);
    double j = oracle(b);
    rep.observed_error = std::max(rep.observed_error, std::abs(bundle.mdp.value[k] - j));
    auto it = cells.find(k);
    if (it == cells.end())
      cells.emplace(k, std::make_pair(j, j));
    else {
      it->second.first = std::min(it->second.first, j);
      it->second.second = std::max(it->second.second, j);
    }
  }
  for (const auto& [k, mm] : cells) rep.epsilon_hat = std::max(rep.epsilon_hat, mm.second - mm.first);
  rep.bound = rep.epsilon_hat / (1.0 - bundle.mdp.alpha);
  rep.nonempty_cells = (long)cells.size();
  return rep;
}

/// Stand-in for J*: identity aggregation at a fine resolution (asymptotically
/// exact as ρ grows). Returned as a shareable value function.
inline BasePolicyBundle oracle_cost_function(const PomdpModel& model, int rho_fine,
                                             double vi_threshold, int threads = 1,
                                             double capacity = 1e7) {
  return solve_aggregate(model, FeatureSpace::identity(model.num_states()), rho_fine,
                         vi_threshold, AggregateMode::Exact, 0, 0, threads, capacity);
}

}  // namespace beliefagg
