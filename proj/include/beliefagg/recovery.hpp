#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "beliefagg/aggregation.hpp"
#include "beliefagg/model.hpp"

namespace beliefagg {

/// Beta-binomial pmf over {0..trials}:
/// pmf(k) = C(trials,k) B(k+a, trials-k+b) / B(a,b).
inline std::vector<double> betabin_pmf(int trials, double a, double b) {
  if (trials < 0 || !(a > 0.0) || !(b > 0.0))
    throw ConfigError("betabin_pmf requires trials >= 0, a > 0, b > 0");
  auto lbeta = [](double x, double y) { return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y); };
  std::vector<double> pmf(trials + 1);
  double norm = 0.0;
  for (int k = 0; k <= trials; ++k) {
    double lc = std::lgamma(trials + 1.0) - std::lgamma(k + 1.0) - std::lgamma(trials - k + 1.0);
    pmf[k] = std::exp(lc + lbeta(k + a, trials - k + b) - lbeta(a, b));
    norm += pmf[k];
  }
  for (double& v : pmf) v /= norm;
  return pmf;
}

/// Parameters of the K-replica intrusion-recovery model. States, controls and
/// observations are bit/digit vectors over replicas: state bit l = replica l
/// compromised, control bit l = recover replica l, observation digit l
/// (base obs_support) = alert count of replica l.
struct RecoveryParams {
  int replicas = 1;
  /// Neighbor lists; empty means the complete graph on `replicas`.
  std::vector<std::vector<int>> adjacency;
  double base_compromise_rate = 0.2;
  int obs_support = 8;  // alerts 0..7
  std::vector<double> obs_safe = betabin_pmf(7, 0.7, 3.0);
  std::vector<double> obs_compromised = betabin_pmf(7, 1.0, 0.7);
  double intrusion_cost_weight = 2.0;
  double recovery_cost_weight = 1.0;
  /// Reward credited when a compromised replica is recovered; the reference
  /// cost curves require 1 (recovering a compromised replica nets -1).
  double recovery_bonus_weight = 1.0;
  double discount = 0.99;

  std::vector<std::vector<int>> neighbor_lists() const {
    if (!adjacency.empty()) return adjacency;
    std::vector<std::vector<int>> nb(replicas);
    for (int l = 0; l < replicas; ++l)
      for (int o = 0; o < replicas; ++o)
        if (o != l) nb[l].push_back(o);
    return nb;
  }
};

/// Factored evaluation of the recovery POMDP: replicas transition
/// conditionally independently given the full current state, observations
/// factor per replica, and the stage cost is additive over replicas.
class RecoveryModel final : public PomdpModel {
public:
  explicit RecoveryModel(RecoveryParams params) : params_(std::move(params)) {
    int k = params_.replicas;
    if (k < 1 || k > 20) throw ConfigError("replica count must be in [1, 20]");
    if ((int)params_.obs_safe.size() != params_.obs_support ||
        (int)params_.obs_compromised.size() != params_.obs_support)
      throw ConfigError("observation distributions must have obs_support entries");
    if (!is_distribution(params_.obs_safe) || !is_distribution(params_.obs_compromised))
      throw ConfigError("observation distributions must be valid");
    if (!(params_.discount > 0.0 && params_.discount < 1.0))
      throw ConfigError("discount must lie in (0,1)");
    auto nb = params_.neighbor_lists();
    for (int l = 0; l < k; ++l)
      for (int o : nb[l])
        if (o == l || o < 0 || o >= k) throw ConfigError("adjacency has a self-loop or bad index");
    n_ = 1 << k;
    nz_ = 1;
    zpow_.resize(k);
    for (int l = 0; l < k; ++l) {
      zpow_[l] = nz_;
      nz_ = nz_ * params_.obs_support;
      if (nz_ > (long)2e9) throw CapacityExceededError("observation space too large to index");
    }
    // compromise probability of replica l given current full state i
    compromise_.assign((size_t)n_ * k, 0.0);
    for (int i = 0; i < n_; ++i)
      for (int l = 0; l < k; ++l) {
        int hostile = 0;
        for (int o : nb[l]) hostile += (i >> o) & 1;
        compromise_[(size_t)i * k + l] =
            std::min(params_.base_compromise_rate * (1.0 + hostile), 1.0);
      }
    // cumulative observation distributions for sampling
    cdf_safe_ = params_.obs_safe;
    cdf_comp_ = params_.obs_compromised;
    for (int z = 1; z < params_.obs_support; ++z) {
      cdf_safe_[z] += cdf_safe_[z - 1];
      cdf_comp_[z] += cdf_comp_[z - 1];
    }
  }

  const RecoveryParams& params() const { return params_; }

  int num_states() const override { return n_; }
  int num_controls() const override { return n_; }
  int num_observations() const override { return (int)nz_; }
  double discount() const override { return params_.discount; }

  double transition(int i, int u, int j) const override {
    int k = params_.replicas;
    double p = 1.0;
    for (int l = 0; l < k; ++l) {
      int il = (i >> l) & 1, ul = (u >> l) & 1, jl = (j >> l) & 1;
      if (ul == 1) {
        // recovery sets the replica to safe for this step
        if (jl != 0) return 0.0;
      } else if (il == 1) {
        // compromised and unattended: absorbed
        if (jl != 1) return 0.0;
      } else {
        double c = compromise_[(size_t)i * k + l];
        p *= jl ? c : (1.0 - c);
      }
    }
    return p;
  }

  double observation_prob(int z, int j, int) const override {
    int k = params_.replicas;
    double p = 1.0;
    long rest = z;
    for (int l = 0; l < k; ++l) {
      int zl = (int)(rest % params_.obs_support);
      rest /= params_.obs_support;
      p *= ((j >> l) & 1) ? params_.obs_compromised[zl] : params_.obs_safe[zl];
    }
    return p;
  }

  void observation_likelihoods(int z, int, std::span<double> out) const override {
    int k = params_.replicas;
    double lik[2][20];
    long rest = z;
    for (int l = 0; l < k; ++l) {
      int zl = (int)(rest % params_.obs_support);
      rest /= params_.obs_support;
      lik[0][l] = params_.obs_safe[zl];
      lik[1][l] = params_.obs_compromised[zl];
    }
    for (int j = 0; j < n_; ++j) {
      double p = 1.0;
      for (int l = 0; l < k; ++l) p *= lik[(j >> l) & 1][l];
      out[j] = p;
    }
  }

  double cost(int i, int u, int) const override { return stage_cost(i, u); }

  double expected_cost(int i, int u) const override { return stage_cost(i, u); }

  double max_stage_cost() const override {
    return params_.intrusion_cost_weight * params_.replicas;
  }

  TransitionSample sample_step(int i, int u, Rng& rng) const override {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int k = params_.replicas;
    TransitionSample s;
    s.cost = stage_cost(i, u);
    int j = 0;
    for (int l = 0; l < k; ++l) {
      int il = (i >> l) & 1, ul = (u >> l) & 1;
      int jl;
      if (ul == 1)
        jl = 0;
      else if (il == 1)
        jl = 1;
      else
        jl = unif(rng) < compromise_[(size_t)i * k + l] ? 1 : 0;
      j |= jl << l;
    }
    s.next_state = j;
    long z = 0;
    for (int l = 0; l < k; ++l) {
      const auto& cdf = ((j >> l) & 1) ? cdf_comp_ : cdf_safe_;
      double r = unif(rng);
      int zl = params_.obs_support - 1;
      for (int c = 0; c < params_.obs_support; ++c)
        if (r < cdf[c]) {
          zl = c;
          break;
        }
      z += (long)zl * zpow_[l];
    }
    s.observation = (int)z;
    return s;
  }

private:
  double stage_cost(int i, int u) const {
    int k = params_.replicas;
    double g = 0.0;
    for (int l = 0; l < k; ++l) {
      int il = (i >> l) & 1, ul = (u >> l) & 1;
      g += params_.intrusion_cost_weight * il * (1 - ul) +
           params_.recovery_cost_weight * ul * (1 - il) -
           params_.recovery_bonus_weight * ul * il;
    }
    return g;
  }

  RecoveryParams params_;
  int n_ = 0;
  long nz_ = 0;
  std::vector<long> zpow_;
  std::vector<double> compromise_;  // [state][replica]
  std::vector<double> cdf_safe_, cdf_comp_;
};

/// Dense tensors are materialized only for K <= 2; larger instances stay
/// factored and are evaluated on the fly.
inline std::shared_ptr<const PomdpModel> build_recovery_pomdp(const RecoveryParams& params) {
  auto factored = std::make_shared<RecoveryModel>(params);
  if (params.replicas <= 2) return densify(*factored);
  return factored;
}

/// Non-stationary scenario: the model parameters change at step k0. The
/// default delta shifts the safe-state alert distribution toward the
/// compromised one with mixing weight 0.3.
struct ScenarioSwitch {
  long switch_step = 0;
  RecoveryParams post_switch_params;

  static ScenarioSwitch default_delta(const RecoveryParams& pre, long k0, double mix = 0.3) {
    ScenarioSwitch sw;
    sw.switch_step = k0;
    sw.post_switch_params = pre;
    for (int z = 0; z < pre.obs_support; ++z)
      sw.post_switch_params.obs_safe[z] =
          (1.0 - mix) * pre.obs_safe[z] + mix * pre.obs_compromised[z];
    return sw;
  }
};

/// Pure selection between the pre- and post-switch models by time index.
inline std::shared_ptr<const PomdpModel> apply_scenario_switch(
    const std::shared_ptr<const PomdpModel>& pre_model,
    const std::shared_ptr<const PomdpModel>& post_model, const ScenarioSwitch& sw, long k) {
  return k < sw.switch_step ? pre_model : post_model;
}

/// Zone features: y^v = 1 iff any replica in zone v is compromised; feature
/// space of size 2^V with uniform disaggregation over consistent states.
inline FeatureSpace zone_feature_space(const RecoveryParams& params,
                                       const std::vector<std::vector<int>>& zones) {
  int k = params.replicas;
  std::vector<int> zone_of(k, -1);
  for (int v = 0; v < (int)zones.size(); ++v)
    for (int l : zones[v]) {
      if (l < 0 || l >= k || zone_of[l] != -1) throw ConfigError("zones must partition replicas");
      zone_of[l] = v;
    }
  for (int l = 0; l < k; ++l)
    if (zone_of[l] == -1) throw ConfigError("zones must cover every replica");
  int n = 1 << k;
  std::vector<int> state_to_feature(n, 0);
  for (int i = 0; i < n; ++i) {
    int y = 0;
    for (int l = 0; l < k; ++l)
      if ((i >> l) & 1) y |= 1 << zone_of[l];
    state_to_feature[i] = y;
  }
  auto fs = FeatureSpace::grouping(n, std::move(state_to_feature));
  // pad empty feature states cannot occur: every zone-bit pattern has at
  // least one consistent state because zones are nonempty
  return fs;
}

}  // namespace beliefagg
