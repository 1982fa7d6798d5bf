#pragma once

#include <memory>
#include <vector>

#include "beliefagg/model.hpp"

namespace testutil {

using namespace beliefagg;

/// Random dense POMDP with Dirichlet(1,..,1) rows and uniform costs in [0,1].
inline std::shared_ptr<DenseModel> random_model(int n, int nu, int nz, double alpha,
                                                uint64_t seed) {
  Rng rng = make_stream(seed, {0x7e57});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto random_row = [&](double* row, int len) {
    double sum = 0.0;
    for (int k = 0; k < len; ++k) {
      row[k] = -std::log(1.0 - unif(rng));
      sum += row[k];
    }
    for (int k = 0; k < len; ++k) row[k] /= sum;
  };
  std::vector<double> t((size_t)n * nu * n), o((size_t)n * nu * nz), g((size_t)n * nu * n);
  for (int i = 0; i < n; ++i)
    for (int u = 0; u < nu; ++u) {
      random_row(&t[((size_t)i * nu + u) * n], n);
      random_row(&o[((size_t)i * nu + u) * nz], nz);
      for (int j = 0; j < n; ++j) g[((size_t)i * nu + u) * n + j] = unif(rng);
    }
  return std::make_shared<DenseModel>(n, nu, nz, alpha, std::move(t), std::move(o), std::move(g));
}

inline Belief random_belief(int n, uint64_t seed) {
  Rng rng = make_stream(seed, {0xbe11ef});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Belief b(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    b[i] = -std::log(1.0 - unif(rng));
    sum += b[i];
  }
  for (double& v : b) v /= sum;
  return b;
}

}  // namespace testutil
