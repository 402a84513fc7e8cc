#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "vos/dataset.hpp"
#include "vos/random.hpp"

namespace vos::testing {

struct GaussianBlobs {
  std::size_t majority = 1000;
  std::size_t minority = 50;
  double majority_center[2] = {0.0, 0.0};
  double minority_center[2] = {2.0, 2.0};
  double majority_sd = 1.0;
  double minority_sd = 0.7;
  double correlation = 0.0;  // between the two coordinates, both classes
};

/// Two 2-D Gaussian classes, optionally correlated; majority rows first, label 1 = minority.
inline Dataset gaussian_blobs(const GaussianBlobs& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double rho = spec.correlation;
  const double ortho = std::sqrt(1.0 - rho * rho);
  Matrix x(0, 2);
  std::vector<int> y;
  auto draw = [&](const double* center, double sd, int label) {
    const double a = n01(rng), b = n01(rng);
    const double row[2] = {center[0] + sd * a, center[1] + sd * (rho * a + ortho * b)};
    x.append_row(row);
    y.push_back(label);
  };
  for (std::size_t i = 0; i < spec.majority; ++i) draw(spec.majority_center, spec.majority_sd, 0);
  for (std::size_t i = 0; i < spec.minority; ++i) draw(spec.minority_center, spec.minority_sd, 1);
  return Dataset::from_matrix(std::move(x), std::move(y));
}

/// Training and test draws of the same task concatenated; returns the test row indices.
inline std::pair<Dataset, std::vector<std::size_t>> blobs_with_test(const GaussianBlobs& train_spec,
                                                                    const GaussianBlobs& test_spec,
                                                                    std::uint64_t seed) {
  Dataset all = gaussian_blobs(train_spec, seed);
  const Dataset test = gaussian_blobs(test_spec, seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> test_idx;
  for (std::size_t i = 0; i < test.size(); ++i) test_idx.push_back(all.size() + i);
  all.features.append_rows(test.features);
  all.labels.insert(all.labels.end(), test.labels.begin(), test.labels.end());
  all.weights.insert(all.weights.end(), test.weights.begin(), test.weights.end());
  all.provenance.insert(all.provenance.end(), test.provenance.begin(), test.provenance.end());
  for (std::size_t i = 0; i < test.size(); ++i) all.row_ids.push_back(test_idx[i]);
  return {std::move(all), std::move(test_idx)};
}

}  // namespace vos::testing
