#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "transfuse/learners.hpp"

namespace transfuse::detail {

// Per-feature quantized copy of a training matrix. Bin b of feature f holds
// values in (edges[b-1], edges[b]]; the last bin is unbounded above.
struct BinnedMatrix {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<std::vector<std::uint16_t>> bins;
  std::vector<int> bin_count;
};

inline constexpr int kMaxBins = 256;

BinnedMatrix bin_features(const Eigen::MatrixXd& X, int max_bins = kMaxBins);

struct GiniOptions {
  int max_depth = 10;
  int min_samples_split = 2;
  int max_features = 0;  // candidate features per split; 0 = all
};

// Classification tree on Gini impurity; leaves store the positive fraction.
// `rows` may contain repeats (bootstrap draws).
Tree grow_gini_tree(const BinnedMatrix& B, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    std::vector<Eigen::Index> rows, const GiniOptions& opt, std::mt19937_64& rng);

// Second-order regression tree; leaves store -G / (H + lambda).
Tree grow_newton_tree(const BinnedMatrix& B, const Eigen::MatrixXd& X, const Eigen::VectorXd& grad,
                      const Eigen::VectorXd& hess, int max_depth, double lambda, double gamma);

}  // namespace transfuse::detail
