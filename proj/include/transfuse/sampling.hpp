#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace transfuse {

// Fold id per row; each class is shuffled and dealt round-robin so every
// fold holds both classes. Throws when a class has fewer than k rows.
std::vector<int> stratified_folds(const Eigen::VectorXd& y, int k, std::uint64_t seed);

// Up to `n` row indices with class proportions preserved, sorted ascending.
std::vector<Eigen::Index> stratified_subsample(const Eigen::VectorXd& y, std::size_t n, std::uint64_t seed);

// Rows where fold != k (train) or fold == k (held out).
std::vector<Eigen::Index> rows_outside_fold(const std::vector<int>& folds, int k);
std::vector<Eigen::Index> rows_in_fold(const std::vector<int>& folds, int k);

}  // namespace transfuse
