#include "transfuse/sampling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "transfuse/errors.hpp"

namespace transfuse {

namespace {

std::array<std::vector<Eigen::Index>, 2> by_class(const Eigen::VectorXd& y) {
  std::array<std::vector<Eigen::Index>, 2> idx;
  for (Eigen::Index i = 0; i < y.size(); ++i) idx[y(i) > 0.5 ? 1 : 0].push_back(i);
  return idx;
}

}  // namespace

std::vector<int> stratified_folds(const Eigen::VectorXd& y, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("need at least two folds");
  auto idx = by_class(y);
  for (const auto& cls : idx) {
    if (static_cast<int>(cls.size()) < k) {
      throw ValidationError("cannot stratify into " + std::to_string(k) + " folds: a class has only " +
                            std::to_string(cls.size()) + " rows");
    }
  }
  std::mt19937_64 rng(seed);
  std::vector<int> folds(static_cast<std::size_t>(y.size()), 0);
  int next = 0;
  for (auto& cls : idx) {
    std::shuffle(cls.begin(), cls.end(), rng);
    for (const auto i : cls) {
      folds[static_cast<std::size_t>(i)] = next;
      next = (next + 1) % k;
    }
  }
  return folds;
}

std::vector<Eigen::Index> stratified_subsample(const Eigen::VectorXd& y, std::size_t n, std::uint64_t seed) {
  std::vector<Eigen::Index> out;
  if (n >= static_cast<std::size_t>(y.size())) {
    for (Eigen::Index i = 0; i < y.size(); ++i) out.push_back(i);
    return out;
  }
  auto idx = by_class(y);
  std::mt19937_64 rng(seed);
  const double frac = static_cast<double>(n) / static_cast<double>(y.size());
  for (auto& cls : idx) {
    std::shuffle(cls.begin(), cls.end(), rng);
    auto take = static_cast<std::size_t>(std::lround(frac * static_cast<double>(cls.size())));
    take = std::clamp<std::size_t>(take, cls.empty() ? 0 : 1, cls.size());
    out.insert(out.end(), cls.begin(), cls.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Eigen::Index> rows_outside_fold(const std::vector<int>& folds, int k) {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if (folds[i] != k) out.push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

std::vector<Eigen::Index> rows_in_fold(const std::vector<int>& folds, int k) {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if (folds[i] == k) out.push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

}  // namespace transfuse
