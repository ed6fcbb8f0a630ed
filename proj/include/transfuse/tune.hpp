#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "transfuse/learners.hpp"

namespace transfuse {

using AxisValue = std::variant<double, std::string>;

struct Axis {
  std::string name;
  std::vector<AxisValue> values;
};

// Meta-model searches use Family::GNB as the tag; the "meta" axis switches
// families and "var_smoothing" applies only to GNB.
struct SearchSpace {
  Family family = Family::RF;
  bool meta = false;
  ModelSpec base;  // defaults for hyperparameters not on an axis
  std::vector<Axis> axes;

  std::size_t cardinality() const;  // product of axis lengths
};

enum class GridMode { Full, Reduced };
GridMode parse_grid_mode(std::string_view s);

// Full search spaces (RF, SVM, GBT, FNN) and the meta-model space.
SearchSpace full_space(Family family, const ModelSpec& base);
SearchSpace full_meta_space();
// At most two values per axis, drawn from the full lists.
SearchSpace reduced_space(Family family, const ModelSpec& base);
SearchSpace reduced_meta_space();
SearchSpace search_space(Family family, const ModelSpec& base, GridMode mode);
SearchSpace meta_space(GridMode mode);

// Cartesian product, last axis varying fastest; duplicate specs removed.
std::vector<ModelSpec> grid(const SearchSpace& space);

struct TrialResult {
  std::size_t index = 0;  // position in grid()
  ModelSpec spec;
  double mean_auroc = 0.0;
  std::vector<double> fold_auroc;
  double wall_seconds = 0.0;
};

struct GridSearchResult {
  ModelSpec best;
  std::size_t best_index = 0;
  std::vector<TrialResult> trials;  // one per grid point, grid order
  std::vector<int> folds;           // inner fold of each training row
};

// Larger means more capacity; used to break AUROC ties toward simpler specs.
std::vector<double> capacity_key(const ModelSpec& spec);

// Stratified k-fold CV over the given rows only; best = highest mean fold
// AUROC, then lowest capacity, then grid order.
GridSearchResult grid_search(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SearchSpace& space,
                             int k_inner = 3, std::uint64_t seed = 0);

void write_trials(const std::filesystem::path& path, const std::vector<TrialResult>& trials);

}  // namespace transfuse
