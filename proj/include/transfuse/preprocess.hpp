#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "transfuse/cohort.hpp"

namespace transfuse {

struct RowMeta {
  std::string encounter_id;
  int event_index = 0;
  int year = kFirstYear;
  int label = 0;
};

// Dense instances x features matrix; NaN marks a missing cell.
struct FeatureMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> columns;
  std::vector<RowMeta> rows;

  Eigen::Index n_rows() const { return values.rows(); }
  Eigen::Index n_cols() const { return values.cols(); }
  Eigen::VectorXd labels() const;
  FeatureMatrix select_rows(const std::vector<Eigen::Index>& idx) const;
  FeatureMatrix select_columns(const std::vector<Eigen::Index>& idx) const;
  // Throws ValidationError on duplicate columns or mismatched metadata.
  void validate() const;
};

FeatureMatrix to_feature_matrix(const std::vector<CohortInstance>& instances);

// Removes columns whose missing fraction is strictly greater than `threshold`.
FeatureMatrix drop_sparse_features(const FeatureMatrix& m, double threshold = 0.90);

struct PearsonSelection {
  std::vector<Eigen::Index> kept;            // column indices, input order
  std::vector<std::string> undefined;        // columns with zero variance on some complete pair
};

// Pairwise-complete Pearson r for columns a and b; NaN when undefined.
double pairwise_pearson(const Eigen::MatrixXd& values, Eigen::Index a, Eigen::Index b);

// Greedy: visit columns in order and drop a column when |r| > r_max against
// any earlier kept column.
PearsonSelection pearson_selection(const FeatureMatrix& m, double r_max = 0.9);
FeatureMatrix select_features_pearson(const FeatureMatrix& m, double r_max = 0.9);

// ---- MICE ------------------------------------------------------------------

// OLS model for one column on every other column, in standardized units.
struct ColumnRegressor {
  Eigen::Index column = 0;
  Eigen::VectorXd coefficients;  // one per column; entry `column` is zero
  double intercept = 0.0;
};

struct MiceState {
  Eigen::VectorXd means;   // observed-cell column means
  Eigen::VectorXd scales;  // observed-cell column standard deviations (1 if degenerate)
  std::vector<ColumnRegressor> regressors;  // incomplete columns, visit order
  int cycles = 0;
};

struct MiceResult {
  Eigen::MatrixXd imputed;
  MiceState state;
};

// Added to the normal equations when they are numerically singular.
inline constexpr double kMiceRidge = 1e-8;

// Chained-equation imputation: mean start, then `cycles` passes of OLS
// regression per incomplete column in column order, imputing draws from the
// fitted predictive distribution (seeded). The returned matrix is the frozen
// predictive-mean pass of the final regressors, as mice_transform gives.
MiceResult mice_impute(const Eigen::MatrixXd& values, int cycles = 10, std::uint64_t seed = 0);

// Frozen single-pass imputation with fitted regressors; observed cells kept.
Eigen::MatrixXd mice_transform(const MiceState& state, const Eigen::MatrixXd& values);

// ---- scaling and projection --------------------------------------------------

struct MinMaxState {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
};

MinMaxState fit_minmax(const Eigen::MatrixXd& values);

// Maps train [min, max] to [0, 1], clips held-out values, constant columns to 0.
template <typename Derived>
Eigen::MatrixXd transform_minmax(const MinMaxState& s, const Eigen::MatrixBase<Derived>& values) {
  Eigen::MatrixXd out(values.rows(), values.cols());
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    const double range = s.max(c) - s.min(c);
    if (range > 0.0) {
      out.col(c) = ((values.col(c).array() - s.min(c)) / range).cwiseMax(0.0).cwiseMin(1.0);
    } else {
      out.col(c).setZero();
    }
  }
  return out;
}

struct PcaState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd loadings;      // k x d, orthonormal rows
  Eigen::VectorXd eigenvalues;   // all d, non-increasing
  Eigen::VectorXd explained;     // eigenvalue / total, non-increasing
  Eigen::Index k = 0;
};

inline constexpr double kVarianceTolerance = 1e-12;

// Covariance eigendecomposition (divisor n-1); k is the shortest prefix whose
// cumulative explained ratio reaches `variance_target` (to within
// kVarianceTolerance). Each loading's largest-magnitude entry is positive.
PcaState fit_pca(const Eigen::MatrixXd& values, double variance_target = 0.90);

template <typename Derived>
Eigen::MatrixXd transform_pca(const PcaState& s, const Eigen::MatrixBase<Derived>& values) {
  return (values.rowwise() - s.mean.transpose()) * s.loadings.transpose();
}

// ---- pipeline --------------------------------------------------------------

struct PipelineOptions {
  double missing_threshold = 0.90;
  double r_max = 0.9;
  int mice_cycles = 10;
  double variance_target = 0.90;
  std::uint64_t mice_seed = 0;

  void validate() const;
};

struct FittedPreprocessor {
  std::vector<std::string> kept_features;
  std::vector<std::string> undefined_correlation;
  MiceState mice;
  MinMaxState minmax;
  PcaState pca;
  PipelineOptions options;

  Eigen::Index output_dim() const { return pca.k; }
  std::vector<std::string> output_columns() const;
};

struct PipelineFit {
  FittedPreprocessor preprocessor;
  FeatureMatrix transformed;
};

// Fits drop-sparse, Pearson selection, MICE, min-max, PCA on `train` only.
// Training rows are transformed through the frozen chain, so
// apply_pipeline(p, train) reproduces `transformed` exactly.
PipelineFit fit_pipeline(const FeatureMatrix& train, const PipelineOptions& options = {});

// Columns are looked up by name; throws SchemaError listing missing columns.
FeatureMatrix apply_pipeline(const FittedPreprocessor& p, const FeatureMatrix& m);

// Raw values already in kept_features order -> transformed matrix.
Eigen::MatrixXd transform_kept(const FittedPreprocessor& p, const Eigen::MatrixXd& kept_values);

// Column indices of `columns` that feed the pipeline, in kept_features order.
std::vector<Eigen::Index> kept_column_indices(const FittedPreprocessor& p, const std::vector<std::string>& columns);

}  // namespace transfuse
