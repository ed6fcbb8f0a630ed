#include "transfuse/stacking.hpp"

#include <cmath>

#include "transfuse/errors.hpp"
#include "transfuse/sampling.hpp"

namespace transfuse {

std::array<ModelSpec, 3> default_base_specs(std::uint64_t seed) {
  ForestParams rf;
  rf.seed = seed;
  SvmParams svm;
  svm.max_train_rows = 2000;
  svm.seed = seed;
  BoostParams gbt;
  gbt.seed = seed;
  return {rf, svm, gbt};
}

ModelSpec default_meta_spec() { return NaiveBayesParams{}; }

void validate_base_specs(const std::array<ModelSpec, 3>& specs) {
  for (std::size_t k = 0; k < 3; ++k) {
    if (family_of(specs[k]) != kBaseFamilies[k]) {
      throw ValidationError("base model " + std::to_string(k) + " must be " +
                            std::string(family_name(kBaseFamilies[k])) + ", got " +
                            std::string(family_name(family_of(specs[k]))));
    }
    validate_spec(specs[k]);
  }
}

StackFit fit_stack(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::array<ModelSpec, 3>& base_specs,
                   const ModelSpec& meta_spec, int n_folds, std::uint64_t seed) {
  validate_base_specs(base_specs);
  validate_spec(meta_spec);
  if (X.rows() != y.size()) throw ValidationError("X and y differ in row count");

  StackFit out;
  out.fold_of_row = stratified_folds(y, n_folds, seed);
  out.out_of_fold = Eigen::MatrixXd::Constant(X.rows(), 3, std::nan(""));
  for (int k = 0; k < n_folds; ++k) {
    const auto train = rows_outside_fold(out.fold_of_row, k);
    const auto held = rows_in_fold(out.fold_of_row, k);
    const Eigen::MatrixXd Xtr = X(train, Eigen::all);
    const Eigen::VectorXd ytr = y(train);
    const Eigen::MatrixXd Xho = X(held, Eigen::all);
    for (std::size_t b = 0; b < 3; ++b) {
      const FittedModel m = fit_model(base_specs[b], Xtr, ytr);
      const Eigen::VectorXd p = predict_proba(m, Xho);
      for (std::size_t r = 0; r < held.size(); ++r) out.out_of_fold(held[r], static_cast<Eigen::Index>(b)) = p(static_cast<Eigen::Index>(r));
    }
  }

  out.model.meta = fit_model(meta_spec, out.out_of_fold, y);
  for (std::size_t b = 0; b < 3; ++b) out.model.base[b] = fit_model(base_specs[b], X, y);
  out.model.n_folds = n_folds;
  out.model.seed = seed;
  return out;
}

Eigen::MatrixXd base_probabilities(const StackedModel& s, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd P(X.rows(), 3);
  for (std::size_t b = 0; b < 3; ++b) P.col(static_cast<Eigen::Index>(b)) = predict_proba(s.base[b], X);
  return P;
}

Eigen::VectorXd predict_stack(const StackedModel& s, const Eigen::MatrixXd& X) {
  return predict_proba(s.meta, base_probabilities(s, X));
}

}  // namespace transfuse
