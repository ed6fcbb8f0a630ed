#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "transfuse/learners.hpp"

namespace transfuse {

// First-level models in fixed order: RF, SVM, GBT.
inline constexpr std::array<Family, 3> kBaseFamilies{Family::RF, Family::SVM, Family::GBT};

struct StackedModel {
  std::array<FittedModel, 3> base;  // refit on every training row
  FittedModel meta;                 // input: the three base probabilities
  int n_folds = 5;
  std::uint64_t seed = 0;
};

struct StackFit {
  StackedModel model;
  Eigen::MatrixXd out_of_fold;  // n x 3; row i predicted by bases that never saw it
  std::vector<int> fold_of_row;
};

// Hyperparameters used when no tuning result is supplied.
std::array<ModelSpec, 3> default_base_specs(std::uint64_t seed = 0);
ModelSpec default_meta_spec();

// Throws ValidationError unless the specs are RF, SVM, GBT in that order.
void validate_base_specs(const std::array<ModelSpec, 3>& specs);

StackFit fit_stack(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::array<ModelSpec, 3>& base_specs,
                   const ModelSpec& meta_spec, int n_folds = 5, std::uint64_t seed = 0);

// n x 3 matrix of base-model probabilities.
Eigen::MatrixXd base_probabilities(const StackedModel& s, const Eigen::MatrixXd& X);

Eigen::VectorXd predict_stack(const StackedModel& s, const Eigen::MatrixXd& X);

}  // namespace transfuse
