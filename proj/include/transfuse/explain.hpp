#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "transfuse/metrics.hpp"
#include "transfuse/preprocess.hpp"
#include "transfuse/stacking.hpp"

namespace transfuse {

// Scores every row of a batch.
using BatchScorer = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

enum class ShapleyMethod { Exact, Sampled };
std::string_view method_name(ShapleyMethod m);

inline constexpr int kMaxExactFeatures = 15;

struct Attribution {
  Eigen::VectorXd values;
  Eigen::VectorXd std_error;  // zeros for the exact method
  double base_value = 0.0;    // v(empty set): mean score over the background
  double output = 0.0;        // f(instance)
};

// Interventional Shapley values: v(S) averages f over background rows with
// the features in S replaced by the instance's values. Enumerates all 2^d
// coalitions; throws ValidationError when d > kMaxExactFeatures.
Attribution exact_shapley(const BatchScorer& f, const Eigen::VectorXd& instance, const Eigen::MatrixXd& background);

// Permutation sampling: each sample draws a random feature order and a random
// background row and walks from the row to the instance one feature at a time.
// Requires n_samples >= 2d. Deterministic for a given seed.
Attribution sampled_shapley(const BatchScorer& f, const Eigen::VectorXd& instance, const Eigen::MatrixXd& background,
                            int n_samples, std::uint64_t seed);

struct AttributionSet {
  ShapleyMethod method = ShapleyMethod::Exact;
  std::vector<std::string> features;
  double base_value = 0.0;
  Eigen::MatrixXd values;      // instances x features
  Eigen::MatrixXd std_error;   // instances x features
  Eigen::VectorXd outputs;     // model output per instance
};

struct FeatureImportance {
  std::string name;
  double mean_abs = 0.0;
};

// Features sorted by mean |attribution|, descending; ties keep column order.
std::vector<FeatureImportance> rank_features(const AttributionSet& set);

struct ScatterSeries {
  std::string model;
  std::string feature;
  std::vector<CurvePoint> points;  // (raw clinical value, attribution); x is NaN when missing
};

enum class BackgroundSource { Train, Test };
std::string_view background_source_name(BackgroundSource s);
BackgroundSource parse_background_source(std::string_view s);

struct PanelConfig {
  std::size_t n_instances = 100;   // test rows explained (stratified subsample)
  std::size_t n_background = 100;
  int n_samples = 64;              // permutations per instance for base-level attributions
  int top_k = 5;
  BackgroundSource background = BackgroundSource::Train;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BaseExplanation {
  std::string model;
  AttributionSet attributions;  // over the raw features that feed the pipeline
  std::vector<FeatureImportance> ranking;
  std::vector<ScatterSeries> scatter;  // top_k features
};

struct Panel {
  AttributionSet meta;  // features: the base models
  std::vector<FeatureImportance> meta_ranking;
  std::vector<BaseExplanation> bases;  // kBaseFamilies order
  std::vector<RowMeta> instances;
  int top_k = 5;
};

// Up to n rows of `pool` with class proportions preserved.
FeatureMatrix select_background(const FeatureMatrix& pool, std::size_t n, std::uint64_t seed);

// Meta level: exact attributions of the meta-learner over the three base
// probabilities. Base level: sampled attributions of preprocessing followed by
// each base model, over raw clinical features. Columns the pipeline drops
// cannot change the output and are left out.
Panel build_panel(const StackedModel& stack, const FittedPreprocessor& preprocessor, const FeatureMatrix& test,
                  const FeatureMatrix& background, const PanelConfig& config);

void write_panel_json(std::ostream& out, const Panel& panel);
// Columns: model, feature, encounter_id, event_index, value, attribution.
void write_panel_scatter(std::ostream& out, const Panel& panel);

}  // namespace transfuse
