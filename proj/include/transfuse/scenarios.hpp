#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "transfuse/bundle.hpp"
#include "transfuse/cohort.hpp"
#include "transfuse/learners.hpp"
#include "transfuse/metrics.hpp"
#include "transfuse/preprocess.hpp"
#include "transfuse/stacking.hpp"
#include "transfuse/tune.hpp"

namespace transfuse {

struct ScenarioSplit {
  int held_out_year = 0;
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;
};

// Throws ValidationError when either side would be empty.
ScenarioSplit split_by_year(const std::vector<RowMeta>& rows, int held_out_year);
ScenarioSplit split_by_year(const std::vector<CohortInstance>& instances, int held_out_year);

std::vector<int> distinct_years(const std::vector<RowMeta>& rows);

// Model rows of the results grid, in display order.
inline constexpr std::array<std::string_view, 6> kModelRows{"LR", "RF", "GBT", "SVM", "FNN", "MM"};

struct ModelLineup {
  LogisticParams lr;
  NetParams fnn;
  std::array<ModelSpec, 3> base;  // RF, SVM, GBT: standalone rows and stack members
  ModelSpec meta;
};

ModelLineup default_lineup(std::uint64_t seed = 0);

struct TuneConfig {
  bool enabled = false;
  GridMode mode = GridMode::Reduced;
  int k_inner = 3;
  std::size_t max_rows = 3000;  // stratified subsample of the training split used for the search
  bool reuse_first = false;     // tune once on the first scenario and reuse the result
};

struct ScenarioConfig {
  PipelineOptions pipeline;
  ModelLineup lineup = default_lineup();
  std::vector<int> years;  // held-out years; empty = every year in the data
  int n_folds = 5;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  TuneConfig tune;
  bool keep_fits = false;

  void validate() const;
};

struct ScenarioFit {
  FittedPreprocessor preprocessor;
  std::vector<FittedModel> models;  // LR, RF, GBT, SVM, FNN
  StackedModel stack;
};

std::uint64_t state_hash(const ScenarioFit& fit);

struct LeakageAudit {
  std::size_t shared_encounters = 0;
  std::size_t train_rows_in_test_year = 0;
  std::size_t test_rows_outside_year = 0;
  std::uint64_t hash_before = 0;
  std::uint64_t hash_after = 0;

  bool ok() const {
    return shared_encounters == 0 && train_rows_in_test_year == 0 && test_rows_outside_year == 0 &&
           hash_before == hash_after;
  }
};

struct ModelCurves {
  std::string model;
  CurveSeries roc;
  CurveSeries pr;
  CurveSeries calibration;
};

struct TuningLog {
  std::string model;
  std::vector<TrialResult> trials;
  ModelSpec best;
};

struct ScenarioReport {
  int held_out_year = 0;
  std::vector<int> train_years;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<MetricsRow> metrics;  // kModelRows order
  std::vector<ModelCurves> curves;  // kModelRows order
  LeakageAudit audit;
  std::vector<TuningLog> tuning;
  std::optional<ScenarioFit> fit;
  double seconds = 0.0;
};

// Fits the preprocessing chain and every model on `train`; tuning logs are
// appended to `tuning` when enabled.
ScenarioFit fit_scenario(const FeatureMatrix& train, const ScenarioConfig& config,
                         std::vector<TuningLog>* tuning = nullptr);

// n x 6 probabilities in kModelRows order for raw instances.
Eigen::MatrixXd scenario_scores(const ScenarioFit& fit, const FeatureMatrix& raw);

ScenarioReport evaluate_scenario(const ScenarioFit& fit, const FeatureMatrix& test, double threshold = 0.5);

std::vector<ScenarioReport> run_scenarios(const std::vector<CohortInstance>& instances, const ScenarioConfig& config);

// Cross-scenario mean curves with bands, kModelRows order.
std::vector<ModelCurves> aggregate_reports(const std::vector<ScenarioReport>& reports);

ModelBundle make_bundle(const ScenarioFit& fit, Provenance provenance);
ScenarioFit fit_from_bundle(const ModelBundle& bundle);

// Grid: rows = models, columns = <year>_{AUC,Acc,F1,Pre,Rec}, plus mean and std.
void write_metrics_grid(std::ostream& out, const std::vector<ScenarioReport>& reports);
void write_curves_json(std::ostream& out, const std::vector<ModelCurves>& curves);

}  // namespace transfuse
