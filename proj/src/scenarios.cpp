#include "transfuse/scenarios.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <set>

#include <json.hpp>

#include "transfuse/errors.hpp"
#include "transfuse/sampling.hpp"

namespace transfuse {

ScenarioSplit split_by_year(const std::vector<RowMeta>& rows, int held_out_year) {
  ScenarioSplit s;
  s.held_out_year = held_out_year;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    (rows[i].year == held_out_year ? s.test_rows : s.train_rows).push_back(static_cast<Eigen::Index>(i));
  }
  if (s.test_rows.empty()) throw ValidationError("no instances in held-out year " + std::to_string(held_out_year));
  if (s.train_rows.empty()) {
    throw ValidationError("no training instances outside held-out year " + std::to_string(held_out_year));
  }
  return s;
}

ScenarioSplit split_by_year(const std::vector<CohortInstance>& instances, int held_out_year) {
  std::vector<RowMeta> rows;
  rows.reserve(instances.size());
  for (const auto& inst : instances) rows.push_back({inst.encounter_id, inst.event_index, inst.year, inst.label});
  return split_by_year(rows, held_out_year);
}

std::vector<int> distinct_years(const std::vector<RowMeta>& rows) {
  std::set<int> years;
  for (const auto& r : rows) years.insert(r.year);
  return {years.begin(), years.end()};
}

ModelLineup default_lineup(std::uint64_t seed) {
  ModelLineup l;
  l.fnn.seed = seed;
  l.base = default_base_specs(seed);
  l.meta = default_meta_spec();
  return l;
}

void ScenarioConfig::validate() const {
  pipeline.validate();
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ValidationError("decision threshold must be in (0, 1]");
  if (n_folds < 2) throw ValidationError("stacking needs at least two folds");
  validate_spec(lineup.lr);
  validate_spec(lineup.fnn);
  validate_base_specs(lineup.base);
  validate_spec(lineup.meta);
  if (tune.k_inner < 2) throw ValidationError("inner CV needs at least two folds");
}

std::uint64_t state_hash(const ScenarioFit& fit) {
  std::string acc = hex64(state_hash(fit.preprocessor));
  for (const auto& m : fit.models) acc += hex64(state_hash(m));
  acc += hex64(state_hash(fit.stack));
  return fnv1a64(acc);
}

ScenarioFit fit_scenario(const FeatureMatrix& train, const ScenarioConfig& config, std::vector<TuningLog>* tuning) {
  config.validate();
  ScenarioFit fit;
  PipelineFit pf = fit_pipeline(train, config.pipeline);
  fit.preprocessor = std::move(pf.preprocessor);
  const Eigen::MatrixXd& X = pf.transformed.values;
  const Eigen::VectorXd y = train.labels();

  ModelLineup lineup = config.lineup;
  if (config.tune.enabled) {
    std::vector<Eigen::Index> rows;
    if (config.tune.max_rows > 0 && static_cast<std::size_t>(X.rows()) > config.tune.max_rows) {
      rows = stratified_subsample(y, config.tune.max_rows, config.seed);
    } else {
      rows.resize(static_cast<std::size_t>(X.rows()));
      for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<Eigen::Index>(i);
    }
    const Eigen::MatrixXd Xs = X(rows, Eigen::all);
    const Eigen::VectorXd ys = y(rows);
    auto tune_one = [&](const ModelSpec& base) {
      const Family f = family_of(base);
      GridSearchResult r = grid_search(Xs, ys, search_space(f, base, config.tune.mode), config.tune.k_inner, config.seed);
      if (tuning) tuning->push_back({std::string(family_name(f)), r.trials, r.best});
      return r.best;
    };
    for (auto& b : lineup.base) b = tune_one(b);
    lineup.fnn = std::get<NetParams>(tune_one(lineup.fnn));
  }

  fit.models.push_back(fit_model(lineup.lr, X, y));
  StackFit sf = fit_stack(X, y, lineup.base, lineup.meta, config.n_folds, config.seed);
  if (config.tune.enabled) {
    GridSearchResult r =
        grid_search(sf.out_of_fold, y, meta_space(config.tune.mode), config.tune.k_inner, config.seed);
    if (tuning) tuning->push_back({"MM", r.trials, r.best});
    sf.model.meta = fit_model(r.best, sf.out_of_fold, y);
  }
  fit.stack = std::move(sf.model);
  // Standalone RF/GBT/SVM rows are the stack's full-data refits.
  fit.models.push_back(fit.stack.base[0]);
  fit.models.push_back(fit.stack.base[2]);
  fit.models.push_back(fit.stack.base[1]);
  fit.models.push_back(fit_model(lineup.fnn, X, y));
  return fit;
}

Eigen::MatrixXd scenario_scores(const ScenarioFit& fit, const FeatureMatrix& raw) {
  const Eigen::MatrixXd X = apply_pipeline(fit.preprocessor, raw).values;
  Eigen::MatrixXd S(X.rows(), 6);
  for (std::size_t k = 0; k < fit.models.size(); ++k) S.col(static_cast<Eigen::Index>(k)) = predict_proba(fit.models[k], X);
  S.col(5) = predict_stack(fit.stack, X);
  return S;
}

ScenarioReport evaluate_scenario(const ScenarioFit& fit, const FeatureMatrix& test, double threshold) {
  if (fit.models.size() != 5) throw ValidationError("scenario fit must hold five standalone models");
  ScenarioReport r;
  r.n_test = static_cast<std::size_t>(test.n_rows());
  const Eigen::MatrixXd S = scenario_scores(fit, test);
  const Eigen::VectorXd y = test.labels();
  for (std::size_t k = 0; k < kModelRows.size(); ++k) {
    const Eigen::VectorXd s = S.col(static_cast<Eigen::Index>(k));
    const std::string name(kModelRows[k]);
    r.metrics.push_back(compute_metrics(s, y, threshold, name));
    r.curves.push_back({name, roc_curve(s, y), pr_curve(s, y), calibration_curve(s, y)});
  }
  return r;
}

std::vector<ScenarioReport> run_scenarios(const std::vector<CohortInstance>& instances, const ScenarioConfig& config) {
  config.validate();
  const FeatureMatrix all = to_feature_matrix(instances);
  const std::vector<int> present = distinct_years(all.rows);
  if (present.size() < 2) throw ValidationError("leave-one-year-out needs at least two distinct years");
  const std::vector<int> years = config.years.empty() ? present : config.years;

  ScenarioConfig cfg = config;
  std::vector<ScenarioReport> reports;
  for (const int year : years) {
    const auto start = std::chrono::steady_clock::now();
    try {
      const ScenarioSplit split = split_by_year(all.rows, year);
      const FeatureMatrix train = all.select_rows(split.train_rows);
      const FeatureMatrix test = all.select_rows(split.test_rows);

      std::vector<TuningLog> tuning;
      const ScenarioFit fit = fit_scenario(train, cfg, &tuning);
      if (cfg.tune.enabled && cfg.tune.reuse_first) {
        for (const auto& t : tuning) {
          if (t.model == "RF") cfg.lineup.base[0] = t.best;
          if (t.model == "SVM") cfg.lineup.base[1] = t.best;
          if (t.model == "GBT") cfg.lineup.base[2] = t.best;
          if (t.model == "FNN") cfg.lineup.fnn = std::get<NetParams>(t.best);
          if (t.model == "MM") cfg.lineup.meta = t.best;
        }
        cfg.tune.enabled = false;
      }

      const std::uint64_t before = state_hash(fit);
      ScenarioReport r = evaluate_scenario(fit, test, cfg.threshold);
      r.audit.hash_before = before;
      r.audit.hash_after = state_hash(fit);

      std::set<std::string> test_ids;
      for (const auto& m : test.rows) {
        test_ids.insert(m.encounter_id);
        r.audit.test_rows_outside_year += m.year != year;
      }
      std::set<int> train_years;
      for (const auto& m : train.rows) {
        r.audit.shared_encounters += test_ids.count(m.encounter_id);
        r.audit.train_rows_in_test_year += m.year == year;
        train_years.insert(m.year);
      }
      r.held_out_year = year;
      r.train_years.assign(train_years.begin(), train_years.end());
      r.n_train = static_cast<std::size_t>(train.n_rows());
      r.tuning = std::move(tuning);
      if (cfg.keep_fits) r.fit = fit;
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      reports.push_back(std::move(r));
    } catch (const ValidationError& e) {
      throw ValidationError("scenario " + std::to_string(year) + ": " + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error("scenario " + std::to_string(year) + ": " + e.what());
    }
  }
  return reports;
}

std::vector<ModelCurves> aggregate_reports(const std::vector<ScenarioReport>& reports) {
  if (reports.empty()) throw ValidationError("no reports to aggregate");
  std::vector<ModelCurves> out;
  for (std::size_t k = 0; k < reports.front().curves.size(); ++k) {
    std::vector<CurveSeries> roc, pr, cal;
    for (const auto& r : reports) {
      roc.push_back(r.curves.at(k).roc);
      pr.push_back(r.curves.at(k).pr);
      cal.push_back(r.curves.at(k).calibration);
    }
    out.push_back({reports.front().curves[k].model, aggregate_curves(roc), aggregate_curves(pr), aggregate_curves(cal)});
  }
  return out;
}

ModelBundle make_bundle(const ScenarioFit& fit, Provenance provenance) {
  ModelBundle b;
  b.preprocessor = fit.preprocessor;
  b.models = fit.models;
  b.stack = fit.stack;
  b.provenance = std::move(provenance);
  return b;
}

ScenarioFit fit_from_bundle(const ModelBundle& bundle) {
  if (!bundle.stack) throw BundleError("bundle has no stacked model");
  if (bundle.models.size() != 5) throw BundleError("bundle must hold five standalone models");
  return {bundle.preprocessor, bundle.models, *bundle.stack};
}

void write_metrics_grid(std::ostream& out, const std::vector<ScenarioReport>& reports) {
  static constexpr std::array<std::string_view, 5> kCols{"AUC", "Acc", "F1", "Pre", "Rec"};
  out << "model";
  for (const auto& r : reports) {
    for (const auto c : kCols) out << ',' << r.held_out_year << '_' << c;
  }
  for (const auto c : kCols) out << ",mean_" << c;
  for (const auto c : kCols) out << ",std_" << c;
  out << '\n';
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.4f", v);
    out << ',' << buf;
  };
  for (std::size_t k = 0; k < kModelRows.size(); ++k) {
    out << kModelRows[k];
    std::array<std::vector<double>, 5> cols;
    for (const auto& r : reports) {
      const auto& m = r.metrics.at(k);
      const std::array<double, 5> v{m.auroc, m.accuracy, m.f1, m.precision, m.recall};
      for (std::size_t c = 0; c < 5; ++c) {
        put(v[c]);
        cols[c].push_back(v[c]);
      }
    }
    std::array<double, 5> mean{}, sd{};
    for (std::size_t c = 0; c < 5; ++c) {
      for (const double v : cols[c]) mean[c] += v / static_cast<double>(cols[c].size());
      for (const double v : cols[c]) sd[c] += (v - mean[c]) * (v - mean[c]) / static_cast<double>(cols[c].size());
      sd[c] = std::sqrt(sd[c]);
    }
    for (const double v : mean) put(v);
    for (const double v : sd) put(v);
    out << '\n';
  }
}

namespace {

nlohmann::json curve_json(const CurveSeries& c) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : c.points) pts.push_back({p.x, p.y});
  nlohmann::json j = {{"kind", std::string(curve_kind_name(c.kind))}, {"points", pts}};
  if (c.band) {
    j["band"] = {{"mean", c.band->mean},
                 {"std", c.band->std},
                 {"ci_low", c.band->ci_low},
                 {"ci_high", c.band->ci_high},
                 {"n_series", c.band->n_series}};
  }
  return j;
}

}  // namespace

void write_curves_json(std::ostream& out, const std::vector<ModelCurves>& curves) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : curves) {
    j.push_back({{"model", c.model},
                 {"roc", curve_json(c.roc)},
                 {"pr", curve_json(c.pr)},
                 {"calibration", curve_json(c.calibration)}});
  }
  out << j.dump(1) << '\n';
}

}  // namespace transfuse
