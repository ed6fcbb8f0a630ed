#include "transfuse/explain.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

#include <json.hpp>

#include "transfuse/errors.hpp"
#include "transfuse/learners.hpp"
#include "transfuse/sampling.hpp"

namespace transfuse {

std::string_view method_name(ShapleyMethod m) { return m == ShapleyMethod::Exact ? "exact" : "sampled"; }

std::string_view background_source_name(BackgroundSource s) { return s == BackgroundSource::Train ? "train" : "test"; }

BackgroundSource parse_background_source(std::string_view s) {
  if (s == "train") return BackgroundSource::Train;
  if (s == "test") return BackgroundSource::Test;
  throw ValidationError("unknown background source '" + std::string(s) + "' (expected train or test)");
}

void PanelConfig::validate() const {
  if (n_instances == 0) throw ValidationError("panel needs at least one instance");
  if (n_background == 0) throw ValidationError("panel needs a non-empty background");
  if (top_k < 1) throw ValidationError("top_k must be at least 1");
  if (n_samples < 1) throw ValidationError("n_samples must be positive");
}

namespace {

void check_inputs(const Eigen::VectorXd& instance, const Eigen::MatrixXd& background) {
  if (background.rows() == 0) throw ValidationError("Shapley background is empty");
  if (background.cols() != instance.size()) {
    throw ValidationError("background has " + std::to_string(background.cols()) + " columns, instance has " +
                          std::to_string(instance.size()));
  }
}

double scalar_output(const BatchScorer& f, const Eigen::VectorXd& instance) {
  const Eigen::VectorXd out = f(instance.transpose());
  if (out.size() != 1) throw ValidationError("scorer returned the wrong number of outputs");
  return out(0);
}

}  // namespace

Attribution exact_shapley(const BatchScorer& f, const Eigen::VectorXd& instance, const Eigen::MatrixXd& background) {
  check_inputs(instance, background);
  const int d = static_cast<int>(instance.size());
  if (d > kMaxExactFeatures) {
    throw ValidationError("exact Shapley supports at most " + std::to_string(kMaxExactFeatures) + " features, got " +
                          std::to_string(d) + "; use the sampled method");
  }
  const Eigen::Index nb = background.rows();
  const std::size_t n_masks = std::size_t{1} << d;

  // v(S) for every coalition, evaluated in chunks of masks.
  std::vector<double> v(n_masks);
  const std::size_t per_chunk = std::max<std::size_t>(1, 65536 / static_cast<std::size_t>(nb));
  for (std::size_t start = 0; start < n_masks; start += per_chunk) {
    const std::size_t stop = std::min(n_masks, start + per_chunk);
    Eigen::MatrixXd batch(static_cast<Eigen::Index>((stop - start) * nb), d);
    for (std::size_t mask = start; mask < stop; ++mask) {
      auto block = batch.middleRows(static_cast<Eigen::Index>((mask - start) * nb), nb);
      block = background;
      for (int j = 0; j < d; ++j) {
        if (mask >> j & 1U) block.col(j).setConstant(instance(j));
      }
    }
    const Eigen::VectorXd out = f(batch);
    for (std::size_t mask = start; mask < stop; ++mask) {
      v[mask] = out.segment(static_cast<Eigen::Index>((mask - start) * nb), nb).mean();
    }
  }

  // weight(s) = s! (d - s - 1)! / d!
  std::vector<double> fact(d + 1, 1.0);
  for (int i = 1; i <= d; ++i) fact[i] = fact[i - 1] * i;
  std::vector<double> weight(d, 0.0);
  for (int s = 0; s < d; ++s) weight[s] = fact[s] * fact[d - s - 1] / fact[d];

  Attribution a;
  a.values = Eigen::VectorXd::Zero(d);
  a.std_error = Eigen::VectorXd::Zero(d);
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    const int s = std::popcount(mask);
    for (int j = 0; j < d; ++j) {
      if (mask >> j & 1U) continue;
      a.values(j) += weight[s] * (v[mask | (std::size_t{1} << j)] - v[mask]);
    }
  }
  a.base_value = v[0];
  a.output = v[n_masks - 1];
  return a;
}

Attribution sampled_shapley(const BatchScorer& f, const Eigen::VectorXd& instance, const Eigen::MatrixXd& background,
                            int n_samples, std::uint64_t seed) {
  check_inputs(instance, background);
  const Eigen::Index d = instance.size();
  if (n_samples < 2 * d) {
    throw ValidationError("sampled Shapley needs at least 2d = " + std::to_string(2 * d) + " samples, got " +
                          std::to_string(n_samples));
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, background.rows() - 1);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));

  // Each sample contributes d + 1 rows: the background row, then the row after
  // each successive replacement.
  Eigen::MatrixXd batch(n_samples * (d + 1), d);
  std::vector<std::vector<Eigen::Index>> orders;
  orders.reserve(static_cast<std::size_t>(n_samples));
  for (int s = 0; s < n_samples; ++s) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::RowVectorXd row = background.row(pick(rng));
    const Eigen::Index base = s * (d + 1);
    batch.row(base) = row;
    for (Eigen::Index k = 0; k < d; ++k) {
      row(order[k]) = instance(order[k]);
      batch.row(base + k + 1) = row;
    }
    orders.push_back(order);
  }
  const Eigen::VectorXd out = f(batch);

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(d);
  for (int s = 0; s < n_samples; ++s) {
    const Eigen::Index base = s * (d + 1);
    for (Eigen::Index k = 0; k < d; ++k) {
      const double delta = out(base + k + 1) - out(base + k);
      sum(orders[s][k]) += delta;
      sum_sq(orders[s][k]) += delta * delta;
    }
  }
  Attribution a;
  const double n = n_samples;
  a.values = sum / n;
  const Eigen::ArrayXd var = ((sum_sq.array() - n * a.values.array().square()) / (n - 1.0)).max(0.0);
  a.std_error = (var / n).sqrt().matrix();
  a.base_value = f(background).mean();
  a.output = scalar_output(f, instance);
  return a;
}

std::vector<FeatureImportance> rank_features(const AttributionSet& set) {
  std::vector<FeatureImportance> out;
  for (Eigen::Index j = 0; j < set.values.cols(); ++j) {
    out.push_back({set.features.at(static_cast<std::size_t>(j)), set.values.col(j).cwiseAbs().mean()});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.mean_abs > b.mean_abs; });
  return out;
}

FeatureMatrix select_background(const FeatureMatrix& pool, std::size_t n, std::uint64_t seed) {
  if (pool.n_rows() == 0) throw ValidationError("background pool is empty");
  return pool.select_rows(stratified_subsample(pool.labels(), n, seed));
}

namespace {

AttributionSet explain_rows(const BatchScorer& f, const Eigen::MatrixXd& rows, const Eigen::MatrixXd& background,
                            std::vector<std::string> features, ShapleyMethod method, int n_samples,
                            std::uint64_t seed, std::uint64_t stream) {
  AttributionSet set;
  set.method = method;
  set.features = std::move(features);
  set.values.resize(rows.rows(), rows.cols());
  set.std_error.resize(rows.rows(), rows.cols());
  set.outputs.resize(rows.rows());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Attribution a;
    if (method == ShapleyMethod::Exact) {
      a = exact_shapley(f, rows.row(i).transpose(), background);
    } else {
      std::seed_seq seq{seed, stream, static_cast<std::uint64_t>(i)};
      std::array<std::uint32_t, 2> words{};
      seq.generate(words.begin(), words.end());
      const std::uint64_t s = (std::uint64_t{words[0]} << 32) | words[1];
      a = sampled_shapley(f, rows.row(i).transpose(), background, n_samples, s);
    }
    set.values.row(i) = a.values.transpose();
    set.std_error.row(i) = a.std_error.transpose();
    set.outputs(i) = a.output;
    set.base_value = a.base_value;
  }
  return set;
}

}  // namespace

Panel build_panel(const StackedModel& stack, const FittedPreprocessor& preprocessor, const FeatureMatrix& test,
                  const FeatureMatrix& background, const PanelConfig& config) {
  config.validate();
  if (background.n_rows() == 0) throw ValidationError("Shapley background is empty");
  if (test.n_rows() == 0) throw ValidationError("no test instances to explain");

  const FeatureMatrix chosen = test.select_rows(stratified_subsample(test.labels(), config.n_instances, config.seed));
  const auto test_cols = kept_column_indices(preprocessor, chosen.columns);
  const auto bg_cols = kept_column_indices(preprocessor, background.columns);
  Eigen::MatrixXd raw(chosen.n_rows(), static_cast<Eigen::Index>(test_cols.size()));
  Eigen::MatrixXd raw_bg(background.n_rows(), static_cast<Eigen::Index>(bg_cols.size()));
  for (std::size_t j = 0; j < test_cols.size(); ++j) {
    raw.col(static_cast<Eigen::Index>(j)) = chosen.values.col(test_cols[j]);
    raw_bg.col(static_cast<Eigen::Index>(j)) = background.values.col(bg_cols[j]);
  }

  Panel panel;
  panel.instances = chosen.rows;
  panel.top_k = config.top_k;

  const Eigen::MatrixXd base_probs = base_probabilities(stack, transform_kept(preprocessor, raw));
  const Eigen::MatrixXd base_bg = base_probabilities(stack, transform_kept(preprocessor, raw_bg));
  std::vector<std::string> base_names;
  for (const Family f : kBaseFamilies) base_names.emplace_back(family_name(f));
  const BatchScorer meta = [&](const Eigen::MatrixXd& P) { return predict_proba(stack.meta, P); };
  panel.meta = explain_rows(meta, base_probs, base_bg, base_names, ShapleyMethod::Exact, 0, config.seed, 0);
  panel.meta_ranking = rank_features(panel.meta);

  for (std::size_t b = 0; b < stack.base.size(); ++b) {
    const FittedModel& model = stack.base[b];
    const BatchScorer composite = [&](const Eigen::MatrixXd& R) {
      return predict_proba(model, transform_kept(preprocessor, R));
    };
    const int n_samples = std::max<int>(config.n_samples, 2 * static_cast<int>(raw.cols()));
    BaseExplanation e;
    e.model = base_names[b];
    e.attributions = explain_rows(composite, raw, raw_bg, preprocessor.kept_features, ShapleyMethod::Sampled,
                                  n_samples, config.seed, b + 1);
    e.ranking = rank_features(e.attributions);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(config.top_k), e.ranking.size());
    for (std::size_t r = 0; r < k; ++r) {
      const auto it = std::find(preprocessor.kept_features.begin(), preprocessor.kept_features.end(), e.ranking[r].name);
      const auto j = static_cast<Eigen::Index>(it - preprocessor.kept_features.begin());
      ScatterSeries s{e.model, e.ranking[r].name, {}};
      for (Eigen::Index i = 0; i < raw.rows(); ++i) s.points.push_back({raw(i, j), e.attributions.values(i, j)});
      e.scatter.push_back(std::move(s));
    }
    panel.bases.push_back(std::move(e));
  }
  return panel;
}

namespace {

nlohmann::json ranking_json(const std::vector<FeatureImportance>& r) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& f : r) j.push_back({{"feature", f.name}, {"mean_abs", f.mean_abs}});
  return j;
}

nlohmann::json set_json(const AttributionSet& s) {
  nlohmann::json values = nlohmann::json::array();
  for (Eigen::Index i = 0; i < s.values.rows(); ++i) {
    values.push_back(std::vector<double>(s.values.row(i).begin(), s.values.row(i).end()));
  }
  return {{"method", std::string(method_name(s.method))},
          {"features", s.features},
          {"base_value", s.base_value},
          {"outputs", std::vector<double>(s.outputs.begin(), s.outputs.end())},
          {"values", values}};
}

}  // namespace

void write_panel_json(std::ostream& out, const Panel& panel) {
  nlohmann::json bases = nlohmann::json::array();
  for (const auto& b : panel.bases) {
    std::vector<std::string> top;
    for (const auto& s : b.scatter) top.push_back(s.feature);
    bases.push_back({{"model", b.model},
                     {"top_features", top},
                     {"ranking", ranking_json(b.ranking)},
                     {"attributions", set_json(b.attributions)}});
  }
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& r : panel.instances) ids.push_back({{"encounter_id", r.encounter_id}, {"event_index", r.event_index}});
  const nlohmann::json j = {{"top_k", panel.top_k},
                            {"instances", ids},
                            {"meta", {{"ranking", ranking_json(panel.meta_ranking)}, {"attributions", set_json(panel.meta)}}},
                            {"bases", bases}};
  out << j.dump(1) << '\n';
}

void write_panel_scatter(std::ostream& out, const Panel& panel) {
  out << "model,feature,encounter_id,event_index,value,attribution\n";
  char buf[64];
  for (const auto& b : panel.bases) {
    for (const auto& s : b.scatter) {
      for (std::size_t i = 0; i < s.points.size(); ++i) {
        out << s.model << ',' << s.feature << ',' << panel.instances[i].encounter_id << ','
            << panel.instances[i].event_index << ',';
        if (!std::isnan(s.points[i].x)) {
          std::snprintf(buf, sizeof buf, "%.17g", s.points[i].x);
          out << buf;
        }
        std::snprintf(buf, sizeof buf, "%.17g", s.points[i].y);
        out << ',' << buf << '\n';
      }
    }
  }
}

}  // namespace transfuse
