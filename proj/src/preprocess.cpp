#include "transfuse/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "transfuse/errors.hpp"

namespace transfuse {

Eigen::VectorXd FeatureMatrix::labels() const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Eigen::Index>(i)) = rows[i].label;
  return y;
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<Eigen::Index>& idx) const {
  FeatureMatrix out;
  out.values = values(idx, Eigen::all);
  out.columns = columns;
  out.rows.reserve(idx.size());
  for (const auto i : idx) out.rows.push_back(rows[static_cast<std::size_t>(i)]);
  return out;
}

FeatureMatrix FeatureMatrix::select_columns(const std::vector<Eigen::Index>& idx) const {
  FeatureMatrix out;
  out.values = values(Eigen::all, idx);
  out.rows = rows;
  for (const auto c : idx) out.columns.push_back(columns[static_cast<std::size_t>(c)]);
  return out;
}

void FeatureMatrix::validate() const {
  if (static_cast<Eigen::Index>(columns.size()) != values.cols()) {
    throw ValidationError("column names do not match matrix width");
  }
  if (static_cast<Eigen::Index>(rows.size()) != values.rows()) {
    throw ValidationError("row metadata does not match matrix height");
  }
  std::set<std::string> seen;
  for (const auto& c : columns) {
    if (!seen.insert(c).second) throw ValidationError("duplicate column '" + c + "'");
  }
}

FeatureMatrix to_feature_matrix(const std::vector<CohortInstance>& instances) {
  FeatureMatrix m;
  m.values.resize(static_cast<Eigen::Index>(instances.size()), static_cast<Eigen::Index>(kFeatureCount));
  for (const auto& f : kFeatures) m.columns.emplace_back(f.name);
  m.rows.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = inst.features[f];
    }
    m.rows.push_back({inst.encounter_id, inst.event_index, inst.year, inst.label});
  }
  return m;
}

FeatureMatrix drop_sparse_features(const FeatureMatrix& m, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ValidationError("missingness threshold must lie in (0, 1]");
  m.validate();
  std::vector<Eigen::Index> keep;
  const double n = static_cast<double>(m.n_rows());
  for (Eigen::Index c = 0; c < m.n_cols(); ++c) {
    const double missing = static_cast<double>(m.values.col(c).array().isNaN().count());
    if (n > 0 && missing / n > threshold) continue;
    keep.push_back(c);
  }
  if (keep.empty()) throw ValidationError("every column exceeds the missingness threshold");
  return m.select_columns(keep);
}

double pairwise_pearson(const Eigen::MatrixXd& values, Eigen::Index a, Eigen::Index b) {
  double n = 0.0, sa = 0.0, sb = 0.0;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    const double x = values(i, a), y = values(i, b);
    if (std::isnan(x) || std::isnan(y)) continue;
    n += 1.0;
    sa += x;
    sb += y;
  }
  if (n < 2.0) return std::nan("");
  const double ma = sa / n, mb = sb / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    const double x = values(i, a), y = values(i, b);
    if (std::isnan(x) || std::isnan(y)) continue;
    sab += (x - ma) * (y - mb);
    saa += (x - ma) * (x - ma);
    sbb += (y - mb) * (y - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nan("");
  return sab / std::sqrt(saa * sbb);
}

PearsonSelection pearson_selection(const FeatureMatrix& m, double r_max) {
  if (!(r_max > 0.0 && r_max <= 1.0)) throw ValidationError("r_max must lie in (0, 1]");
  m.validate();
  PearsonSelection sel;
  std::set<Eigen::Index> undefined;
  for (Eigen::Index c = 0; c < m.n_cols(); ++c) {
    bool drop = false;
    for (const Eigen::Index k : sel.kept) {
      const double r = pairwise_pearson(m.values, k, c);
      if (std::isnan(r)) {
        undefined.insert(c);
        continue;
      }
      if (std::abs(r) > r_max) {
        drop = true;
        break;
      }
    }
    if (!drop) sel.kept.push_back(c);
  }
  for (const auto c : undefined) sel.undefined.push_back(m.columns[static_cast<std::size_t>(c)]);
  return sel;
}

FeatureMatrix select_features_pearson(const FeatureMatrix& m, double r_max) {
  return m.select_columns(pearson_selection(m, r_max).kept);
}

// ---- MICE ------------------------------------------------------------------

namespace {

Eigen::VectorXd solve_normal_equations(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-12) return ldlt.solve(b);
  const Eigen::MatrixXd ridged = a + kMiceRidge * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  return Eigen::LDLT<Eigen::MatrixXd>(ridged).solve(b);
}

// Standardizes observed cells; missing cells become 0 (the column mean).
Eigen::MatrixXd standardize(const MiceState& s, const Eigen::MatrixXd& values) {
  Eigen::MatrixXd z(values.rows(), values.cols() + 1);
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
      const double v = values(r, c);
      z(r, c) = std::isnan(v) ? 0.0 : (v - s.means(c)) / s.scales(c);
    }
  }
  z.col(values.cols()).setOnes();
  return z;
}

Eigen::MatrixXd restore(const MiceState& s, const Eigen::MatrixXd& values, const Eigen::MatrixXd& z) {
  Eigen::MatrixXd out = values;
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
      if (std::isnan(out(r, c))) out(r, c) = s.means(c) + s.scales(c) * z(r, c);
    }
  }
  return out;
}

std::vector<Eigen::Index> missing_rows(const Eigen::MatrixXd& values, Eigen::Index c) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    if (std::isnan(values(r, c))) rows.push_back(r);
  }
  return rows;
}

}  // namespace

MiceResult mice_impute(const Eigen::MatrixXd& values, int cycles, std::uint64_t seed) {
  if (cycles < 1) throw ValidationError("MICE needs at least one cycle");
  const Eigen::Index n = values.rows(), d = values.cols();
  MiceResult result;
  MiceState& s = result.state;
  s.cycles = cycles;
  s.means.resize(d);
  s.scales.resize(d);
  for (Eigen::Index c = 0; c < d; ++c) {
    double sum = 0.0, count = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (!std::isnan(values(r, c))) {
        sum += values(r, c);
        count += 1.0;
      }
    }
    if (count == 0.0) throw ValidationError("MICE: column " + std::to_string(c) + " has no observed values");
    const double mean = sum / count;
    double ss = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (!std::isnan(values(r, c))) ss += (values(r, c) - mean) * (values(r, c) - mean);
    }
    const double sd = count > 1.0 ? std::sqrt(ss / (count - 1.0)) : 0.0;
    s.means(c) = mean;
    s.scales(c) = sd > 0.0 ? sd : 1.0;
  }

  Eigen::MatrixXd z = standardize(s, values);
  std::vector<std::vector<Eigen::Index>> missing(static_cast<std::size_t>(d));
  std::vector<Eigen::Index> incomplete;
  for (Eigen::Index c = 0; c < d; ++c) {
    missing[static_cast<std::size_t>(c)] = missing_rows(values, c);
    if (!missing[static_cast<std::size_t>(c)].empty()) incomplete.push_back(c);
  }

  // Gram matrix of [z, 1]; the rows of column c that are missing are removed
  // by a downdate instead of rebuilding the design for every regression.
  Eigen::MatrixXd gram = z.transpose() * z;
  std::vector<ColumnRegressor> regressors(incomplete.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise;
  for (int cycle = 0; cycle < cycles; ++cycle) {
    for (std::size_t k = 0; k < incomplete.size(); ++k) {
      const Eigen::Index c = incomplete[k];
      const auto& miss = missing[static_cast<std::size_t>(c)];
      std::vector<Eigen::Index> others;
      for (Eigen::Index j = 0; j <= d; ++j) {
        if (j != c) others.push_back(j);
      }
      const Eigen::MatrixXd zm = z(miss, Eigen::all);
      const Eigen::MatrixXd observed_gram = gram - zm.transpose() * zm;
      const Eigen::VectorXd beta =
          solve_normal_equations(observed_gram(others, others), observed_gram(others, Eigen::seqN(c, 1)));
      // Draws from the predictive distribution; plugging in bare predictions
      // lets each column's imputations echo back into its own regression.
      const Eigen::VectorXd xty = observed_gram(others, Eigen::seqN(c, 1));
      const double rss = observed_gram(c, c) - 2.0 * beta.dot(xty) + beta.dot(observed_gram(others, others) * beta);
      const double n_obs = static_cast<double>(n - static_cast<Eigen::Index>(miss.size()));
      const double dof = std::max(1.0, n_obs - static_cast<double>(others.size()));
      const double sigma = std::sqrt(std::max(0.0, rss) / dof);
      const Eigen::VectorXd pred = zm(Eigen::all, others) * beta;
      for (std::size_t i = 0; i < miss.size(); ++i) z(miss[i], c) = pred(static_cast<Eigen::Index>(i)) + sigma * noise(rng);
      const Eigen::VectorXd g = z.transpose() * z.col(c);
      gram.col(c) = g;
      gram.row(c) = g.transpose();

      ColumnRegressor& reg = regressors[k];
      reg.column = c;
      reg.coefficients = Eigen::VectorXd::Zero(d);
      for (std::size_t j = 0; j + 1 < others.size(); ++j) reg.coefficients(others[j]) = beta(static_cast<Eigen::Index>(j));
      reg.intercept = beta(beta.size() - 1);
    }
  }
  s.regressors = std::move(regressors);
  result.imputed = mice_transform(s, values);
  return result;
}

Eigen::MatrixXd mice_transform(const MiceState& s, const Eigen::MatrixXd& values) {
  if (values.cols() != s.means.size()) throw ValidationError("MICE transform: column count mismatch");
  Eigen::MatrixXd z = standardize(s, values);
  const Eigen::Index d = values.cols();
  for (const auto& reg : s.regressors) {
    const auto miss = missing_rows(values, reg.column);
    if (miss.empty()) continue;
    const Eigen::VectorXd pred = z(miss, Eigen::seqN(0, d)) * reg.coefficients;
    for (std::size_t i = 0; i < miss.size(); ++i) {
      z(miss[i], reg.column) = pred(static_cast<Eigen::Index>(i)) + reg.intercept;
    }
  }
  return restore(s, values, z);
}

// ---- scaling and projection --------------------------------------------------

MinMaxState fit_minmax(const Eigen::MatrixXd& values) {
  if (values.rows() == 0) throw ValidationError("min-max fit on empty matrix");
  if (values.array().isNaN().any()) throw ValidationError("min-max fit requires complete data");
  return {values.colwise().minCoeff().transpose(), values.colwise().maxCoeff().transpose()};
}

PcaState fit_pca(const Eigen::MatrixXd& values, double variance_target) {
  if (!(variance_target > 0.0 && variance_target <= 1.0)) {
    throw ValidationError("PCA variance target must lie in (0, 1]");
  }
  if (values.rows() < 2) throw ValidationError("PCA needs at least two rows");
  if (values.array().isNaN().any()) throw ValidationError("PCA requires complete data");
  PcaState s;
  s.mean = values.colwise().mean().transpose();
  const Eigen::MatrixXd centered = values.rowwise() - s.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(values.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("PCA eigendecomposition failed");

  const Eigen::Index d = values.cols();
  s.eigenvalues = solver.eigenvalues().reverse().cwiseMax(0.0);
  Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  for (Eigen::Index j = 0; j < d; ++j) {
    Eigen::Index arg = 0;
    vectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, j) < 0.0) vectors.col(j) *= -1.0;
  }
  const double total = s.eigenvalues.sum();
  s.explained = total > 0.0 ? Eigen::VectorXd(s.eigenvalues / total) : Eigen::VectorXd::Zero(d);
  s.k = d;
  double cumulative = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    cumulative += s.explained(j);
    if (cumulative >= variance_target - kVarianceTolerance) {
      s.k = j + 1;
      break;
    }
  }
  if (total <= 0.0) s.k = 1;
  s.loadings = vectors.leftCols(s.k).transpose();
  return s;
}

// ---- pipeline --------------------------------------------------------------

void PipelineOptions::validate() const {
  if (!(missing_threshold > 0.0 && missing_threshold <= 1.0)) {
    throw ValidationError("missingness threshold must lie in (0, 1]");
  }
  if (!(r_max > 0.0 && r_max <= 1.0)) throw ValidationError("r_max must lie in (0, 1]");
  if (mice_cycles < 1) throw ValidationError("mice_cycles must be >= 1");
  if (!(variance_target > 0.0 && variance_target <= 1.0)) {
    throw ValidationError("PCA variance target must lie in (0, 1]");
  }
}

std::vector<std::string> FittedPreprocessor::output_columns() const {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < pca.k; ++j) names.push_back("pc" + std::to_string(j + 1));
  return names;
}

Eigen::MatrixXd transform_kept(const FittedPreprocessor& p, const Eigen::MatrixXd& kept_values) {
  if (kept_values.cols() != static_cast<Eigen::Index>(p.kept_features.size())) {
    throw ValidationError("transform: expected " + std::to_string(p.kept_features.size()) + " columns");
  }
  const Eigen::MatrixXd imputed = mice_transform(p.mice, kept_values);
  return transform_pca(p.pca, transform_minmax(p.minmax, imputed));
}

std::vector<Eigen::Index> kept_column_indices(const FittedPreprocessor& p, const std::vector<std::string>& columns) {
  std::vector<Eigen::Index> idx;
  std::vector<std::string> absent;
  for (const auto& name : p.kept_features) {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) {
      absent.push_back(name);
    } else {
      idx.push_back(static_cast<Eigen::Index>(it - columns.begin()));
    }
  }
  if (!absent.empty()) {
    std::string msg = "schema mismatch; missing columns:";
    for (const auto& a : absent) msg += " " + a;
    throw SchemaError(msg);
  }
  return idx;
}

FeatureMatrix apply_pipeline(const FittedPreprocessor& p, const FeatureMatrix& m) {
  m.validate();
  const auto idx = kept_column_indices(p, m.columns);
  FeatureMatrix out;
  out.values = transform_kept(p, m.values(Eigen::all, idx));
  out.columns = p.output_columns();
  out.rows = m.rows;
  return out;
}

PipelineFit fit_pipeline(const FeatureMatrix& train, const PipelineOptions& options) {
  options.validate();
  train.validate();
  const Eigen::VectorXd y = train.labels();
  if ((y.array() == 1.0).count() == 0 || (y.array() == 0.0).count() == 0) {
    throw ValidationError("training split must contain both classes");
  }
  const FeatureMatrix dense = drop_sparse_features(train, options.missing_threshold);
  const PearsonSelection sel = pearson_selection(dense, options.r_max);
  const FeatureMatrix selected = dense.select_columns(sel.kept);

  PipelineFit fit;
  FittedPreprocessor& p = fit.preprocessor;
  p.options = options;
  p.kept_features = selected.columns;
  p.undefined_correlation = sel.undefined;
  p.mice = mice_impute(selected.values, options.mice_cycles, options.mice_seed).state;
  const Eigen::MatrixXd imputed = mice_transform(p.mice, selected.values);
  p.minmax = fit_minmax(imputed);
  const Eigen::MatrixXd scaled = transform_minmax(p.minmax, imputed);
  p.pca = fit_pca(scaled, options.variance_target);

  fit.transformed.values = transform_pca(p.pca, scaled);
  fit.transformed.columns = p.output_columns();
  fit.transformed.rows = train.rows;
  return fit;
}

}  // namespace transfuse
