// One PASS/FAIL line per acceptance criterion. Run without arguments for
// all of them, or pass criterion numbers to run a subset.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "transfuse/bundle.hpp"
#include "transfuse/cohort.hpp"
#include "transfuse/errors.hpp"
#include "transfuse/explain.hpp"
#include "transfuse/learners.hpp"
#include "transfuse/metrics.hpp"
#include "transfuse/preprocess.hpp"
#include "transfuse/scenarios.hpp"
#include "transfuse/schema.hpp"
#include "transfuse/stacking.hpp"
#include "transfuse/synthetic.hpp"
#include "transfuse/tune.hpp"

#include "oracles.hpp"

using namespace transfuse;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::vector<CohortInstance> cohort(const SyntheticCohortSpec& spec) {
  const RawTables t = generate_synthetic_cohort(spec);
  return build_instances(t, apply_exclusions(t));
}

Outcome auroc_oracle() {
  std::mt19937_64 rng(20240101);
  double worst = 0;
  int ties = 0;
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd s, y;
    oracle::tied_scores(rng, s, y);
    std::set<double> distinct(s.data(), s.data() + s.size());
    ties += distinct.size() < static_cast<std::size_t>(s.size());
    worst = std::max(worst, std::abs(auroc(s, y) - oracle::concordance(s, y)));
  }
  return {worst <= 1e-12 && ties > 100, fmt("200 cases (%d with ties), max |trapezoid - concordance| = %.2e, tol 1e-12", ties, worst)};
}

// Smallest |pre-activation| over all hidden units and rows.
double min_preactivation(const NetModel& net, const Eigen::MatrixXd& X) {
  double m = 1e300;
  Eigen::MatrixXd a = X.transpose();
  for (std::size_t l = 0; l + 1 < net.weights.size(); ++l) {
    const Eigen::MatrixXd z = (net.weights[l] * a).colwise() + net.biases[l];
    m = std::min(m, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return m;
}

Outcome gradient_checks() {
  double lr_worst = 0, fnn_worst = 0;
  int redraws = 0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    std::mt19937_64 rng(t);
    const Eigen::Index n = std::uniform_int_distribution<Eigen::Index>(5, 60)(rng);
    const Eigen::Index d = std::uniform_int_distribution<Eigen::Index>(1, 8)(rng);
    const Eigen::MatrixXd X = oracle::gaussian(n, d, 100 + t);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = static_cast<double>((i + t) % 2);
    const double l2 = std::uniform_real_distribution<double>(0, 0.5)(rng);
    const Eigen::VectorXd theta = oracle::gaussian(d + 1, 1, 200 + t).col(0);
    const auto lg = logistic_objective(theta, X, y, l2);
    lr_worst = std::max(lr_worst, oracle::gradient_error(
                                      [&](const Eigen::VectorXd& p) { return logistic_objective(p, X, y, l2).loss; },
                                      theta, lg.gradient, 1e-3));

    // Random architecture; redraw biases until no unit sits within the
    // difference step of its ReLU kink.
    std::vector<int> hidden(std::uniform_int_distribution<std::size_t>(1, 3)(rng));
    for (auto& h : hidden) h = std::uniform_int_distribution<int>(2, 6)(rng);
    NetModel net = init_network(d, hidden, 300 + t);
    std::normal_distribution<double> z(0, 0.3);
    do {
      for (auto& b : net.biases) b = b.unaryExpr([&](double) { return z(rng); });
      ++redraws;
    } while (min_preactivation(net, X) < 1e-3);
    --redraws;
    Eigen::VectorXd flat(0);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      const auto old = flat.size();
      flat.conservativeResize(old + net.weights[l].size() + net.biases[l].size());
      flat.segment(old, net.weights[l].size()) = Eigen::Map<const Eigen::VectorXd>(net.weights[l].data(), net.weights[l].size());
      flat.segment(old + net.weights[l].size(), net.biases[l].size()) = net.biases[l];
    }
    auto unflatten = [&](const Eigen::VectorXd& v) {
      NetModel m = net;
      Eigen::Index o = 0;
      for (std::size_t l = 0; l < m.weights.size(); ++l) {
        std::memcpy(m.weights[l].data(), v.data() + o, sizeof(double) * m.weights[l].size());
        o += m.weights[l].size();
        m.biases[l] = v.segment(o, m.biases[l].size());
        o += m.biases[l].size();
      }
      return m;
    };
    const auto g = net_loss_gradient(net, X, y);
    Eigen::VectorXd analytic(flat.size());
    Eigen::Index o = 0;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      analytic.segment(o, g.weights[l].size()) = Eigen::Map<const Eigen::VectorXd>(g.weights[l].data(), g.weights[l].size());
      o += g.weights[l].size();
      analytic.segment(o, g.biases[l].size()) = g.biases[l];
      o += g.biases[l].size();
    }
    fnn_worst = std::max(fnn_worst, oracle::gradient_error(
                                        [&](const Eigen::VectorXd& v) { return net_loss_gradient(unflatten(v), X, y).loss; },
                                        flat, analytic, 1e-3));
  }
  return {lr_worst <= 1e-5 && fnn_worst <= 1e-4,
          fmt("20 instances each; max relative error LR %.2e (tol 1e-5), FNN %.2e (tol 1e-4); %d bias redraws",
              lr_worst, fnn_worst, redraws)};
}

Outcome shapley_oracle() {
  double worst = 0, efficiency = 0, symmetry = 0, dummy = 0, linearity = 0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    const oracle::RandomScorer s(t);
    const Eigen::MatrixXd bg = oracle::gaussian(12, 5, 1000 + t);
    const Eigen::VectorXd x = oracle::gaussian(1, 5, 2000 + t).row(0).transpose();
    const auto a = exact_shapley(s.batch(), x, bg);
    const auto ref = oracle::permutation_shapley([&](const Eigen::VectorXd& z) { return s.row(z); }, x, bg);
    worst = std::max(worst, (a.values - ref).cwiseAbs().maxCoeff());
    efficiency = std::max(efficiency, std::abs(a.values.sum() - (a.output - a.base_value)));

    // f symmetric in features 0 and 1 and blind to feature 3.
    const oracle::RandomScorer inner(5000 + t, 4);
    const BatchScorer sym = [&](const Eigen::MatrixXd& X) {
      Eigen::VectorXd out(X.rows());
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Eigen::Vector4d u(X(i, 0) + X(i, 1), X(i, 0) * X(i, 1), X(i, 2), X(i, 4));
        out(i) = inner.row(u);
      }
      return out;
    };
    Eigen::MatrixXd sbg = bg;
    sbg.col(1) = sbg.col(0);
    Eigen::VectorXd sx = x;
    sx(1) = sx(0);
    const auto sa = exact_shapley(sym, sx, sbg);
    symmetry = std::max(symmetry, std::abs(sa.values(0) - sa.values(1)));
    dummy = std::max(dummy, std::abs(sa.values(3)));

    const oracle::RandomScorer other(9000 + t);
    const BatchScorer mix = [&](const Eigen::MatrixXd& X) -> Eigen::VectorXd {
      return 1.5 * s.batch()(X) - 0.5 * other.batch()(X);
    };
    const auto b = exact_shapley(other.batch(), x, bg), c = exact_shapley(mix, x, bg);
    linearity = std::max(linearity, (c.values - (1.5 * a.values - 0.5 * b.values)).cwiseAbs().maxCoeff());
  }
  const bool pass = worst <= 1e-9 && efficiency <= 1e-9 && symmetry <= 1e-9 && dummy == 0.0 && linearity <= 1e-9;
  return {pass, fmt("50 instances, max |exact - permutation oracle| = %.2e (tol 1e-9); efficiency %.1e, symmetry %.1e, "
                    "dummy %.1e, linearity %.1e",
                    worst, efficiency, symmetry, dummy, linearity)};
}

Outcome svm_kkt() {
  double worst_kkt = 0, worst_box = 0, worst_eq = 0;
  bool converged = true;
  for (std::uint64_t t = 0; t < 10; ++t) {
    const Eigen::MatrixXd X = oracle::gaussian(200, 4, 40 + t);
    Eigen::VectorXd y(200);
    for (Eigen::Index i = 0; i < 200; ++i) y(i) = X(i, 0) + 0.5 * X(i, 1) * X(i, 2) + 0.5 * oracle::gaussian(1, 1, 7000 + 200 * t + i)(0) > 0 ? 1 : -1;
    const Kernel k = std::array<Kernel, 3>{Kernel::Rbf, Kernel::Linear, Kernel::Poly}[t % 3];
    const double C = 1.0 + static_cast<double>(t % 4);
    const Eigen::MatrixXd K = kernel_matrix(k, 0.25, 0.0, 3, X, X);
    const auto sol = smo_solve(K, y, C, 1e-3, 10000000);
    converged &= sol.converged;
    for (Eigen::Index i = 0; i < 200; ++i) {
      worst_box = std::max({worst_box, -sol.alpha(i), sol.alpha(i) - C});
    }
    worst_eq = std::max(worst_eq, std::abs(sol.alpha.dot(y)));
    worst_kkt = std::max(worst_kkt, oracle::kkt_violation(K, y, sol.alpha, C));
  }
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  oracle::xor_data(X, y, 25, 0.2, 17);
  SvmParams hp;
  hp.C = 10;
  const Eigen::VectorXd p = predict_proba(fit_svm(X, y, hp), X);
  double correct = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) correct += (p(i) >= 0.5) == (y(i) > 0.5);
  const double acc = correct / static_cast<double>(y.size());
  return {converged && worst_box <= 0 && worst_eq <= 1e-9 && worst_kkt <= 1e-3 && acc == 1.0,
          fmt("10 datasets n=200: box violation %.1e, |sum a_i y_i| %.1e, max KKT gap %.2e (tol 1e-3); XOR rbf train acc %.3f",
              std::max(worst_box, 0.0), worst_eq, worst_kkt, acc)};
}

Outcome gbt_sanity() {
  int increases = 0;
  double worst_rise = 0;
  for (int ds = 0; ds < 3; ++ds) {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    if (ds == 0) {
      oracle::xor_data(X, y, 75, 0.4, 3);
    } else {
      X = oracle::gaussian(300, 5, 60 + ds);
      y.resize(300);
      for (Eigen::Index i = 0; i < 300; ++i) y(i) = ds == 1 ? (X(i, 0) - X(i, 3) > 0.3) : (i % 3 == 0);
    }
    BoostParams hp;
    hp.n_stages = 100;
    const auto m = fit_gbt(X, y, hp);
    const auto& bm = std::get<BoostedModel>(m.params);
    double prev = 1e300;
    for (std::size_t s = 0; s <= bm.stages.size(); ++s) {
      const Eigen::VectorXd margin = (bm.base_score + bm.learning_rate * boosted_margin(bm, X, s).array()).matrix();
      const double loss = oracle::mean_log_loss(margin, y);
      if (loss > prev) {
        ++increases;
        worst_rise = std::max(worst_rise, loss - prev);
      }
      prev = loss;
    }
  }
  const Eigen::MatrixXd X = oracle::gaussian(500, 4, 99);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(500);
  y.head(127).setOnes();
  BoostParams hp;
  hp.gamma = 1e9;
  const auto m = fit_gbt(X, y, hp);
  int splits = 0;
  for (const auto& t : std::get<BoostedModel>(m.params).stages) splits += t.split_count();
  const Eigen::VectorXd p = predict_proba(m, X);
  const bool constant = (p.array() == p(0)).all();
  const double off = std::abs(p(0) - 127.0 / 500.0);
  return {increases == 0 && splits == 0 && constant && off <= 1e-12,
          fmt("3 datasets x 100 stages: %d loss increases (largest %.1e); gamma=1e9: %d splits, constant=%s, "
              "|p - prevalence| = %.1e",
              increases, worst_rise, splits, constant ? "yes" : "no", off)};
}

Outcome mice_rmse() {
  int wins = 0;
  bool observed_identical = true;
  double worst_ratio = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = oracle::mask_mcar(oracle::linear_data(1000, 100 + seed), 0.2, 200 + seed);
    const MiceResult r = mice_impute(m.holey, 10, seed);
    const double mice = oracle::masked_rmse(m, r.imputed), mean = oracle::masked_rmse(m, oracle::mean_impute(m.holey));
    wins += mice <= mean;
    worst_ratio = std::max(worst_ratio, mice / mean);
    for (Eigen::Index k = 0; k < m.holey.size(); ++k) {
      const double v = m.holey.data()[k];
      if (!std::isnan(v)) observed_identical &= std::memcmp(&v, r.imputed.data() + k, sizeof v) == 0;
    }
  }
  return {wins == 10 && observed_identical,
          fmt("MICE <= mean-imputation RMSE on %d/10 seeds (worst ratio %.3f); observed cells bit-identical: %s", wins,
              worst_ratio, observed_identical ? "yes" : "no")};
}

Outcome pca_spectrum() {
  const auto two = fit_pca(oracle::data_with_spectrum({9, 1}, 400, 1), 0.90);
  const auto three = fit_pca(oracle::data_with_spectrum({8, 1, 1}, 400, 2), 0.90);
  double ortho = 0, eig = 0;
  bool all_roots = true;
  const std::vector<std::vector<double>> spectra{{9, 1}, {8, 1, 1}, {5, 3, 1.5, 0.5}, {7, 4, 2, 1, 0.25}};
  for (std::size_t s = 0; s < spectra.size(); ++s) {
    const Eigen::MatrixXd X = oracle::data_with_spectrum(spectra[s], 500, 10 + s);
    const auto p = fit_pca(X, 1.0);
    const Eigen::Index d = X.cols();
    ortho = std::max(ortho, (p.loadings * p.loadings.transpose() - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff());
    const Eigen::MatrixXd C = oracle::sample_covariance(X);
    const auto roots = oracle::char_poly_eigenvalues(C, C.trace() * 1.01);
    if (roots.size() != static_cast<std::size_t>(d)) {
      all_roots = false;
      continue;
    }
    for (Eigen::Index j = 0; j < d; ++j) eig = std::max(eig, std::abs(p.eigenvalues(j) - roots[static_cast<std::size_t>(j)]));
  }
  return {two.k == 1 && three.k == 2 && ortho <= 1e-10 && eig <= 1e-8 && all_roots,
          fmt("{9,1} -> k=%ld, {8,1,1} -> k=%ld; loadings orthonormal to %.1e (tol 1e-10); eigenvalues vs "
              "characteristic polynomial %.1e (tol 1e-8)",
              static_cast<long>(two.k), static_cast<long>(three.k), ortho, eig)};
}

Outcome mtp_oracle() {
  using namespace std::chrono_literals;
  const Timestamp t0 = std::chrono::sys_days{std::chrono::year{2018} / 3 / 1} + 8h;
  std::mt19937_64 rng(2024);
  int agree = 0, positives = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = std::uniform_int_distribution<int>(0, 9)(rng);
    const long span = std::uniform_int_distribution<long>(60, 72 * 60)(rng);
    std::vector<long> minutes;
    std::vector<Timestamp> times;
    for (int i = 0; i < k; ++i) {
      const long m = std::uniform_int_distribution<long>(0, span)(rng);
      minutes.push_back(m);
      times.push_back(t0 + std::chrono::minutes(m));
    }
    const bool expected = oracle::sliding_window_exceeds(minutes);
    positives += expected;
    agree += exceeds_transfusion_rate(times) == expected;
  }
  auto hours = [&](std::initializer_list<double> h) {
    std::vector<Timestamp> out;
    for (const double x : h) out.push_back(t0 + std::chrono::seconds(static_cast<long>(x * 3600)));
    return out;
  };
  auto late = hours({0, 2, 4});
  late.push_back(t0 + 6h + 1s);
  // "More than three" within six hours: four is excluded, three is not.
  const bool boundary = exceeds_transfusion_rate(hours({0, 1, 2, 3})) && !exceeds_transfusion_rate(hours({0, 4, 8, 12})) &&
                        !exceeds_transfusion_rate(hours({0, 2, 5})) && !exceeds_transfusion_rate(hours({1, 1, 1})) &&
                        exceeds_transfusion_rate(hours({0, 2, 4, 6})) && !exceeds_transfusion_rate(late);
  return {agree == 1000 && boundary,
          fmt("%d/1000 patterns agree with the sliding-window oracle (%d exceed); boundary cases %s", agree, positives,
              boundary ? "ok" : "wrong")};
}

Outcome leakage_suite() {
  SyntheticCohortSpec spec;
  spec.n_encounters_per_year = 1000;
  const auto instances = cohort(spec);
  ScenarioConfig cfg;
  cfg.tune.enabled = true;
  cfg.tune.mode = GridMode::Reduced;
  cfg.keep_fits = true;
  const auto reports = run_scenarios(instances, cfg);

  const FeatureMatrix all = to_feature_matrix(instances);
  bool ok = reports.size() == 5;
  std::size_t rows = 0, shared_years = 0, hash_changes = 0;
  std::set<int> held;
  for (const auto& r : reports) {
    held.insert(r.held_out_year);
    rows += r.metrics.size();
    ok &= r.metrics.size() == 6 && r.audit.ok();
    shared_years += std::count(r.train_years.begin(), r.train_years.end(), r.held_out_year);
    // Re-score independently and confirm the fitted state is untouched.
    const std::uint64_t before = state_hash(*r.fit);
    const auto split = split_by_year(all.rows, r.held_out_year);
    scenario_scores(*r.fit, all.select_rows(split.test_rows));
    hash_changes += state_hash(*r.fit) != before || before != r.audit.hash_before;
  }
  ok &= held.size() == 5 && rows == 30 && shared_years == 0 && hash_changes == 0;
  std::size_t trials = 0;
  for (const auto& r : reports) {
    for (const auto& t : r.tuning) trials += t.trials.size();
  }
  return {ok, fmt("%zu scenarios x %zu model rows; train/test year overlap %zu; state-hash changes %zu; %zu tuning trials",
                  reports.size(), reports.empty() ? 0 : reports[0].metrics.size(), shared_years, hash_changes, trials)};
}

Outcome planted_end_to_end() {
  SyntheticCohortSpec spec;  // 10,000 encounters per year, 2016-2020, prevalence 0.254
  const RawTables tables = generate_synthetic_cohort(spec);
  const ExclusionResult excl = apply_exclusions(tables);
  const auto instances = build_instances(tables, excl);
  std::set<std::uint32_t> with_events;
  for (const auto& t : tables.transfusions) with_events.insert(t.encounter);
  std::size_t transfused = 0;
  for (const auto e : with_events) transfused += excl.retained[e];
  const double prevalence = static_cast<double>(transfused) / static_cast<double>(excl.retained_count());
  double positives = 0;
  for (const auto& c : instances) positives += c.label;

  ScenarioConfig cfg;
  cfg.tune.enabled = true;
  cfg.tune.mode = GridMode::Reduced;
  const auto reports = run_scenarios(instances, cfg);
  bool ok = reports.size() == 5 && std::abs(prevalence - spec.transfused_fraction) <= 0.01;
  std::ostringstream per_year;
  for (const auto& r : reports) {
    const double mm = r.metrics[5].auroc;
    const double best_base = std::max({r.metrics[1].auroc, r.metrics[2].auroc, r.metrics[3].auroc});
    ok &= mm >= 0.90 && mm >= best_base - 0.02;
    per_year << fmt(" %d:MM=%.4f/base=%.4f", r.held_out_year, mm, best_base);
  }
  return {ok, fmt("retained encounters transfused %.4f (target %.3f), positive instances %.3f;", prevalence,
                  spec.transfused_fraction, positives / static_cast<double>(instances.size())) +
                  per_year.str() + " (need MM >= 0.90 and >= best base - 0.02)"};
}

Outcome shap_panel() {
  SyntheticCohortSpec spec;
  spec.n_encounters_per_year = 2000;
  spec.features = planted_signal_profiles();
  const auto instances = cohort(spec);
  ScenarioConfig cfg;
  cfg.years = {2020};
  cfg.keep_fits = true;
  const auto reports = run_scenarios(instances, cfg);
  const ScenarioFit& fit = *reports.at(0).fit;

  const FeatureMatrix all = to_feature_matrix(instances);
  const auto split = split_by_year(all.rows, 2020);
  const FeatureMatrix train = all.select_rows(split.train_rows), test = all.select_rows(split.test_rows);
  PanelConfig pc;
  const Panel panel = build_panel(fit.stack, fit.preprocessor, test, select_background(train, pc.n_background, pc.seed), pc);

  double additivity = 0;
  for (Eigen::Index i = 0; i < panel.meta.values.rows(); ++i) {
    additivity = std::max(additivity,
                          std::abs(panel.meta.values.row(i).sum() + panel.meta.base_value - panel.meta.outputs(i)));
  }
  bool top = panel.bases.size() == 3;
  std::string tops;
  for (const auto& b : panel.bases) {
    bool hgb = false, plt = false;
    tops += " " + b.model + ":[";
    for (int r = 0; r < pc.top_k && r < static_cast<int>(b.ranking.size()); ++r) {
      hgb |= b.ranking[r].name == "hemoglobin";
      plt |= b.ranking[r].name == "platelets";
      tops += (r ? "," : "") + b.ranking[r].name;
    }
    tops += "]";
    top &= hgb && plt;
  }
  return {top && additivity <= 1e-9,
          fmt("meta additivity max error %.1e (tol 1e-9); top-%d per base:", additivity, pc.top_k) + tops};
}

Outcome calibration_noise() {
  int within = 0, bins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u;
    Eigen::VectorXd s(10000), y(10000);
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      s(i) = u(rng);
      y(i) = u(rng) < s(i) ? 1 : 0;
    }
    const auto c = calibration_curve(s, y, 10);
    for (int b = 0; b < 10 && b < static_cast<int>(c.points.size()); ++b) {
      double var = 0;
      int n = 0;
      for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (std::min(static_cast<int>(s(i) * 10), 9) == b) {
          var += s(i) * (1 - s(i));
          ++n;
        }
      }
      within += std::abs(c.points[static_cast<std::size_t>(b)].y - c.points[static_cast<std::size_t>(b)].x) <=
                3 * std::sqrt(var) / n;
      ++bins;
    }
  }
  const double frac = static_cast<double>(within) / bins;
  return {bins == 200 && frac >= 0.95, fmt("%d/%d bins within 3 binomial sigma (%.1f%%, need >= 95%%)", within, bins, 100 * frac)};
}

Outcome bundle_roundtrip() {
  SyntheticCohortSpec spec;
  spec.n_encounters_per_year = 300;
  const auto instances = cohort(spec);
  ScenarioConfig cfg;
  cfg.years = {2020};
  cfg.keep_fits = true;
  const auto reports = run_scenarios(instances, cfg);
  const ScenarioFit& fit = *reports.at(0).fit;
  const std::string text = serialize_bundle(make_bundle(fit, {7, "cfg", "2026-01-01T00:00:00Z", "acceptance", 2020}));
  const ScenarioFit back = fit_from_bundle(deserialize_bundle(text));

  SyntheticCohortSpec other = spec;
  other.seed = 99;
  other.n_encounters_per_year = 400;
  auto fresh = to_feature_matrix(cohort(other));
  std::vector<Eigen::Index> rows(1000);
  std::iota(rows.begin(), rows.end(), 0);
  fresh = fresh.select_rows(rows);
  const Eigen::MatrixXd a = scenario_scores(fit, fresh), b = scenario_scores(back, fresh);
  const bool equal = std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;

  int rejected = 0;
  auto rejects = [&](const std::string& bad) {
    try {
      deserialize_bundle(bad);
    } catch (const BundleError&) {
      ++rejected;
    }
  };
  std::string flipped = text;
  flipped[flipped.size() / 2] = flipped[flipped.size() / 2] == '1' ? '2' : '1';
  rejects(flipped);
  rejects(text.substr(0, text.size() - 1));
  std::string future = text;
  future.replace(future.find(' ') + 1, 1, "9");
  rejects(future);
  return {equal && rejected == 3, fmt("1000 rows x 6 models bit-identical after round trip: %s; corrupted bundles rejected %d/3",
                                      equal ? "yes" : "no", rejected)};
}

Outcome grid_bookkeeping() {
  const auto rf = grid(full_space(Family::RF, ForestParams{}));
  const auto svm = grid(full_space(Family::SVM, SvmParams{}));
  const auto gbt = grid(full_space(Family::GBT, BoostParams{}));
  std::set<std::string> a, b;
  for (const auto& s : rf) a.insert(describe_spec(s));
  for (const auto& s : grid(full_space(Family::RF, ForestParams{}))) b.insert(describe_spec(s));

  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  oracle::xor_data(X, y, 40, 0.5, 1);
  const auto space = reduced_space(Family::GBT, BoostParams{});
  const auto r1 = grid_search(X, y, space, 3, 5), r2 = grid_search(X, y, space, 3, 5);
  const bool same_best = r1.best_index == r2.best_index && describe_spec(r1.best) == describe_spec(r2.best);
  return {rf.size() == 192 && svm.size() == 40 && gbt.size() == 72 && a == b && a.size() == 192 && same_best,
          fmt("grid sizes RF %zu, SVM %zu, GBT %zu (need 192/40/72); reruns pick the same best spec: %s", rf.size(),
              svm.size(), gbt.size(), same_best ? "yes" : "no")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "auroc-oracle", 10, auroc_oracle},
      {2, "gradient-checks", 30, gradient_checks},
      {3, "shapley-oracle", 60, shapley_oracle},
      {4, "svm-kkt", 60, svm_kkt},
      {5, "gbt-sanity", 60, gbt_sanity},
      {6, "mice-rmse", 60, mice_rmse},
      {7, "pca-spectrum", 10, pca_spectrum},
      {8, "mtp-oracle", 10, mtp_oracle},
      {9, "leakage-suite", 300, leakage_suite},
      {10, "planted-end-to-end", 900, planted_end_to_end},
      {11, "shap-panel", 300, shap_panel},
      {12, "calibration", 30, calibration_noise},
      {13, "bundle-roundtrip", 10, bundle_roundtrip},
      {14, "grid-bookkeeping", 10, grid_bookkeeping},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s [%2d] %-19s %s; %.1fs (budget %.0fs)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.budget_seconds);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
