#include "transfuse/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "transfuse/errors.hpp"
#include "transfuse/numeric.hpp"
#include "tree_builder.hpp"

namespace transfuse {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_training_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw ValidationError("X and y differ in row count");
  if (X.rows() == 0 || X.cols() == 0) throw ValidationError("empty training matrix");
  if (!X.allFinite()) throw ValidationError("training matrix contains non-finite values");
  double pos = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) != 0.0 && y(i) != 1.0) throw ValidationError("labels must be 0 or 1");
    pos += y(i);
  }
  if (pos == 0.0 || pos == static_cast<double>(y.size())) {
    throw ValidationError("training labels hold a single class");
  }
}

double tree_mean(const std::vector<Tree>& trees, const double* row, Eigen::Index stride) {
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(row, stride);
  return s / static_cast<double>(trees.size());
}

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::LR:
      return "LR";
    case Family::RF:
      return "RF";
    case Family::GBT:
      return "GBT";
    case Family::SVM:
      return "SVM";
    case Family::FNN:
      return "FNN";
    case Family::GNB:
      return "GNB";
    case Family::AdaBoost:
      return "AdaBoost";
    case Family::Voting:
      return "Voting";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::LR, Family::RF, Family::GBT, Family::SVM, Family::FNN, Family::GNB, Family::AdaBoost,
                   Family::Voting}) {
    if (family_name(f) == name) return f;
  }
  if (name == "XGB") return Family::GBT;
  if (name == "NB" || name == "BN") return Family::GNB;
  throw ValidationError("unknown model family '" + std::string(name) + "'");
}

std::string_view kernel_name(Kernel k) {
  switch (k) {
    case Kernel::Linear:
      return "linear";
    case Kernel::Poly:
      return "poly";
    case Kernel::Sigmoid:
      return "sigmoid";
    case Kernel::Rbf:
      return "rbf";
  }
  return "unknown";
}

Kernel parse_kernel(std::string_view name) {
  for (Kernel k : {Kernel::Linear, Kernel::Poly, Kernel::Sigmoid, Kernel::Rbf}) {
    if (kernel_name(k) == name) return k;
  }
  throw ValidationError("unknown kernel '" + std::string(name) + "'");
}

Family family_of(const ModelSpec& spec) {
  return std::visit(Overloaded{[](const LogisticParams&) { return Family::LR; },
                               [](const ForestParams&) { return Family::RF; },
                               [](const BoostParams&) { return Family::GBT; },
                               [](const SvmParams&) { return Family::SVM; },
                               [](const NetParams&) { return Family::FNN; },
                               [](const NaiveBayesParams&) { return Family::GNB; },
                               [](const AdaBoostParams&) { return Family::AdaBoost; },
                               [](const VotingParams&) { return Family::Voting; }},
                    spec);
}

void validate_spec(const ModelSpec& spec) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(what);
  };
  std::visit(Overloaded{
                 [&](const LogisticParams& p) {
                   require(p.learning_rate > 0.0, "LR learning_rate must be positive");
                   require(p.l2 >= 0.0, "LR l2 must be non-negative");
                   require(p.max_epochs >= 1, "LR max_epochs must be at least 1");
                   require(p.tol > 0.0, "LR tol must be positive");
                 },
                 [&](const ForestParams& p) {
                   require(p.n_trees >= 1, "RF n_trees must be at least 1");
                   require(p.min_samples_split >= 2, "RF min_samples_split must be at least 2");
                   require(p.max_depth >= 1, "RF max_depth must be at least 1");
                 },
                 [&](const BoostParams& p) {
                   require(p.learning_rate > 0.0, "GBT learning_rate must be positive");
                   require(p.n_stages >= 1, "GBT n_stages must be at least 1");
                   require(p.max_depth >= 1, "GBT max_depth must be at least 1");
                   require(p.gamma >= 0.0, "GBT gamma must be non-negative");
                 },
                 [&](const SvmParams& p) {
                   require(p.C > 0.0, "SVM C must be positive");
                   require(p.tol > 0.0, "SVM tol must be positive");
                   require(p.max_passes >= 1, "SVM max_passes must be at least 1");
                 },
                 [&](const NetParams& p) {
                   require(p.n_hidden_layers >= 1, "FNN needs at least one hidden layer");
                   require(p.neurons_per_layer >= 1, "FNN neurons_per_layer must be positive");
                   require(p.learning_rate > 0.0, "FNN learning_rate must be positive");
                   require(p.max_epochs >= 1, "FNN max_epochs must be at least 1");
                   require(p.patience >= 1, "FNN patience must be at least 1");
                   require(p.batch_size >= 1, "FNN batch_size must be at least 1");
                 },
                 [&](const NaiveBayesParams& p) {
                   require(p.var_smoothing >= 0.0, "GNB var_smoothing must be non-negative");
                 },
                 [&](const AdaBoostParams& p) { require(p.n_estimators >= 1, "AdaBoost needs at least one stump"); },
                 [](const VotingParams&) {}},
             spec);
}

// ---- trees -------------------------------------------------------------------

double Tree::predict(const double* row, Eigen::Index stride) const {
  int k = 0;
  while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(k)];
    k = row[n.feature * stride] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(k)].value;
}

int Tree::depth() const {
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    deepest = std::max(deepest, level[k]);
    if (nodes[k].feature >= 0) {
      level[static_cast<std::size_t>(nodes[k].left)] = level[k] + 1;
      level[static_cast<std::size_t>(nodes[k].right)] = level[k] + 1;
    }
  }
  return deepest;
}

int Tree::split_count() const {
  return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature >= 0; }));
}

bool FittedModel::converged() const {
  if (const auto* svm = std::get_if<SvmModel>(&params)) return svm->converged;
  if (const auto* lr = std::get_if<LogisticModel>(&params)) {
    return lr->epochs < std::get<LogisticParams>(spec).max_epochs;
  }
  return true;
}

// ---- logistic regression -----------------------------------------------------------

LossGradient logistic_objective(const Eigen::VectorXd& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                double l2) {
  const Eigen::Index d = X.cols();
  const auto w = params.head(d);
  const double b = params(d);
  const Eigen::VectorXd margin = (X * w).array() + b;
  const double n = static_cast<double>(X.rows());
  LossGradient out;
  out.loss = log_loss_from_margin(margin, y) + 0.5 * l2 * w.squaredNorm();
  const Eigen::VectorXd residual = sigmoid(margin) - y;
  out.gradient.resize(d + 1);
  out.gradient.head(d) = X.transpose() * residual / n + l2 * w;
  out.gradient(d) = residual.sum() / n;
  return out;
}

FittedModel fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LogisticParams& hp) {
  validate_spec(hp);
  check_training_data(X, y);
  const Eigen::Index d = X.cols();
  const double n = static_cast<double>(X.rows());
  // Step no larger than 1/L, L = Lipschitz constant of the gradient.
  Eigen::MatrixXd Xa(X.rows(), d + 1);
  Xa << X, Eigen::VectorXd::Ones(X.rows());
  const Eigen::MatrixXd gram = Xa.transpose() * Xa / n;
  const double lipschitz =
      0.25 * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff() +
      hp.l2;
  const double step = std::min(hp.learning_rate, 1.0 / lipschitz);

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  int epoch = 0;
  for (; epoch < hp.max_epochs; ++epoch) {
    const LossGradient lg = logistic_objective(theta, X, y, hp.l2);
    if (lg.gradient.lpNorm<Eigen::Infinity>() <= hp.tol) break;
    theta -= step * lg.gradient;
  }
  LogisticModel m;
  m.weights = theta.head(d);
  m.intercept = theta(d);
  m.epochs = epoch;
  return {hp, m, d};
}

// ---- random forest ----------------------------------------------------------------

FittedModel fit_random_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestParams& hp) {
  validate_spec(hp);
  check_training_data(X, y);
  const detail::BinnedMatrix B = detail::bin_features(X);
  detail::GiniOptions opt;
  opt.max_depth = hp.max_depth;
  opt.min_samples_split = hp.min_samples_split;
  opt.max_features = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(X.cols()))));

  ForestModel forest;
  const auto n = static_cast<std::size_t>(X.rows());
  for (int t = 0; t < hp.n_trees; ++t) {
    std::seed_seq seq{hp.seed, static_cast<std::uint64_t>(t)};
    std::mt19937_64 rng(seq);
    std::vector<Eigen::Index> rows(n);
    if (hp.bootstrap) {
      std::uniform_int_distribution<Eigen::Index> draw(0, X.rows() - 1);
      for (auto& r : rows) r = draw(rng);
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    }
    forest.trees.push_back(detail::grow_gini_tree(B, X, y, std::move(rows), opt, rng));
  }
  return {hp, std::move(forest), X.cols()};
}

// ---- gradient boosting ------------------------------------------------------------

Eigen::VectorXd boosted_margin(const BoostedModel& model, const Eigen::MatrixXd& X, std::size_t n_stages) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(X.rows());
  const std::size_t stop = std::min(n_stages, model.stages.size());
  for (std::size_t k = 0; k < stop; ++k) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) s(i) += model.stages[k].predict(X.data() + i, X.rows());
  }
  return s;
}

FittedModel fit_gbt(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const BoostParams& hp) {
  validate_spec(hp);
  check_training_data(X, y);
  constexpr double kLambda = 1.0;
  const detail::BinnedMatrix B = detail::bin_features(X);
  const double prevalence = y.mean();

  BoostedModel m;
  m.base_score = std::log(prevalence / (1.0 - prevalence));
  m.learning_rate = hp.learning_rate;
  Eigen::VectorXd margin = Eigen::VectorXd::Constant(X.rows(), m.base_score);
  Eigen::VectorXd grad(X.rows()), hess(X.rows());
  for (int stage = 0; stage < hp.n_stages; ++stage) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double p = sigmoid(margin(i));
      grad(i) = p - y(i);
      hess(i) = p * (1.0 - p);
    }
    Tree tree = detail::grow_newton_tree(B, X, grad, hess, hp.max_depth, kLambda, hp.gamma);
    for (Eigen::Index i = 0; i < X.rows(); ++i) margin(i) += hp.learning_rate * tree.predict(X.data() + i, X.rows());
    m.stages.push_back(std::move(tree));
  }
  return {hp, std::move(m), X.cols()};
}

// ---- Gaussian naive Bayes -------------------------------------------------------------

FittedModel fit_gaussian_nb(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const NaiveBayesParams& hp) {
  validate_spec(hp);
  check_training_data(X, y);
  const Eigen::Index d = X.cols();
  NaiveBayesModel m;
  m.means = Eigen::MatrixXd::Zero(2, d);
  m.variances = Eigen::MatrixXd::Zero(2, d);

  const Eigen::RowVectorXd mean_all = X.colwise().mean();
  const Eigen::RowVectorXd var_all = (X.rowwise() - mean_all).array().square().colwise().mean();
  m.epsilon = hp.var_smoothing * var_all.maxCoeff();

  for (int c = 0; c < 2; ++c) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if ((y(i) > 0.5) == (c == 1)) rows.push_back(i);
    }
    const Eigen::MatrixXd Xc = X(rows, Eigen::all);
    m.means.row(c) = Xc.colwise().mean();
    m.variances.row(c) = (Xc.rowwise() - m.means.row(c)).array().square().colwise().mean();
    m.variances.row(c).array() += m.epsilon;
    m.log_prior(c) = std::log(static_cast<double>(rows.size()) / static_cast<double>(y.size()));
  }
  return {hp, std::move(m), d};
}

namespace {

Eigen::VectorXd nb_proba(const NaiveBayesModel& m, const Eigen::MatrixXd& X) {
  Eigen::VectorXd out(X.rows());
  constexpr double kTwoPi = 6.283185307179586;
  const Eigen::MatrixXd var = m.variances.cwiseMax(std::numeric_limits<double>::min());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double ll[2];
    for (int c = 0; c < 2; ++c) {
      const Eigen::ArrayXXd diff = X.row(i).array() - m.means.row(c).array();
      const Eigen::ArrayXXd v = var.row(c).array();
      ll[c] = m.log_prior(c) - 0.5 * ((kTwoPi * v).log() + diff.square() / v).sum();
    }
    out(i) = sigmoid(ll[1] - ll[0]);
  }
  return out;
}

}  // namespace

// ---- AdaBoost over stumps ------------------------------------------------------------

namespace {

int stump_vote(const Stump& s, const double* row, Eigen::Index stride) {
  const bool above = row[s.feature * stride] > s.threshold;
  return (above ? 1 : -1) * s.polarity;
}

}  // namespace

FittedModel fit_adaboost(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const AdaBoostParams& hp) {
  validate_spec(hp);
  check_training_data(X, y);
  const Eigen::Index n = X.rows();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd ys = 2.0 * y.array() - 1.0;

  // Sorted row order per feature is reused every round.
  std::vector<std::vector<Eigen::Index>> order(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index f = 0; f < X.cols(); ++f) {
    auto& o = order[static_cast<std::size_t>(f)];
    o.resize(static_cast<std::size_t>(n));
    std::iota(o.begin(), o.end(), Eigen::Index{0});
    std::stable_sort(o.begin(), o.end(), [&](Eigen::Index a, Eigen::Index b) { return X(a, f) < X(b, f); });
  }

  AdaBoostModel m;
  for (int round = 0; round < hp.n_estimators; ++round) {
    Stump best;
    double best_err = 2.0;
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
      const auto& o = order[static_cast<std::size_t>(f)];
      // Threshold below every value: all rows vote +1 under polarity +1.
      double err = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) err += ys(i) < 0 ? w(i) : 0.0;
      auto consider = [&](double e, double threshold) {
        if (e < best_err) {
          best_err = e;
          best = {static_cast<int>(f), threshold, 1, 0.0};
        }
        if (1.0 - e < best_err) {
          best_err = 1.0 - e;
          best = {static_cast<int>(f), threshold, -1, 0.0};
        }
      };
      consider(err, X(o.front(), f) - 1.0);
      for (std::size_t k = 0; k < o.size(); ++k) {
        const Eigen::Index r = o[k];
        // Row r moves to the "x <= t" side, voting -1 under polarity +1.
        err += ys(r) > 0 ? w(r) : -w(r);
        if (k + 1 < o.size() && X(o[k + 1], f) == X(r, f)) continue;
        const double t = k + 1 < o.size() ? 0.5 * (X(r, f) + X(o[k + 1], f)) : X(r, f);
        consider(err, t);
      }
    }
    const double err = std::clamp(best_err, 1e-10, 1.0);
    if (err >= 0.5) {
      if (m.stumps.empty()) {
        best.alpha = 0.0;
        m.stumps.push_back(best);
      }
      break;
    }
    best.alpha = 0.5 * std::log((1.0 - err) / err);
    m.stumps.push_back(best);
    for (Eigen::Index i = 0; i < n; ++i) w(i) *= std::exp(-best.alpha * ys(i) * stump_vote(best, X.data() + i, n));
    w /= w.sum();
    if (best_err <= 1e-10) break;
  }
  return {hp, std::move(m), X.cols()};
}

FittedModel fit_voting(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  check_training_data(X, y);
  return {VotingParams{}, VotingModel{}, X.cols()};
}

// ---- dispatch --------------------------------------------------------------------------

FittedModel fit_model(const ModelSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return std::visit(Overloaded{[&](const LogisticParams& p) { return fit_logistic(X, y, p); },
                               [&](const ForestParams& p) { return fit_random_forest(X, y, p); },
                               [&](const BoostParams& p) { return fit_gbt(X, y, p); },
                               [&](const SvmParams& p) { return fit_svm(X, y, p); },
                               [&](const NetParams& p) { return fit_fnn(X, y, p); },
                               [&](const NaiveBayesParams& p) { return fit_gaussian_nb(X, y, p); },
                               [&](const AdaBoostParams& p) { return fit_adaboost(X, y, p); },
                               [&](const VotingParams&) { return fit_voting(X, y); }},
                    spec);
}

Eigen::VectorXd predict_proba(const FittedModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.input_dim) {
    throw ValidationError("input has " + std::to_string(X.cols()) + " columns, model expects " +
                          std::to_string(model.input_dim));
  }
  const Eigen::Index n = X.rows();
  Eigen::VectorXd p = std::visit(
      Overloaded{
          [&](const LogisticModel& m) -> Eigen::VectorXd {
            return sigmoid(((X * m.weights).array() + m.intercept).matrix());
          },
          [&](const ForestModel& m) -> Eigen::VectorXd {
            Eigen::VectorXd out(n);
            for (Eigen::Index i = 0; i < n; ++i) out(i) = tree_mean(m.trees, X.data() + i, n);
            return out;
          },
          [&](const BoostedModel& m) -> Eigen::VectorXd {
            const Eigen::VectorXd s = boosted_margin(m, X, m.stages.size());
            return sigmoid((m.base_score + m.learning_rate * s.array()).matrix());
          },
          [&](const SvmModel& m) -> Eigen::VectorXd {
            const Eigen::VectorXd f = svm_decision(m, X);
            return sigmoid((-(m.platt_a * f.array() + m.platt_b)).matrix());
          },
          [&](const NetModel& m) -> Eigen::VectorXd { return sigmoid(net_margin(m, X)); },
          [&](const NaiveBayesModel& m) -> Eigen::VectorXd { return nb_proba(m, X); },
          [&](const AdaBoostModel& m) -> Eigen::VectorXd {
            Eigen::VectorXd out(n);
            for (Eigen::Index i = 0; i < n; ++i) {
              double F = 0.0;
              for (const auto& s : m.stumps) F += s.alpha * stump_vote(s, X.data() + i, n);
              out(i) = sigmoid(2.0 * F);
            }
            return out;
          },
          [&](const VotingModel&) -> Eigen::VectorXd { return X.rowwise().mean(); }},
      model.params);
  return p.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace transfuse
