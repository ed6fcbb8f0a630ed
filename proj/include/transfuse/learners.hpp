#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace transfuse {

enum class Family { LR, RF, GBT, SVM, FNN, GNB, AdaBoost, Voting };

std::string_view family_name(Family f);
Family parse_family(std::string_view name);

// ---- hyperparameters ---------------------------------------------------------

struct LogisticParams {
  double learning_rate = 0.5;
  double l2 = 1e-4;
  int max_epochs = 2000;
  double tol = 1e-6;
};

struct ForestParams {
  int n_trees = 100;
  int min_samples_split = 2;
  int max_depth = 10;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct BoostParams {
  double learning_rate = 0.1;
  int n_stages = 100;
  int max_depth = 5;
  double gamma = 0.0;
  std::uint64_t seed = 0;
};

enum class Kernel { Linear, Poly, Sigmoid, Rbf };
std::string_view kernel_name(Kernel k);
Kernel parse_kernel(std::string_view name);

struct SvmParams {
  Kernel kernel = Kernel::Rbf;
  double C = 1.0;
  double tol = 1e-3;
  int max_passes = 1000;            // iteration budget = max_passes * n
  std::size_t max_train_rows = 0;   // 0 = use every row; else stratified subsample
  std::uint64_t seed = 0;
};

struct NetParams {
  int n_hidden_layers = 3;
  int neurons_per_layer = 32;
  double learning_rate = 1e-3;
  int max_epochs = 100;
  int patience = 10;
  int batch_size = 64;
  std::uint64_t seed = 0;
};

struct NaiveBayesParams {
  double var_smoothing = 1e-9;
};

struct AdaBoostParams {
  int n_estimators = 50;
};

struct VotingParams {};

using ModelSpec = std::variant<LogisticParams, ForestParams, BoostParams, SvmParams, NetParams, NaiveBayesParams,
                               AdaBoostParams, VotingParams>;

Family family_of(const ModelSpec& spec);

// Throws ValidationError for hyperparameters outside their legal domain.
void validate_spec(const ModelSpec& spec);

// ---- fitted parameters -------------------------------------------------------

// Internal node when feature >= 0: rows with x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(const double* row, Eigen::Index stride) const;
  int depth() const;
  int split_count() const;
};

struct LogisticModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  int epochs = 0;
};

struct ForestModel {
  std::vector<Tree> trees;
};

struct BoostedModel {
  double base_score = 0.0;  // log-odds of the training positive rate
  double learning_rate = 0.1;
  std::vector<Tree> stages;
};

struct SvmModel {
  Kernel kernel = Kernel::Rbf;
  double gamma = 1.0;
  double coef0 = 0.0;
  int degree = 3;
  Eigen::MatrixXd support_vectors;
  Eigen::VectorXd dual_coef;  // alpha_i * y_i
  double bias = 0.0;
  double platt_a = -1.0;  // P(y=1|f) = 1 / (1 + exp(platt_a * f + platt_b))
  double platt_b = 0.0;
  bool converged = true;
};

struct NetModel {
  std::vector<Eigen::MatrixXd> weights;  // layer l: out x in
  std::vector<Eigen::VectorXd> biases;
};

struct NaiveBayesModel {
  Eigen::Vector2d log_prior = Eigen::Vector2d::Zero();
  Eigen::MatrixXd means;      // 2 x d
  Eigen::MatrixXd variances;  // 2 x d, smoothing included
  double epsilon = 0.0;
};

struct Stump {
  int feature = 0;
  double threshold = 0.0;
  int polarity = 1;  // +1: x > threshold votes positive
  double alpha = 0.0;
};

struct AdaBoostModel {
  std::vector<Stump> stumps;
};

struct VotingModel {};

using ModelParams = std::variant<LogisticModel, ForestModel, BoostedModel, SvmModel, NetModel, NaiveBayesModel,
                                 AdaBoostModel, VotingModel>;

struct FittedModel {
  ModelSpec spec;
  ModelParams params;
  Eigen::Index input_dim = 0;

  Family family() const { return family_of(spec); }
  // False when an iterative solver stopped on its budget.
  bool converged() const;
};

// ---- fitting -------------------------------------------------------------------

FittedModel fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LogisticParams& hp);
FittedModel fit_random_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestParams& hp);
FittedModel fit_gbt(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const BoostParams& hp);
FittedModel fit_svm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SvmParams& hp);
FittedModel fit_fnn(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const NetParams& hp);
FittedModel fit_gaussian_nb(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const NaiveBayesParams& hp);
FittedModel fit_adaboost(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const AdaBoostParams& hp);
FittedModel fit_voting(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

FittedModel fit_model(const ModelSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// One probability per row, each in [0, 1]. Throws on dimension mismatch.
Eigen::VectorXd predict_proba(const FittedModel& model, const Eigen::MatrixXd& X);

// ---- internals exposed for verification ------------------------------------------

struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

// L2-regularized mean cross-entropy over params = [weights; intercept].
// The intercept is not penalized.
LossGradient logistic_objective(const Eigen::VectorXd& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                double l2);

struct NetGradient {
  double loss = 0.0;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Mean cross-entropy of the network and its parameter gradients.
NetGradient net_loss_gradient(const NetModel& net, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
Eigen::VectorXd net_margin(const NetModel& net, const Eigen::MatrixXd& X);
NetModel init_network(Eigen::Index input_dim, const std::vector<int>& hidden, std::uint64_t seed);

// Sum of stage outputs (before the learning rate) for the first `n_stages`.
Eigen::VectorXd boosted_margin(const BoostedModel& model, const Eigen::MatrixXd& X, std::size_t n_stages);

// Kernel matrix K(A_i, B_j) under the model's kernel settings.
Eigen::MatrixXd kernel_matrix(Kernel kernel, double gamma, double coef0, int degree, const Eigen::MatrixXd& A,
                              const Eigen::MatrixXd& B);

struct SmoSolution {
  Eigen::VectorXd alpha;
  double bias = 0.0;  // f(x) = sum_i alpha_i y_i K(x_i, x) + bias
  bool converged = true;
  long iterations = 0;
};

// Soft-margin dual via SMO with second-order working-set selection.
// `y` holds +1/-1. Stops when the maximal KKT violation is at most `tol`.
SmoSolution smo_solve(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double C, double tol, long max_iterations);

Eigen::VectorXd svm_decision(const SvmModel& model, const Eigen::MatrixXd& X);

// Platt sigmoid fit (Newton with backtracking); returns {a, b}.
std::pair<double, double> fit_platt(const Eigen::VectorXd& decision, const Eigen::VectorXd& y01);

}  // namespace transfuse
