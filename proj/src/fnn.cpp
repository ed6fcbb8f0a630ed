#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "transfuse/errors.hpp"
#include "transfuse/learners.hpp"
#include "transfuse/metrics.hpp"
#include "transfuse/numeric.hpp"
#include "transfuse/sampling.hpp"

namespace transfuse {

namespace {

// Columns of `inputs` are samples.
Eigen::RowVectorXd forward(const NetModel& net, const Eigen::MatrixXd& inputs, std::vector<Eigen::MatrixXd>* acts,
                           std::vector<Eigen::MatrixXd>* pre) {
  Eigen::MatrixXd a = inputs;
  const std::size_t L = net.weights.size();
  for (std::size_t l = 0; l + 1 < L; ++l) {
    Eigen::MatrixXd z = (net.weights[l] * a).colwise() + net.biases[l];
    if (acts) acts->push_back(a);
    a = z.cwiseMax(0.0);
    if (pre) pre->push_back(std::move(z));
  }
  if (acts) acts->push_back(a);
  return ((net.weights.back() * a).colwise() + net.biases.back()).row(0);
}

NetGradient gradient_on(const NetModel& net, const Eigen::MatrixXd& inputs, const Eigen::RowVectorXd& y) {
  std::vector<Eigen::MatrixXd> acts, pre;
  const Eigen::RowVectorXd margin = forward(net, inputs, &acts, &pre);
  const double n = static_cast<double>(inputs.cols());
  NetGradient g;
  g.loss = log_loss_from_margin(margin.transpose(), y.transpose());
  const std::size_t L = net.weights.size();
  g.weights.resize(L);
  g.biases.resize(L);
  Eigen::MatrixXd delta = ((sigmoid(margin.transpose()) - y.transpose()) / n).transpose();
  for (std::size_t l = L; l-- > 0;) {
    g.weights[l] = delta * acts[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      delta = (net.weights[l].transpose() * delta).cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

}  // namespace

NetModel init_network(Eigen::Index input_dim, const std::vector<int>& hidden, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NetModel net;
  Eigen::Index fan_in = input_dim;
  std::vector<int> sizes = hidden;
  sizes.push_back(1);
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    const bool output = l + 1 == sizes.size();
    std::normal_distribution<double> draw(0.0, std::sqrt((output ? 1.0 : 2.0) / static_cast<double>(fan_in)));
    Eigen::MatrixXd W(sizes[l], fan_in);
    for (Eigen::Index k = 0; k < W.size(); ++k) W.data()[k] = draw(rng);
    net.weights.push_back(std::move(W));
    net.biases.push_back(Eigen::VectorXd::Zero(sizes[l]));
    fan_in = sizes[l];
  }
  return net;
}

Eigen::VectorXd net_margin(const NetModel& net, const Eigen::MatrixXd& X) {
  return forward(net, X.transpose(), nullptr, nullptr).transpose();
}

NetGradient net_loss_gradient(const NetModel& net, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return gradient_on(net, X.transpose(), y.transpose());
}

FittedModel fit_fnn(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const NetParams& hp) {
  validate_spec(hp);
  if (X.rows() != y.size() || X.rows() == 0) throw ValidationError("FNN training data is empty or misaligned");
  const double pos = y.sum();
  if (pos == 0.0 || pos == static_cast<double>(y.size())) throw ValidationError("training labels hold a single class");

  // Hold out 10% for early stopping when both classes can be represented.
  std::vector<Eigen::Index> val_rows;
  if (X.rows() >= 20) {
    const auto n_val = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(X.rows())));
    val_rows = stratified_subsample(y, n_val, hp.seed ^ 0x5bd1e995ULL);
    const double vpos = y(val_rows).sum();
    if (vpos == 0.0 || vpos == static_cast<double>(val_rows.size())) val_rows.clear();
  }
  std::vector<char> is_val(static_cast<std::size_t>(X.rows()), 0);
  for (const auto r : val_rows) is_val[static_cast<std::size_t>(r)] = 1;
  std::vector<Eigen::Index> train_rows;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    if (!is_val[static_cast<std::size_t>(i)]) train_rows.push_back(i);
  }
  const Eigen::MatrixXd Xt = X(train_rows, Eigen::all).transpose();
  const Eigen::RowVectorXd yt = y(train_rows).transpose();
  const Eigen::MatrixXd Xv = X(val_rows, Eigen::all);
  const Eigen::VectorXd yv = y(val_rows);

  NetModel net = init_network(X.cols(), std::vector<int>(static_cast<std::size_t>(hp.n_hidden_layers),
                                                          hp.neurons_per_layer),
                              hp.seed);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    mw.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    vw.push_back(mw.back());
    mb.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    vb.push_back(mb.back());
  }

  std::mt19937_64 rng(hp.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(Xt.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  NetModel best = net;
  double best_auc = -1.0;
  int stale = 0;
  long step = 0;
  const auto batch = static_cast<std::size_t>(hp.batch_size);
  for (int epoch = 0; epoch < hp.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(stop));
      const NetGradient g = gradient_on(net, Xt(Eigen::all, idx), yt(idx));
      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (std::size_t l = 0; l < net.weights.size(); ++l) {
        mw[l] = kBeta1 * mw[l] + (1.0 - kBeta1) * g.weights[l];
        vw[l] = kBeta2 * vw[l] + (1.0 - kBeta2) * g.weights[l].cwiseAbs2();
        net.weights[l].array() -= hp.learning_rate * (mw[l].array() / c1) / ((vw[l].array() / c2).sqrt() + kEps);
        mb[l] = kBeta1 * mb[l] + (1.0 - kBeta1) * g.biases[l];
        vb[l] = kBeta2 * vb[l] + (1.0 - kBeta2) * g.biases[l].cwiseAbs2();
        net.biases[l].array() -= hp.learning_rate * (mb[l].array() / c1) / ((vb[l].array() / c2).sqrt() + kEps);
      }
    }
    if (val_rows.empty()) continue;
    const double auc = auroc(net_margin(net, Xv), yv);
    if (auc > best_auc) {
      best_auc = auc;
      best = net;
      stale = 0;
    } else if (++stale >= hp.patience) {
      break;
    }
  }
  if (!val_rows.empty()) net = std::move(best);
  return {hp, std::move(net), X.cols()};
}

}  // namespace transfuse
