#include <algorithm>
#include <cmath>
#include <limits>

#include "transfuse/errors.hpp"
#include "transfuse/learners.hpp"
#include "transfuse/sampling.hpp"

namespace transfuse {

Eigen::MatrixXd kernel_matrix(Kernel kernel, double gamma, double coef0, int degree, const Eigen::MatrixXd& A,
                              const Eigen::MatrixXd& B) {
  if (A.cols() != B.cols()) throw ValidationError("kernel inputs differ in dimension");
  Eigen::MatrixXd K = A * B.transpose();
  switch (kernel) {
    case Kernel::Linear:
      break;
    case Kernel::Poly:
      K = (gamma * K.array() + coef0).pow(degree).matrix();
      break;
    case Kernel::Sigmoid:
      K = (gamma * K.array() + coef0).tanh().matrix();
      break;
    case Kernel::Rbf: {
      const Eigen::VectorXd a2 = A.rowwise().squaredNorm();
      const Eigen::RowVectorXd b2 = B.rowwise().squaredNorm().transpose();
      K = ((-2.0 * K).colwise() + a2).rowwise() + b2;
      K = (-gamma * K.array().max(0.0)).exp().matrix();
      break;
    }
  }
  return K;
}

SmoSolution smo_solve(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double C, double tol,
                      long max_iterations) {
  constexpr double kTau = 1e-12;
  const Eigen::Index n = K.rows();
  if (K.cols() != n || y.size() != n) throw ValidationError("kernel matrix and labels disagree in size");
  const Eigen::MatrixXd Q = (y * y.transpose()).cwiseProduct(K);
  const Eigen::VectorXd QD = Q.diagonal();

  SmoSolution sol;
  sol.alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd& alpha = sol.alpha;
  Eigen::VectorXd G = Eigen::VectorXd::Constant(n, -1.0);
  auto upper = [&](Eigen::Index t) { return alpha(t) >= C; };
  auto lower = [&](Eigen::Index t) { return alpha(t) <= 0.0; };

  sol.converged = false;
  for (sol.iterations = 0; sol.iterations < max_iterations; ++sol.iterations) {
    // Working set: maximal violating i, then j by second-order gain.
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1, j = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (y(t) > 0) {
        if (!upper(t) && -G(t) >= gmax) {
          gmax = -G(t);
          i = t;
        }
      } else if (!lower(t) && G(t) >= gmax) {
        gmax = G(t);
        i = t;
      }
    }
    double obj_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n && i >= 0; ++t) {
      double grad_diff = 0.0, quad = 0.0;
      if (y(t) > 0) {
        if (lower(t)) continue;
        gmax2 = std::max(gmax2, G(t));
        grad_diff = gmax + G(t);
        quad = QD(i) + QD(t) - 2.0 * y(i) * Q(i, t);
      } else {
        if (upper(t)) continue;
        gmax2 = std::max(gmax2, -G(t));
        grad_diff = gmax - G(t);
        quad = QD(i) + QD(t) + 2.0 * y(i) * Q(i, t);
      }
      if (grad_diff > 0.0) {
        const double obj = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : kTau);
        if (obj <= obj_min) {
          obj_min = obj;
          j = t;
        }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < tol) {
      sol.converged = true;
      break;
    }

    const double ai = alpha(i), aj = alpha(j);
    if (y(i) != y(j)) {
      double quad = QD(i) + QD(j) + 2.0 * Q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-G(i) - G(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0.0) {
        if (alpha(j) < 0.0) {
          alpha(j) = 0.0;
          alpha(i) = diff;
        }
      } else if (alpha(i) < 0.0) {
        alpha(i) = 0.0;
        alpha(j) = -diff;
      }
      if (diff > 0.0) {
        if (alpha(i) > C) {
          alpha(i) = C;
          alpha(j) = C - diff;
        }
      } else if (alpha(j) > C) {
        alpha(j) = C;
        alpha(i) = C + diff;
      }
    } else {
      double quad = QD(i) + QD(j) - 2.0 * Q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (G(i) - G(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > C) {
        if (alpha(i) > C) {
          alpha(i) = C;
          alpha(j) = sum - C;
        }
      } else if (alpha(j) < 0.0) {
        alpha(j) = 0.0;
        alpha(i) = sum;
      }
      if (sum > C) {
        if (alpha(j) > C) {
          alpha(j) = C;
          alpha(i) = sum - C;
        }
      } else if (alpha(i) < 0.0) {
        alpha(i) = 0.0;
        alpha(j) = sum;
      }
    }
    G += Q.col(i) * (alpha(i) - ai) + Q.col(j) * (alpha(j) - aj);
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y(t) * G(t);
    if (upper(t)) {
      if (y(t) < 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else if (lower(t)) {
      if (y(t) > 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
  sol.bias = -rho;
  return sol;
}

Eigen::VectorXd svm_decision(const SvmModel& model, const Eigen::MatrixXd& X) {
  if (model.support_vectors.rows() == 0) return Eigen::VectorXd::Constant(X.rows(), model.bias);
  return kernel_matrix(model.kernel, model.gamma, model.coef0, model.degree, X, model.support_vectors) *
             model.dual_coef +
         Eigen::VectorXd::Constant(X.rows(), model.bias);
}

std::pair<double, double> fit_platt(const Eigen::VectorXd& decision, const Eigen::VectorXd& y01) {
  const Eigen::Index n = decision.size();
  double prior1 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) prior1 += y01(i) > 0.5 ? 1.0 : 0.0;
  const double prior0 = static_cast<double>(n) - prior1;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) t(i) = y01(i) > 0.5 ? hi : lo;

  auto objective = [&](double A, double B) {
    double f = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = decision(i) * A + B;
      f += z >= 0.0 ? t(i) * z + std::log1p(std::exp(-z)) : (t(i) - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };

  double A = 0.0;
  double B = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = objective(A, B);
  constexpr double kSigma = 1e-12;
  for (int iter = 0; iter < 100; ++iter) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = decision(i) * A + B;
      double p, q;
      if (z >= 0.0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += decision(i) * decision(i) * d2;
      h22 += d2;
      h21 += decision(i) * d2;
      const double d1 = t(i) - p;
      g1 += decision(i) * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det;
    const double dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    while (step >= 1e-10) {
      const double nA = A + step * dA, nB = B + step * dB;
      const double nf = objective(nA, nB);
      if (nf < fval + 1e-4 * step * gd) {
        A = nA;
        B = nB;
        fval = nf;
        break;
      }
      step *= 0.5;
    }
    if (step < 1e-10) break;
  }
  return {A, B};
}

FittedModel fit_svm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SvmParams& hp) {
  validate_spec(hp);
  if (X.rows() != y.size() || X.rows() == 0) throw ValidationError("SVM training data is empty or misaligned");
  double pos = y.sum();
  if (pos == 0.0 || pos == static_cast<double>(y.size())) throw ValidationError("training labels hold a single class");

  Eigen::MatrixXd Xs = X;
  Eigen::VectorXd ys = y;
  if (hp.max_train_rows > 0 && static_cast<std::size_t>(X.rows()) > hp.max_train_rows) {
    const auto rows = stratified_subsample(y, hp.max_train_rows, hp.seed);
    Xs = X(rows, Eigen::all);
    ys = y(rows);
  }

  SvmModel m;
  m.kernel = hp.kernel;
  m.gamma = 1.0 / static_cast<double>(X.cols());
  m.coef0 = 0.0;
  m.degree = 3;
  const Eigen::MatrixXd K = kernel_matrix(m.kernel, m.gamma, m.coef0, m.degree, Xs, Xs);
  const Eigen::VectorXd ypm = 2.0 * ys.array() - 1.0;
  const SmoSolution sol = smo_solve(K, ypm, hp.C, hp.tol, static_cast<long>(hp.max_passes) * Xs.rows());

  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < Xs.rows(); ++i) {
    if (sol.alpha(i) > 0.0) sv.push_back(i);
  }
  m.support_vectors = Xs(sv, Eigen::all);
  m.dual_coef = sol.alpha(sv).cwiseProduct(ypm(sv));
  m.bias = sol.bias;
  m.converged = sol.converged;

  const Eigen::VectorXd decision = K(Eigen::all, sv) * m.dual_coef + Eigen::VectorXd::Constant(Xs.rows(), m.bias);
  std::tie(m.platt_a, m.platt_b) = fit_platt(decision, ys);
  return {hp, std::move(m), X.cols()};
}

}  // namespace transfuse
