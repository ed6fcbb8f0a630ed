#pragma once

#include <cmath>
#include <concepts>

#include <Eigen/Dense>

namespace transfuse {

template <std::floating_point Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

// log(1 + exp(x)) without overflow.
template <std::floating_point Scalar>
Scalar softplus(Scalar x) {
  return x > Scalar(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> sigmoid(const Eigen::MatrixBase<Derived>& margin) {
  return margin.unaryExpr([](typename Derived::Scalar v) { return sigmoid(v); });
}

// Mean binary cross-entropy computed from margins (logits).
template <typename DerivedM, typename DerivedY>
typename DerivedM::Scalar log_loss_from_margin(const Eigen::MatrixBase<DerivedM>& margin,
                                               const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedM::Scalar;
  Scalar total(0);
  for (Eigen::Index i = 0; i < margin.size(); ++i) total += softplus(margin(i)) - y(i) * margin(i);
  return total / static_cast<Scalar>(margin.size());
}

}  // namespace transfuse
