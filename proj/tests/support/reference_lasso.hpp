#pragma once

#include <Eigen/Dense>
#include <cmath>

// FISTA reference for the penalized lasso, used as an independent oracle for
// the coordinate-descent solver. Step size from power iteration on A^T A.
namespace testsupport {

inline Eigen::VectorXd reference_lasso(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                       double lambda, int iters = 20000) {
  const int q = static_cast<int>(a.cols());
  Eigen::VectorXd v = Eigen::VectorXd::Ones(q).normalized();
  double lip = 0.0;
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd w = a.transpose() * (a * v);
    lip = w.norm();
    if (lip <= 0.0) break;
    v = w / lip;
  }
  if (lip <= 0.0) return Eigen::VectorXd::Zero(q);
  const double step = 1.0 / (lip * 1.01);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd y = x;
  double tk = 1.0;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd grad = a.transpose() * (a * y - b);
    Eigen::VectorXd x_next = y - step * grad;
    for (int j = 0; j < q; ++j) {
      const double t = lambda * step;
      if (x_next(j) > t) {
        x_next(j) -= t;
      } else if (x_next(j) < -t) {
        x_next(j) += t;
      } else {
        x_next(j) = 0.0;
      }
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    y = x_next + ((tk - 1.0) / t_next) * (x_next - x);
    x = x_next;
    tk = t_next;
  }
  return x;
}

inline double lasso_objective(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double lambda,
                              const Eigen::VectorXd& alpha) {
  return 0.5 * (b - a * alpha).squaredNorm() + lambda * alpha.lpNorm<1>();
}

}  // namespace testsupport
