#ifndef LPINN_TESTS_SUPPORT_HPP
#define LPINN_TESTS_SUPPORT_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

namespace lpinn::testing {

/// Central differences, step h * max(1, |x_j|).
template <class F>
Eigen::MatrixXd fd_jacobian(F&& f, const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double step = h * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + step;
    const Eigen::VectorXd fp = f(xp);
    xp[j] = x[j] - step;
    const Eigen::VectorXd fm = f(xp);
    xp[j] = x[j];
    J.col(j) = (fp - fm) / (2.0 * step);
  }
  return J;
}

/// max |A - B| / max |B|, the reference scale taken from B.
inline double rel_error(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const double scale = B.cwiseAbs().maxCoeff();
  const double diff = (A - B).cwiseAbs().maxCoeff();
  return scale > 0.0 ? diff / scale : diff;
}

inline Eigen::VectorXd uniform_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

}  // namespace lpinn::testing

#endif  // LPINN_TESTS_SUPPORT_HPP
