#ifndef LPINN_ORACLE_HPP
#define LPINN_ORACLE_HPP

// Reference numerics on the raw lattice unknowns: LM solves, direct
// continuation and the largest eigenpair of the linearized operator.

#include "lpinn/continuation.hpp"
#include "lpinn/lattice.hpp"
#include "lpinn/pinn.hpp"
#include "lpinn/solver.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lpinn {

/// Largest eigenpair of a linearized operator.
struct EigenResult {
  double lambda = 0.0;
  StateField v;
  double residual_mse = 0.0;
  double norm_defect = 0.0;
};

class EigenFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleOptions {
  /// Direct solves are refused above this dimension unless overridden.
  int max_dim = 3;
  bool allow_4d = false;
};

inline void check_oracle_dim(const LatticeSpec& spec, const OracleOptions& opt = {}) {
  if (spec.dim() == 5) throw std::invalid_argument("oracle: five-dimensional direct solves are unsupported");
  if (spec.dim() > opt.max_dim && !(spec.dim() == 4 && opt.allow_4d))
    throw std::invalid_argument("oracle: dimension " + std::to_string(spec.dim()) + " needs an explicit override");
}

/// LMConfig used by direct solves unless the caller supplies one.
inline LMConfig default_direct_lm() {
  LMConfig c;
  c.max_iter = 500;
  c.residual_tol = 1e-30;
  c.step_tol = 1e-15;
  return c;
}

/// LM on the interior unknowns with the sparse state Jacobian.
inline StateField direct_solve(const LatticeSpec& spec, double mu, const Eigen::VectorXd& u0, const LMConfig& cfg = default_direct_lm(),
                               const OracleOptions& opt = {}) {
  check_oracle_dim(spec, opt);
  if (u0.size() != static_cast<Eigen::Index>(spec.interior_count())) throw std::invalid_argument("direct_solve: initial vector has the wrong length");
  const ModelParams params{mu};
  auto res = [&](const Eigen::VectorXd& x) { return residual(spec, StateField::from_interior(spec, x), params); };
  auto jac = [&](const Eigen::VectorXd& x) { return state_jacobian(spec, StateField::from_interior(spec, x), params); };
  const SolveResult r = lm_solve(res, jac, u0, cfg);
  return StateField::from_interior(spec, r.x);
}

/// Mean squared residual of a lattice state.
inline double state_mse(const LatticeSpec& spec, const StateField& s, double mu) {
  const Eigen::VectorXd f = residual(spec, s, ModelParams{mu});
  return f.size() ? f.squaredNorm() / static_cast<double>(f.size()) : 0.0;
}

/// Direct branch: bump-seeded solves at the two initial parameters, then the
/// same predictor/corrector as the PINN branches with x = interior u.
inline Branch direct_trace_branch(const LatticeSpec& spec, const ContinuationParams& p, const CorrectorOptions& copt = {}, const SeedOptions& seed = {},
                                  const LMConfig& cfg = default_direct_lm(), const OracleOptions& opt = {}) {
  p.validate();
  check_oracle_dim(spec, opt);
  const double mu_a = p.mu_start - p.initial_offset();
  const double mu_b = p.mu_start;
  const StateField bump = bump_state(spec, seed.amplitude.value_or(default_seed_amplitude(mu_a)), seed.width);
  const StateField sa = direct_solve(spec, mu_a, bump.interior(), cfg, opt);
  const StateField sb = direct_solve(spec, mu_b, sa.interior(), cfg, opt);
  const DirectBranchSystem sys(spec);
  BranchPoint pa = make_point(sys, sa.interior(), mu_a);
  BranchPoint pb = make_point(sys, sb.interior(), mu_b);
  if (!(pa.mse <= copt.accept_mse) || !(pb.mse <= copt.accept_mse)) throw CorrectorFailure("direct_trace_branch: initial solves did not converge");
  if (pb.norm < pa.norm) std::swap(pa, pb);
  return trace_from(sys, std::move(pa), std::move(pb), p, copt);
}

/// Oracle point at exactly `norm` whose parameter is closest to `mu_hint`.
/// Every reference segment whose norm range contains `norm` seeds direct
/// correctors constrained to |u| = norm, started from the interpolated state
/// and from both endpoints (near a norm extremum two oracle states share the
/// norm). A segment whose correctors all fail contributes its interpolated
/// point. A vertex at a local norm extremum also seeds correctors when `norm`
/// lies just past it: the curve can exceed its sampled extremum between
/// vertices, where no segment brackets the norm. Empty if nothing matches.
inline std::optional<BranchPoint> oracle_point_at_norm(const LatticeSpec& spec, const std::vector<BranchPoint>& reference, double norm, double mu_hint,
                                                       const CorrectorOptions& copt = {}) {
  ContinuationParams p;
  p.beta1 = 1.0;
  p.beta2 = 0.0;
  p.delta = 0.0;
  const DirectBranchSystem sys(spec);
  std::optional<BranchPoint> best;
  auto offer = [&](BranchPoint q) {
    if (!best || std::abs(q.mu - mu_hint) < std::abs(best->mu - mu_hint)) best = std::move(q);
  };
  for (std::size_t i = 1; i < reference.size(); ++i) {
    const auto& r0 = reference[i - 1];
    const auto& r1 = reference[i];
    if (norm < std::min(r0.norm, r1.norm) || norm > std::max(r0.norm, r1.norm)) continue;
    const double t = r1.norm == r0.norm ? 0.0 : (norm - r0.norm) / (r1.norm - r0.norm);
    const Prediction guesses[] = {{r0.x + t * (r1.x - r0.x), r0.mu + t * (r1.mu - r0.mu)}, {r0.x, r0.mu}, {r1.x, r1.mu}};
    bool solved = false;
    for (const auto& g : guesses) {
      BranchPoint anchor;
      anchor.norm = norm;
      anchor.mu = g.mu;
      try {
        offer(correct(g, anchor, sys, p, copt, 0.0, 0.0));
        solved = true;
      } catch (const CorrectorFailure&) {
      }
    }
    if (!solved) {
      BranchPoint q;
      q.x = guesses[0].x;
      q.mu = guesses[0].mu;
      q.norm = norm;
      offer(std::move(q));
    }
  }
  for (std::size_t i = 1; i + 1 < reference.size(); ++i) {
    const double n0 = reference[i - 1].norm, n1 = reference[i].norm, n2 = reference[i + 1].norm;
    const bool peak = n1 > n0 && n1 > n2 && norm > n1;
    const bool dip = n1 < n0 && n1 < n2 && norm < n1;
    if (!(peak || dip) || std::abs(norm - n1) > std::max(std::abs(n1 - n0), std::abs(n2 - n1))) continue;
    for (std::size_t j = i - 1; j <= i + 1; ++j) {
      BranchPoint anchor;
      anchor.norm = norm;
      anchor.mu = reference[j].mu;
      try {
        offer(correct(Prediction{reference[j].x, reference[j].mu}, anchor, sys, p, copt, 0.0, 0.0));
      } catch (const CorrectorFailure&) {
      }
    }
  }
  return best;
}

inline std::optional<double> oracle_mu_at_norm(const LatticeSpec& spec, const std::vector<BranchPoint>& reference, double norm, double mu_hint,
                                               const CorrectorOptions& copt = {}) {
  if (auto q = oracle_point_at_norm(spec, reference, norm, mu_hint, copt)) return q->mu;
  return std::nullopt;
}

/// Largest |mu - mu_oracle(norm)| over the points of `branch` with norm in
/// [lo, hi], the oracle value re-solved at each exact norm.
inline double refined_norm_deviation(const LatticeSpec& spec, const std::vector<BranchPoint>& branch, const std::vector<BranchPoint>& reference,
                                     double lo = -std::numeric_limits<double>::infinity(), double hi = std::numeric_limits<double>::infinity()) {
  double worst = 0.0;
  for (const auto& q : branch) {
    if (q.norm < lo || q.norm > hi) continue;
    if (const auto mu = oracle_mu_at_norm(spec, reference, q.norm, q.mu)) worst = std::max(worst, std::abs(q.mu - *mu));
  }
  return worst;
}

// -- eigenpairs -------------------------------------------------------------

struct EigenOracleOptions {
  /// Dense solve up to this many unknowns, shifted power iteration above.
  std::size_t dense_limit = 4000;
  bool force_power = false;
  int power_max_iter = 5000000;
  double power_tol = 1e-11;
};

namespace detail {

inline void normalize_sign(Eigen::VectorXd& v) {
  if (v.sum() < 0.0) v = -v;
}

/// Shifted power iteration on H - s I with s a Gershgorin lower bound, so the
/// dominant eigenvalue of the shifted matrix is the largest one of H.
inline std::pair<double, Eigen::VectorXd> power_largest(const Eigen::SparseMatrix<double>& H, const EigenOracleOptions& opt) {
  const Eigen::Index n = H.rows();
  double shift = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < H.outerSize(); ++k) {
    double diag = 0.0, off = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(H, k); it; ++it) {
      if (it.row() == it.col())
        diag += it.value();
      else
        off += std::abs(it.value());
    }
    shift = std::min(shift, diag - off);
  }
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  double rho = 0.0;
  for (int it = 0; it < opt.power_max_iter; ++it) {
    const Eigen::VectorXd Hv = H * v;
    rho = v.dot(Hv);
    if ((Hv - rho * v).norm() <= opt.power_tol) return {rho, v};
    Eigen::VectorXd w = Hv - shift * v;
    const double nw = w.norm();
    if (!(nw > 0.0) || !std::isfinite(nw)) break;
    v = w / nw;
  }
  throw EigenFailure("power iteration did not converge");
}

}  // namespace detail

/// Largest eigenvalue and unit eigenvector (sign fixed to nonnegative mean)
/// of a symmetric matrix.
inline std::pair<double, Eigen::VectorXd> largest_eigenpair(const Eigen::SparseMatrix<double>& H, const EigenOracleOptions& opt = {}) {
  if (H.rows() != H.cols() || H.rows() == 0) throw std::invalid_argument("largest_eigenpair: matrix must be square and nonempty");
  std::pair<double, Eigen::VectorXd> out;
  if (!opt.force_power && static_cast<std::size_t>(H.rows()) <= opt.dense_limit) {
    const Eigen::MatrixXd D(H);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
    if (es.info() != Eigen::Success) throw EigenFailure("dense eigensolver failed");
    const Eigen::Index last = D.rows() - 1;
    out = {es.eigenvalues()[last], es.eigenvectors().col(last)};
  } else {
    out = detail::power_largest(H, opt);
  }
  detail::normalize_sign(out.second);
  return out;
}

inline EigenResult direct_largest_eigenpair(const LatticeSpec& spec, const StateField& u, double mu, const EigenOracleOptions& opt = {}) {
  const Eigen::SparseMatrix<double> H = linearized_operator(spec, u, ModelParams{mu});
  auto [lambda, v] = largest_eigenpair(H, opt);
  EigenResult r;
  r.lambda = lambda;
  const Eigen::VectorXd g = H * v - lambda * v;
  r.residual_mse = g.squaredNorm() / static_cast<double>(g.size());
  r.norm_defect = std::abs(v.norm() - 1.0);
  r.v = StateField::from_interior(spec, v);
  return r;
}

}  // namespace lpinn

#endif  // LPINN_ORACLE_HPP
