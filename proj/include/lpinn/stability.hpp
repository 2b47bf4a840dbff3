#ifndef LPINN_STABILITY_HPP
#define LPINN_STABILITY_HPP

// Largest eigenvalue of the linearized operator by an eigen-network:
// unknowns (W, lambda), v = |N(x; W)| on A, residual rows
//   g_i = (H v)_i - lambda v_i  for i in A,   then  |v|_2 - 1.

#include "lpinn/continuation.hpp"
#include "lpinn/lattice.hpp"
#include "lpinn/network.hpp"
#include "lpinn/oracle.hpp"
#include "lpinn/pinn.hpp"
#include "lpinn/solver.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lpinn {

struct EigenProblem {
  LatticeSpec spec;
  Eigen::SparseMatrix<double> H;
  NetworkShape shape;
  InputMode mode;
  Eigen::MatrixXd inputs;  // |A| x d

  Eigen::Index unknowns() const { return static_cast<Eigen::Index>(shape.parameter_count()) + 1; }
};

/// The eigen-network uses absolute mode without the mask; boundary zeros of
/// v are implied by restricting to A.
inline EigenProblem make_eigen_problem(const LatticeSpec& spec, const StateField& u, double mu, const NetworkShape& shape,
                                       InputTransform transform = InputTransform::fold_sorted) {
  if (shape.d_in != spec.dim()) throw std::invalid_argument("eigen problem: network input width does not match the lattice dimension");
  EigenProblem ep{spec, linearized_operator(spec, u, ModelParams{mu}), shape, InputMode{transform, false, true}, {}};
  ep.mode.validate();
  const Eigen::MatrixXd full = transform_lattice(spec, transform);
  ep.inputs.resize(static_cast<Eigen::Index>(spec.interior_count()), spec.dim());
  for (std::size_t k = 0; k < spec.interior_count(); ++k) ep.inputs.row(static_cast<Eigen::Index>(k)) = full.row(static_cast<Eigen::Index>(spec.interior_to_full(k)));
  return ep;
}

namespace detail {

inline void check_eigen_weights(const EigenProblem& ep, const Eigen::VectorXd& w) {
  if (w.size() != ep.unknowns()) throw std::invalid_argument("eigen weights must carry the trailing lambda slot");
}

}  // namespace detail

inline Eigen::VectorXd eigen_residual(const EigenProblem& ep, const Eigen::VectorXd& w_aug) {
  detail::check_eigen_weights(ep, w_aug);
  const Eigen::Index nw = w_aug.size() - 1;
  const double lambda = w_aug[nw];
  const Eigen::VectorXd v = evaluate(ep.shape, w_aug.head(nw), ep.inputs, ep.mode, false).output;
  Eigen::VectorXd g(v.size() + 1);
  g.head(v.size()) = ep.H * v - lambda * v;
  g[v.size()] = v.norm() - 1.0;
  return g;
}

inline Eigen::MatrixXd eigen_jacobian(const EigenProblem& ep, const Eigen::VectorXd& w_aug) {
  detail::check_eigen_weights(ep, w_aug);
  const Eigen::Index nw = w_aug.size() - 1;
  const double lambda = w_aug[nw];
  const NetworkEval ev = evaluate(ep.shape, w_aug.head(nw), ep.inputs, ep.mode, true);
  const Eigen::Index m = ev.output.size();
  Eigen::MatrixXd J(m + 1, nw + 1);
  J.topLeftCorner(m, nw) = ep.H * ev.jacobian - lambda * ev.jacobian;
  J.topRightCorner(m, 1) = -ev.output;
  const double nv = ev.output.norm();
  if (nv > 0.0)
    J.bottomLeftCorner(1, nw) = (ev.output.transpose() * ev.jacobian) / nv;
  else
    J.bottomLeftCorner(1, nw).setZero();
  J(m, nw) = 0.0;
  return J;
}

inline Eigen::VectorXd eigen_residual(const LatticeSpec& spec, const StateField& u, double mu, const NetworkShape& shape, const WeightVector& w_aug) {
  if (!w_aug.augmented) throw std::invalid_argument("eigen weights must carry the trailing lambda slot");
  return eigen_residual(make_eigen_problem(spec, u, mu, shape), w_aug.values);
}

struct EigenSolveOptions {
  LMConfig lm = default_lm();
  std::uint64_t seed = 1;
  /// Shifted power steps shaping the positive target the network is first fitted to.
  int guess_power_steps = 3000;
  /// Fresh-guess attempts (seed, seed+1, ...) after a failed warm start.
  int fresh_attempts = 2;
  /// Extra LM rounds resumed from the last iterate when the budget runs out before acceptance.
  int resume_rounds = 3;
  /// Acceptance caps.
  double accept_mse = 1e-16;
  double accept_norm_defect = 1e-8;

  static LMConfig default_lm() {
    LMConfig c;
    c.max_iter = 5000;
    c.residual_tol = 1e-30;
    c.step_tol = 1e-15;
    return c;
  }
};

struct EigenSolution {
  EigenResult result;
  WeightVector weights;  // network weights plus lambda
  SolveTrace trace;
};

/// Positive vector shaped by a few shifted power steps from the constant
/// vector, normalized to unit length.
inline Eigen::VectorXd eigen_guess_target(const Eigen::SparseMatrix<double>& H, int steps) {
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
  Eigen::VectorXd v = Eigen::VectorXd::Ones(H.rows());
  v /= v.norm();
  for (int i = 0; i < steps; ++i) {
    Eigen::VectorXd w = H * v - shift * v;
    w /= w.norm();
    const double moved = (w - v).norm();
    v = std::move(w);
    if (moved <= 1e-14) break;
  }
  v = v.cwiseAbs();
  return v / v.norm();
}

/// Network fitted to eigen_guess_target, lambda from the Rayleigh quotient of
/// its normalized absolute output.
inline WeightVector eigen_initial_guess(const EigenProblem& ep, const EigenSolveOptions& opt = {}) {
  const Eigen::VectorXd target = eigen_guess_target(ep.H, opt.guess_power_steps);
  InputMode fit_mode{ep.mode.transform, false, false};
  const PinnProblem fp = make_problem(ep.spec, ep.shape, fit_mode, 0.0);
  LMConfig cfg;
  cfg.max_iter = 300;
  cfg.residual_tol = 1e-20;
  cfg.step_tol = 1e-14;
  WeightVector w = fit_to_state(fp, StateField::from_interior(ep.spec, target), cfg, opt.seed);
  const Eigen::VectorXd v = evaluate(ep.shape, w.values, ep.inputs, ep.mode, false).output;
  const double vv = v.squaredNorm();
  const double lambda = vv > 0.0 ? v.dot(ep.H * v) / vv : 0.0;
  return w.with_extra(lambda);
}

class EigenPinnFailure : public EigenFailure {
 public:
  using EigenFailure::EigenFailure;
};

inline EigenSolution solve_largest_eigenpair(const EigenProblem& ep, const EigenSolveOptions& opt = {}, const std::optional<WeightVector>& warm = std::nullopt) {
  const WeightVector w0 = warm ? *warm : eigen_initial_guess(ep, opt);
  detail::check_eigen_weights(ep, w0.values);
  auto res = [&](const Eigen::VectorXd& w) { return eigen_residual(ep, w); };
  auto jac = [&](const Eigen::VectorXd& w) { return eigen_jacobian(ep, w); };
  auto accepted = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd g = eigen_residual(ep, x);
    const Eigen::VectorXd v = evaluate(ep.shape, x.head(x.size() - 1), ep.inputs, ep.mode, false).output;
    return g.squaredNorm() / static_cast<double>(g.size()) <= opt.accept_mse && std::abs(v.norm() - 1.0) <= opt.accept_norm_defect;
  };
  SolveResult r;
  try {
    r = lm_solve(res, jac, w0.values, opt.lm);
    for (int round = 0; round < opt.resume_rounds && r.trace.reason == Termination::max_iter && !accepted(r.x); ++round) {
      SolveResult more = lm_solve(res, jac, r.x, opt.lm);
      const int offset = r.trace.iterations();
      for (std::size_t i = 1; i < more.trace.records.size(); ++i) {
        more.trace.records[i].iter += offset;
        r.trace.records.push_back(more.trace.records[i]);
      }
      r.trace.reason = more.trace.reason;
      r.x = std::move(more.x);
    }
  } catch (const SolverFailure& e) {
    throw EigenPinnFailure(std::string("eigen solve: ") + e.what());
  }
  const Eigen::Index nw = r.x.size() - 1;
  const Eigen::VectorXd v = evaluate(ep.shape, r.x.head(nw), ep.inputs, ep.mode, false).output;
  const Eigen::VectorXd g = eigen_residual(ep, r.x);
  EigenSolution s;
  s.result.lambda = r.x[nw];
  s.result.v = StateField::from_interior(ep.spec, v);
  s.result.residual_mse = g.squaredNorm() / static_cast<double>(g.size());
  s.result.norm_defect = std::abs(v.norm() - 1.0);
  s.weights = WeightVector{r.x, true};
  s.trace = std::move(r.trace);
  if (!(s.result.residual_mse <= opt.accept_mse) || !(s.result.norm_defect <= opt.accept_norm_defect) || !std::isfinite(s.result.lambda)) {
    std::ostringstream os;
    os << "eigen solve: not accepted (mse=" << s.result.residual_mse << ", norm defect=" << s.result.norm_defect << ")";
    throw EigenPinnFailure(os.str());
  }
  return s;
}

inline EigenSolution solve_largest_eigenpair(const LatticeSpec& spec, const StateField& u, double mu, const NetworkShape& shape,
                                             const EigenSolveOptions& opt = {}, const std::optional<WeightVector>& warm = std::nullopt) {
  return solve_largest_eigenpair(make_eigen_problem(spec, u, mu, shape), opt, warm);
}

enum class Stability { stable, unstable };

inline std::string to_string(Stability s) { return s == Stability::stable ? "stable" : "unstable"; }

/// Stable iff lambda < 0; lambda = 0 counts as unstable.
inline Stability classify_stability(double lambda) {
  if (!std::isfinite(lambda)) throw std::invalid_argument("classify_stability: non-finite eigenvalue");
  return lambda < 0.0 ? Stability::stable : Stability::unstable;
}

enum class EigenMethod { pinn, oracle };

inline std::string to_string(EigenMethod m) { return m == EigenMethod::pinn ? "pinn" : "oracle"; }

inline EigenMethod eigen_method_from_string(const std::string& s) {
  if (s == "pinn") return EigenMethod::pinn;
  if (s == "oracle") return EigenMethod::oracle;
  throw std::invalid_argument("unknown eigen method: " + s);
}

struct AnnotateReport {
  /// Step indices whose PINN eigen solve failed (filled from the oracle instead).
  std::vector<int> fallbacks;
  /// Step indices left without an eigenvalue.
  std::vector<int> failures;
};

/// Fills lambda_max and stable for every point. PINN solves warm-start from
/// the previous point and retry from fresh guesses before falling back to the
/// oracle.
template <class System>
AnnotateReport annotate_branch(std::vector<BranchPoint>& points, EigenMethod method, const System& sys, const NetworkShape& shape,
                               const EigenSolveOptions& opt = {}) {
  AnnotateReport rep;
  std::optional<WeightVector> warm;
  for (auto& q : points) {
    const StateField u = sys.state(q.x);
    std::optional<double> lambda;
    if (method == EigenMethod::pinn) {
      const EigenProblem ep = make_eigen_problem(sys.spec(), u, q.mu, shape);
      for (int attempt = 0; attempt <= opt.fresh_attempts && !lambda; ++attempt) {
        if (attempt == 0 && !warm) continue;
        EigenSolveOptions o = opt;
        if (attempt > 0) o.seed = opt.seed + static_cast<std::uint64_t>(attempt - 1);
        try {
          EigenSolution s = solve_largest_eigenpair(ep, o, attempt == 0 ? warm : std::nullopt);
          lambda = s.result.lambda;
          warm = std::move(s.weights);
        } catch (const EigenFailure&) {
        }
      }
      if (!lambda) {
        warm.reset();
        rep.fallbacks.push_back(q.k);
      }
    }
    if (!lambda) {
      try {
        lambda = direct_largest_eigenpair(sys.spec(), u, q.mu).lambda;
      } catch (const EigenFailure&) {
        rep.failures.push_back(q.k);
      }
    }
    q.lambda_max = lambda;
    q.stable = lambda ? std::optional<bool>(classify_stability(*lambda) == Stability::stable) : std::nullopt;
  }
  return rep;
}

struct EigenRow {
  int k = 0;
  double mu = 0.0;
  double norm = 0.0;
  std::optional<double> lambda_pinn;
  std::optional<double> lambda_oracle;
  std::optional<bool> stable;
};

/// Eigen CSV: k,mu,norm,lambda_pinn,lambda_oracle,stable.
inline void write_eigen_csv(std::ostream& os, const std::vector<EigenRow>& rows) {
  os << "k,mu,norm,lambda_pinn,lambda_oracle,stable\n" << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.k << ',' << r.mu << ',' << r.norm << ',';
    if (r.lambda_pinn) os << *r.lambda_pinn;
    os << ',';
    if (r.lambda_oracle) os << *r.lambda_oracle;
    os << ',';
    if (r.stable) os << (*r.stable ? 1 : 0);
    os << '\n';
  }
}

}  // namespace lpinn

#endif  // LPINN_STABILITY_HPP
