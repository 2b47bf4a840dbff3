#ifndef LPINN_CONTINUATION_HPP
#define LPINN_CONTINUATION_HPP

// Pseudo-arclength continuation in (x, mu), where x is either the network
// weights (PINN branches) or the lattice unknowns (direct branches).
//
// Step k: predictor (x, mu)_k = 2 (x, mu)_{k-1} - (x, mu)_{k-2}, then LM on
// the augmented system
//
//   f_i(x, mu) = 0,  i in A
//   alpha ( sqrt([b1 (|u_k| - (|u_{k-1}| + gamma))]^2 + [b2 (mu_k - mu_{k-1})]^2) - delta ) = 0
//
// with mu trainable. Norm mode: b2 = delta = 0, gamma != 0. Arclength mode:
// gamma = 0, b1, b2 > 0.

#include "lpinn/lattice.hpp"
#include "lpinn/network.hpp"
#include "lpinn/pinn.hpp"
#include "lpinn/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lpinn {

struct ContinuationParams {
  double alpha = 10.0;
  double beta1 = 1.0;
  double beta2 = 0.0;
  double gamma = 10.0 / 1000.0;
  double delta = 0.0;
  bool drop_sqrt = false;
  int k_max = 100000;
  double norm_target = 10.0;
  /// Parameter of the second initial solve; the first sits at mu_start - mu_offset.
  double mu_start = -0.1;
  /// Defaults to 0.02 in norm mode and 1/beta2 in arclength mode.
  std::optional<double> mu_offset;

  bool norm_mode() const { return beta2 == 0.0 && delta == 0.0 && gamma != 0.0; }
  bool arclength_mode() const { return gamma == 0.0 && beta1 > 0.0 && beta2 > 0.0; }

  double initial_offset() const { return mu_offset.value_or(norm_mode() ? 0.02 : 1.0 / beta2); }

  void validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("continuation: alpha must be positive");
    if (beta1 < 0.0 || beta2 < 0.0 || delta < 0.0) throw std::invalid_argument("continuation: beta1, beta2, delta must be >= 0");
    if (norm_mode() == arclength_mode()) throw std::invalid_argument("continuation: parameters select neither or both of norm/arclength mode");
    if (norm_mode() && beta1 == 0.0) throw std::invalid_argument("continuation: norm mode needs beta1 > 0");
    if (drop_sqrt && delta != 1.0) throw std::invalid_argument("continuation: drop_sqrt requires delta = 1");
    if (k_max < 2) throw std::invalid_argument("continuation: k_max must be >= 2");
  }

  static ContinuationParams norm_defaults() { return {}; }

  static ContinuationParams arclength_defaults() {
    ContinuationParams p;
    p.alpha = 10.0;
    p.beta1 = 1000.0 / 40.0;
    p.beta2 = 100.0;
    p.gamma = 0.0;
    p.delta = 1.0;
    p.norm_target = 40.0;
    return p;
  }

  std::string describe() const {
    std::ostringstream os;
    os << std::setprecision(17) << "alpha=" << alpha << " beta1=" << beta1 << " beta2=" << beta2 << " gamma=" << gamma << " delta=" << delta
       << " drop_sqrt=" << (drop_sqrt ? 1 : 0) << " k_max=" << k_max << " norm_target=" << norm_target << " mu_start=" << mu_start
       << " mu_offset=" << initial_offset();
    return os.str();
  }
};

struct NormMu {
  double norm = 0.0;
  double mu = 0.0;
};

namespace detail {

struct ConstraintValue {
  double value = 0.0;
  double d_norm = 0.0;  // d value / d |u|
  double d_mu = 0.0;    // explicit d value / d mu
};

/// Constraint and its partials. Norm mode evaluates sqrt(A^2) as the signed A
/// (same magnitude, smooth at the root). drop_sqrt uses alpha (s^2 - delta^2).
inline ConstraintValue constraint(const NormMu& cur, const NormMu& prev, const ContinuationParams& p, double gamma, double delta) {
  const double A = p.beta1 * (cur.norm - (prev.norm + gamma));
  const double B = p.beta2 * (cur.mu - prev.mu);
  ConstraintValue c;
  if (p.beta2 == 0.0 && delta == 0.0) {
    c.value = p.alpha * A;
    c.d_norm = p.alpha * p.beta1;
    return c;
  }
  if (p.drop_sqrt) {
    c.value = p.alpha * (A * A + B * B - delta * delta);
    c.d_norm = p.alpha * 2.0 * p.beta1 * A;
    c.d_mu = p.alpha * 2.0 * p.beta2 * B;
    return c;
  }
  const double s = std::hypot(A, B);
  c.value = p.alpha * (s - delta);
  if (s > 0.0) {
    c.d_norm = p.alpha * p.beta1 * A / s;
    c.d_mu = p.alpha * p.beta2 * B / s;
  }
  return c;
}

}  // namespace detail

inline double constraint_residual(const NormMu& cur, const NormMu& prev, const ContinuationParams& p) {
  return detail::constraint(cur, prev, p, p.gamma, p.delta).value;
}

/// A converged point on a branch. `x` holds the network weights (PINN) or the
/// interior lattice values (direct).
struct BranchPoint {
  Eigen::VectorXd x;
  double mu = 0.0;
  double norm = 0.0;
  double mse = 0.0;
  double constraint_residual = 0.0;
  std::optional<double> lambda_max;
  std::optional<bool> stable;
  int k = 0;
};

struct Prediction {
  Eigen::VectorXd x;
  double mu = 0.0;
};

/// Secant extrapolation 2 p2 - p1 (scaled by `fraction` of a full step).
inline Prediction predict(const BranchPoint& p1, const BranchPoint& p2, double fraction = 1.0) {
  if (p1.x.size() != p2.x.size()) throw std::invalid_argument("predict: branch points have different lengths");
  return {p2.x + fraction * (p2.x - p1.x), p2.mu + fraction * (p2.mu - p1.mu)};
}

// -- branch systems ---------------------------------------------------------

/// State-dependent quantities a branch system provides at (x, mu).
struct SystemEvaluation {
  Eigen::VectorXd f;          // residual over A
  Eigen::MatrixXd df_dx;      // empty unless requested
  Eigen::VectorXd u;          // interior state (df/dmu = u for this model)
  double sumsq = 0.0;         // sum of u^2 over the lattice
  Eigen::VectorXd sumsq_grad; // d sumsq / dx, empty unless requested
};

/// Branch system whose unknowns are network weights.
class PinnBranchSystem {
 public:
  explicit PinnBranchSystem(const PinnProblem& problem) : p_(problem) {}

  const PinnProblem& problem() const { return p_; }
  const LatticeSpec& spec() const { return p_.spec; }
  Eigen::Index unknowns() const { return p_.network_size(); }

  SystemEvaluation evaluate(const Eigen::VectorXd& x, double mu, bool with_jacobian) const {
    PinnEvaluation ev = evaluate_system(p_, x, mu, nullptr, with_jacobian);
    SystemEvaluation s;
    s.sumsq = ev.u.squaredNorm();
    if (with_jacobian) {
      s.sumsq_grad = 2.0 * (ev.du.transpose() * ev.u);
      s.df_dx = std::move(ev.df);
    }
    s.f = std::move(ev.f);
    s.u = std::move(ev.u);
    return s;
  }

  StateField state(const Eigen::VectorXd& x) const { return lattice_state(p_, x); }

  /// Fresh weights for two consecutive branch points holding the same lattice
  /// states: b is refitted from a seeded initialization, a from b's new
  /// weights, each polished by a fixed-mu solve. Empty if either refit
  /// moves the state by more than 1e-6.
  std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> reparametrize(const BranchPoint& a, const BranchPoint& b) const {
    LMConfig cfg;
    cfg.max_iter = 1000;
    cfg.residual_tol = 1e-30;
    cfg.step_tol = 1e-16;
    auto refit = [&](const BranchPoint& q, const Eigen::VectorXd& w0) -> std::optional<Eigen::VectorXd> {
      PinnProblem fixed = p_;
      fixed.mu = q.mu;
      const StateField target = state(q.x);
      const WeightVector fit = fit_to_state(fixed, target, cfg, w0);
      PinnSolve s;
      try {
        s = solve_fixed_mu(fixed, fit, cfg);
      } catch (const SolverFailure&) {
        return std::nullopt;
      }
      if ((state(s.weights.values).interior() - target.interior()).cwiseAbs().maxCoeff() > 1e-6) return std::nullopt;
      return s.weights.values;
    };
    const auto wb = refit(b, init_weights(p_.shape, refit_seed).values);
    if (!wb) return std::nullopt;
    const auto wa = refit(a, *wb);
    if (!wa) return std::nullopt;
    return std::make_pair(*wa, *wb);
  }

  std::uint64_t refit_seed = 1;

 private:
  PinnProblem p_;
};

/// Branch system whose unknowns are the interior lattice values.
class DirectBranchSystem {
 public:
  explicit DirectBranchSystem(LatticeSpec spec) : spec_(std::move(spec)) {}

  const LatticeSpec& spec() const { return spec_; }
  Eigen::Index unknowns() const { return static_cast<Eigen::Index>(spec_.interior_count()); }

  SystemEvaluation evaluate(const Eigen::VectorXd& x, double mu, bool with_jacobian) const {
    const StateField st = StateField::from_interior(spec_, x);
    SystemEvaluation s;
    s.f = residual(spec_, st, ModelParams{mu});
    s.u = x;
    s.sumsq = x.squaredNorm();
    if (with_jacobian) {
      s.df_dx = Eigen::MatrixXd(state_jacobian(spec_, st, ModelParams{mu}));
      s.sumsq_grad = 2.0 * x;
    }
    return s;
  }

  StateField state(const Eigen::VectorXd& x) const { return StateField::from_interior(spec_, x); }

 private:
  LatticeSpec spec_;
};

// -- corrector --------------------------------------------------------------

struct CorrectorOptions {
  LMConfig lm = default_lm();
  /// Acceptance: system MSE and |constraint| / alpha caps.
  double accept_mse = 1e-12;
  double accept_constraint = 1e-8;

  static LMConfig default_lm() {
    LMConfig c;
    c.max_iter = 2000;
    c.residual_tol = 1e-30;
    c.step_tol = 1e-15;
    return c;
  }
};

class CorrectorFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double safe_norm(double sumsq, double mu) {
  return mu > -1.0 ? norm_prefactor(mu) * sumsq : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// The corrector's system in z = (x, mu): f over A, then the constraint
/// against `anchor`. The Jacobian carries the df/dmu = u column and the
/// constraint row through the mu-dependent norm prefactor.
template <class System>
struct AugmentedSystem {
  const System& sys;
  NormMu anchor;
  const ContinuationParams& p;
  double gamma = 0.0;
  double delta = 0.0;

  Eigen::VectorXd residual(const Eigen::VectorXd& z) const {
    const Eigen::Index nx = sys.unknowns();
    const double mu = z[nx];
    const SystemEvaluation s = sys.evaluate(z.head(nx), mu, false);
    Eigen::VectorXd r(s.f.size() + 1);
    r.head(s.f.size()) = s.f;
    const double nrm = detail::safe_norm(s.sumsq, mu);
    r[s.f.size()] = std::isfinite(nrm) ? detail::constraint({nrm, mu}, anchor, p, gamma, delta).value : nrm;
    return r;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& z) const {
    const Eigen::Index nx = sys.unknowns();
    const double mu = z[nx];
    const SystemEvaluation s = sys.evaluate(z.head(nx), mu, true);
    const Eigen::Index m = s.f.size();
    const double pre = norm_prefactor(mu);
    const detail::ConstraintValue c = detail::constraint({pre * s.sumsq, mu}, anchor, p, gamma, delta);
    Eigen::MatrixXd J(m + 1, nx + 1);
    J.topLeftCorner(m, nx) = s.df_dx;
    J.topRightCorner(m, 1) = s.u;
    J.bottomLeftCorner(1, nx) = (c.d_norm * pre) * s.sumsq_grad.transpose();
    J(m, nx) = c.d_norm * norm_prefactor_derivative(mu) * s.sumsq + c.d_mu;
    return J;
  }
};

/// Solves the augmented system from `pred` with mu trainable. Returns the
/// converged point (fields k, lambda_max, stable left for the caller).
/// Throws CorrectorFailure when the acceptance caps are not met.
template <class System>
BranchPoint correct(const Prediction& pred, const BranchPoint& prev, const System& sys, const ContinuationParams& p, const CorrectorOptions& opt,
                    double gamma, double delta) {
  const Eigen::Index nx = sys.unknowns();
  if (pred.x.size() != nx) throw std::invalid_argument("correct: prediction does not match the system");
  const NormMu anchor{prev.norm, prev.mu};
  const AugmentedSystem<System> aug{sys, anchor, p, gamma, delta};
  auto residual = [&](const Eigen::VectorXd& z) { return aug.residual(z); };
  auto jacobian = [&](const Eigen::VectorXd& z) { return aug.jacobian(z); };

  Eigen::VectorXd z0(nx + 1);
  z0.head(nx) = pred.x;
  z0[nx] = pred.mu;
  SolveResult r;
  try {
    r = lm_solve(residual, jacobian, z0, opt.lm);
  } catch (const SolverFailure& e) {
    throw CorrectorFailure(std::string("corrector: ") + e.what());
  }

  BranchPoint out;
  out.x = r.x.head(nx);
  out.mu = r.x[nx];
  const SystemEvaluation s = sys.evaluate(out.x, out.mu, false);
  out.norm = detail::safe_norm(s.sumsq, out.mu);
  out.mse = s.f.size() ? s.f.squaredNorm() / static_cast<double>(s.f.size()) : 0.0;
  out.constraint_residual = std::isfinite(out.norm) ? detail::constraint({out.norm, out.mu}, anchor, p, gamma, delta).value
                                                    : std::numeric_limits<double>::quiet_NaN();
  if (!(out.mse <= opt.accept_mse) || !(std::abs(out.constraint_residual) / p.alpha <= opt.accept_constraint)) {
    std::ostringstream os;
    os << "corrector: not accepted (mse=" << out.mse << ", |constraint|/alpha=" << std::abs(out.constraint_residual) / p.alpha << ")";
    throw CorrectorFailure(os.str());
  }
  return out;
}

template <class System>
BranchPoint correct(const Prediction& pred, const BranchPoint& prev, const System& sys, const ContinuationParams& p, const CorrectorOptions& opt = {}) {
  return correct(pred, prev, sys, p, opt, p.gamma, p.delta);
}

/// Fills norm/mse for an initial point solved at fixed mu.
template <class System>
BranchPoint make_point(const System& sys, Eigen::VectorXd x, double mu) {
  BranchPoint bp;
  const SystemEvaluation s = sys.evaluate(x, mu, false);
  bp.x = std::move(x);
  bp.mu = mu;
  bp.norm = norm_prefactor(mu) * s.sumsq;
  bp.mse = s.f.size() ? s.f.squaredNorm() / static_cast<double>(s.f.size()) : 0.0;
  return bp;
}

// -- branch tracing ---------------------------------------------------------

struct Branch {
  std::vector<BranchPoint> points;
  bool complete = false;
  std::string message;
  /// Steps that needed the half-step retry.
  int retries = 0;
  /// Weight refits after both step sizes failed (PINN branches only).
  int reparametrizations = 0;
};

/// Continues from an initial pair until |u| >= norm_target or k = k_max.
/// A failed corrector is retried once with half the step (gamma or delta).
/// If that fails too and the system can reparametrize (fresh weights for the
/// last two points), both step sizes are tried once more; otherwise the
/// branch ends with complete = false.
template <class System>
Branch trace_from(const System& sys, BranchPoint first, BranchPoint second, const ContinuationParams& p, const CorrectorOptions& opt = {}) {
  p.validate();
  Branch br;
  first.k = 1;
  second.k = 2;
  first.constraint_residual = 0.0;
  second.constraint_residual = constraint_residual({second.norm, second.mu}, {first.norm, first.mu}, p);
  br.points.push_back(std::move(first));
  br.points.push_back(std::move(second));

  std::string last_error;
  auto attempt = [&](double fraction) -> std::optional<BranchPoint> {
    const BranchPoint& a = br.points[br.points.size() - 2];
    const BranchPoint& b = br.points.back();
    const double scale = fraction < 1.0 ? 0.5 : 1.0;
    const double gamma = p.norm_mode() ? scale * p.gamma : p.gamma;
    const double delta = p.norm_mode() ? p.delta : scale * p.delta;
    try {
      BranchPoint c = correct(predict(a, b, fraction), b, sys, p, opt, gamma, delta);
      // the step constraint is also met by stepping back towards a; reject that root
      const double along = p.beta1 * p.beta1 * (b.norm - a.norm) * (c.norm - b.norm) + p.beta2 * p.beta2 * (b.mu - a.mu) * (c.mu - b.mu);
      if (!(along > 0.0)) throw CorrectorFailure("corrector: converged against the branch direction");
      return c;
    } catch (const CorrectorFailure& e) {
      last_error = e.what();
      return std::nullopt;
    }
  };

  while (br.points.back().norm < p.norm_target && br.points.back().k < p.k_max) {
    const int k = br.points.back().k + 1;
    std::optional<BranchPoint> next = attempt(1.0);
    if (!next) {
      ++br.retries;
      next = attempt(0.5);
    }
    if constexpr (requires { sys.reparametrize(br.points.back(), br.points.back()); }) {
      if (!next) {
        BranchPoint& a = br.points[br.points.size() - 2];
        BranchPoint& b = br.points.back();
        if (auto fresh = sys.reparametrize(a, b)) {
          ++br.reparametrizations;
          const int ka = a.k;
          const int kb = b.k;
          a = make_point(sys, std::move(fresh->first), a.mu);
          b = make_point(sys, std::move(fresh->second), b.mu);
          a.k = ka;
          b.k = kb;
          next = attempt(1.0);
          if (!next) next = attempt(0.5);
        }
      }
    }
    if (!next) {
      br.message = "aborted at k=" + std::to_string(k) + ": " + last_error;
      return br;
    }
    next->k = k;
    br.points.push_back(std::move(*next));
  }
  br.complete = true;
  return br;
}

/// Initial pair for a PINN branch: fixed-mu solves at mu_start - offset and
/// mu_start (the second warm-started from the first), ordered by norm.
inline std::pair<BranchPoint, BranchPoint> init_branch(const PinnProblem& problem, const ContinuationParams& p, const LMConfig& cfg,
                                                       const SeedOptions& seed = {}, double accept_mse = 1e-12) {
  p.validate();
  const double mu_a = p.mu_start - p.initial_offset();
  const double mu_b = p.mu_start;
  PinnProblem fixed = problem;
  fixed.mu = mu_a;
  PinnSolve sa = solve_fixed_mu(fixed, warm_start(fixed, mu_a, seed), cfg);
  fixed.mu = mu_b;
  PinnSolve sb = solve_fixed_mu(fixed, sa.weights, cfg);

  PinnProblem free = problem;
  free.mu.reset();
  const PinnBranchSystem sys(free);
  BranchPoint pa = make_point(sys, sa.weights.values, mu_a);
  BranchPoint pb = make_point(sys, sb.weights.values, mu_b);
  if (!(pa.mse <= accept_mse) || !(pb.mse <= accept_mse)) {
    std::ostringstream os;
    os << "init_branch: initial solves did not converge (mse " << pa.mse << ", " << pb.mse << ")";
    throw CorrectorFailure(os.str());
  }
  if (pb.norm < pa.norm) std::swap(pa, pb);
  return {std::move(pa), std::move(pb)};
}

inline Branch trace_branch(const PinnProblem& problem, const ContinuationParams& p, const LMConfig& cfg, const CorrectorOptions& opt = {},
                           const SeedOptions& seed = {}) {
  auto [a, b] = init_branch(problem, p, cfg, seed, opt.accept_mse);
  PinnProblem free = problem;
  free.mu.reset();
  return trace_from(PinnBranchSystem(free), std::move(a), std::move(b), p, opt);
}

// -- branch analysis --------------------------------------------------------

/// Sign changes of consecutive mu increments (each one a fold), ignoring
/// increments below `eps` in magnitude.
inline int count_folds(const std::vector<BranchPoint>& pts, double eps = 1e-12) {
  int folds = 0;
  int last_sign = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double dm = pts[i].mu - pts[i - 1].mu;
    if (std::abs(dm) <= eps) continue;
    const int s = dm > 0 ? 1 : -1;
    if (last_sign != 0 && s != last_sign) ++folds;
    last_sign = s;
  }
  return folds;
}

/// Norms of the points where mu reverses direction, in branch order.
inline std::vector<double> fold_norms(const std::vector<BranchPoint>& pts, double eps = 1e-12) {
  std::vector<double> out;
  int last_sign = 0;
  std::size_t last_index = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double dm = pts[i].mu - pts[i - 1].mu;
    if (std::abs(dm) <= eps) continue;
    const int s = dm > 0 ? 1 : -1;
    if (last_sign != 0 && s != last_sign) out.push_back(pts[last_index].norm);
    last_sign = s;
    last_index = i;
  }
  return out;
}

/// For each point of `branch` with norm in [lo, hi], the smallest |mu - mu_ref|
/// over reference segments whose norm interval contains it (linear
/// interpolation in norm); returns the maximum. Points outside the reference
/// norm range are skipped.
inline double matched_norm_deviation(const std::vector<BranchPoint>& branch, const std::vector<BranchPoint>& reference,
                                     double lo = -std::numeric_limits<double>::infinity(), double hi = std::numeric_limits<double>::infinity()) {
  double worst = 0.0;
  for (const auto& q : branch) {
    if (q.norm < lo || q.norm > hi) continue;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < reference.size(); ++i) {
      const auto& r0 = reference[i - 1];
      const auto& r1 = reference[i];
      const double n0 = std::min(r0.norm, r1.norm);
      const double n1 = std::max(r0.norm, r1.norm);
      if (q.norm < n0 || q.norm > n1) continue;
      const double t = r1.norm == r0.norm ? 0.0 : (q.norm - r0.norm) / (r1.norm - r0.norm);
      best = std::min(best, std::abs(q.mu - (r0.mu + t * (r1.mu - r0.mu))));
    }
    if (std::isfinite(best)) worst = std::max(worst, best);
  }
  return worst;
}

// -- I/O --------------------------------------------------------------------

/// Branch CSV: a "# <params>" line, then k,mu,norm,mse,constraint_residual,lambda_max,stable,method.
inline void write_branch_csv(std::ostream& os, const std::vector<BranchPoint>& pts, const ContinuationParams& p, const std::string& method) {
  os << "# " << p.describe() << '\n';
  os << "k,mu,norm,mse,constraint_residual,lambda_max,stable,method\n" << std::setprecision(17);
  for (const auto& q : pts) {
    os << q.k << ',' << q.mu << ',' << q.norm << ',' << q.mse << ',' << q.constraint_residual << ',';
    if (q.lambda_max) os << *q.lambda_max;
    os << ',';
    if (q.stable) os << (*q.stable ? 1 : 0);
    os << ',' << method << '\n';
  }
}

/// One line per point: k,mu,x_0,...,x_{n-1}.
inline void write_branch_states(std::ostream& os, const std::vector<BranchPoint>& pts) {
  os << std::setprecision(17);
  for (const auto& q : pts) {
    os << q.k << ',' << q.mu;
    for (Eigen::Index i = 0; i < q.x.size(); ++i) os << ',' << q.x[i];
    os << '\n';
  }
}

inline std::vector<BranchPoint> read_branch_states(std::istream& is) {
  std::vector<BranchPoint> pts;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tok;
    std::vector<double> vals;
    while (std::getline(ls, tok, ',')) vals.push_back(std::stod(tok));
    if (vals.size() < 3) throw std::runtime_error("branch states: malformed line");
    BranchPoint q;
    q.k = static_cast<int>(vals[0]);
    q.mu = vals[1];
    q.x = Eigen::Map<const Eigen::VectorXd>(vals.data() + 2, static_cast<Eigen::Index>(vals.size() - 2));
    pts.push_back(std::move(q));
  }
  return pts;
}

}  // namespace lpinn

#endif  // LPINN_CONTINUATION_HPP
