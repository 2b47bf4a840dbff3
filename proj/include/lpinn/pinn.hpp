#ifndef LPINN_PINN_HPP
#define LPINN_PINN_HPP

// Lattice residual in weight space: f_i(u(i, W), mu) for i in A, with the
// network supplying u at every stencil point. Two assembly paths:
//
//  * full: the network is evaluated once on all of A, boundary values are
//    explicit zeros, and J = (df/du) (du/dW) with the sparse state Jacobian;
//  * subset: only equations in S_k are formed; the centre and its 2d
//    neighbours are evaluated per equation (boundary neighbours are zero, or
//    vanish through the mask in masked mode).

#include "lpinn/lattice.hpp"
#include "lpinn/network.hpp"
#include "lpinn/solver.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace lpinn {

struct PinnProblem {
  LatticeSpec spec;
  NetworkShape shape;
  InputMode mode;
  /// Fixed bifurcation parameter; empty when mu is the trailing trainable slot.
  std::optional<double> mu;
  /// Transformed coordinates of every full-lattice point (row = full index).
  Eigen::MatrixXd inputs;
  /// Rows of `inputs` restricted to A, in A's order.
  Eigen::MatrixXd interior_inputs;
  /// Mask value per full-lattice point and per point of A (empty unless masked).
  Eigen::VectorXd mask;
  Eigen::VectorXd interior_mask;

  bool mu_trainable() const { return !mu.has_value(); }
  Eigen::Index network_size() const { return shape.parameter_count(); }
  Eigen::Index unknowns() const { return network_size() + (mu_trainable() ? 1 : 0); }

  double mu_of(const WeightVector& w) const {
    check(w);
    return mu ? *mu : w.extra();
  }

  void check(const WeightVector& w) const {
    if (w.network_size() != network_size()) throw std::invalid_argument("weight vector does not match network shape");
    if (w.augmented != mu_trainable()) throw std::invalid_argument("augmented slot must be present iff mu is trainable");
  }
};

inline PinnProblem make_problem(const LatticeSpec& spec, const NetworkShape& shape, const InputMode& mode, std::optional<double> mu) {
  if (shape.d_in != spec.dim()) throw std::invalid_argument("network input width must equal lattice dimension");
  mode.validate();
  if (mode.absolute) throw std::invalid_argument("absolute output is reserved for eigen mode");
  PinnProblem p{spec, shape, mode, mu, transform_lattice(spec, mode.transform), {}, {}, {}};
  p.interior_inputs.resize(static_cast<Eigen::Index>(spec.interior_count()), spec.dim());
  for (std::size_t a = 0; a < spec.interior_count(); ++a)
    p.interior_inputs.row(static_cast<Eigen::Index>(a)) = p.inputs.row(static_cast<Eigen::Index>(spec.interior_to_full(a)));
  if (mode.masked) {
    p.mask = mask_values(p.inputs);
    p.interior_mask = mask_values(p.interior_inputs);
  }
  return p;
}

/// Network values over A, the residual, and (optionally) their weight Jacobians.
struct PinnEvaluation {
  Eigen::VectorXd u;   // network value at each equation centre
  Eigen::MatrixXd du;  // d u / d W (network weights only)
  Eigen::VectorXd f;   // lattice residual
  Eigen::MatrixXd df;  // d f / d W (network weights only)
};

namespace detail {

inline PinnEvaluation evaluate_full(const PinnProblem& p, const Eigen::Ref<const Eigen::VectorXd>& weights, double mu, bool with_jacobian) {
  const auto& spec = p.spec;
  NetworkEval ev = evaluate(p.shape, weights, p.interior_inputs, p.mode, with_jacobian, p.mode.masked ? &p.interior_mask : nullptr);
  StateField full(spec);
  for (std::size_t a = 0; a < spec.interior_count(); ++a) full.values[spec.interior_to_full(a)] = ev.output[static_cast<Eigen::Index>(a)];

  PinnEvaluation out;
  out.f = residual(spec, std::span<const double>(full.values), ModelParams{mu});
  if (with_jacobian) {
    const Eigen::SparseMatrix<double> H = state_jacobian(spec, std::span<const double>(full.values), ModelParams{mu});
    out.df = H * ev.jacobian;
    out.du = std::move(ev.jacobian);
  }
  out.u = std::move(ev.output);
  return out;
}

inline PinnEvaluation evaluate_subset(const PinnProblem& p, const Eigen::Ref<const Eigen::VectorXd>& weights, double mu, std::span<const std::size_t> subset,
                                      bool with_jacobian) {
  const auto& spec = p.spec;
  const int d = spec.dim();
  const Eigen::Index stencil = 2 * d + 1;
  const auto neq = static_cast<Eigen::Index>(subset.size());
  const double c = spec.coupling();

  PinnEvaluation out;
  out.u.resize(neq);
  out.f.resize(neq);
  if (with_jacobian) {
    out.du.resize(neq, p.network_size());
    out.df.resize(neq, p.network_size());
  }

  // Equations are processed in cache-sized chunks. Within a chunk of ne
  // equations, row s*ne + e of X is stencil slot s of equation e (slot 0 the
  // centre, then the 2d neighbours).
  constexpr Eigen::Index kChunk = 256;
  std::vector<std::size_t> points;
  Eigen::MatrixXd X;
  Eigen::MatrixXd coef;
  Eigen::VectorXd M;
  Eigen::VectorXd col;
  for (Eigen::Index e0 = 0; e0 < neq; e0 += kChunk) {
    const Eigen::Index ne = std::min(kChunk, neq - e0);
    points.assign(static_cast<std::size_t>(ne * stencil), 0);
    X.resize(ne * stencil, d);
    for (Eigen::Index e = 0; e < ne; ++e) {
      const std::size_t a = subset[static_cast<std::size_t>(e0 + e)];
      if (a >= spec.interior_count()) throw std::invalid_argument("equation index out of range");
      const std::size_t f = spec.interior_to_full(a);
      points[static_cast<std::size_t>(e)] = f;
      for (int k = 0; k < d; ++k) {
        points[static_cast<std::size_t>((1 + 2 * k) * ne + e)] = f + spec.stride(k);
        points[static_cast<std::size_t>((2 + 2 * k) * ne + e)] = f - spec.stride(k);
      }
    }
    for (std::size_t r = 0; r < points.size(); ++r) X.row(static_cast<Eigen::Index>(r)) = p.inputs.row(static_cast<Eigen::Index>(points[r]));
    if (p.mode.masked) {
      M.resize(X.rows());
      for (std::size_t r = 0; r < points.size(); ++r) M[static_cast<Eigen::Index>(r)] = p.mask[static_cast<Eigen::Index>(points[r])];
    }

    const detail::ForwardPass fp = detail::forward_pass(p.shape, weights, X, p.mode, with_jacobian, p.mode.masked ? &M : nullptr);
    Eigen::VectorXd y = detail::finish_output(fp, p.mode);
    // Unmasked boundary neighbours are pinned to zero (value and derivative).
    coef.setConstant(ne, stencil, c);
    if (!p.mode.masked) {
      for (std::size_t r = static_cast<std::size_t>(ne); r < points.size(); ++r) {
        if (spec.on_boundary(points[r])) {
          y[static_cast<Eigen::Index>(r)] = 0.0;
          coef(static_cast<Eigen::Index>(r) % ne, static_cast<Eigen::Index>(r) / ne) = 0.0;
        }
      }
    }

    for (Eigen::Index e = 0; e < ne; ++e) {
      const double uc = y[e];
      double nb = 0.0;
      for (Eigen::Index s = 1; s < stencil; ++s) nb += y[s * ne + e];
      out.u[e0 + e] = uc;
      out.f[e0 + e] = reaction(mu, uc) + c * (nb - 2.0 * d * uc);
      coef(e, 0) = reaction_derivative(mu, uc) - 2.0 * d * c;
    }
    if (with_jacobian) {
      detail::for_each_jacobian_column(p.shape, fp, X, col, [&](Eigen::Index j, const Eigen::VectorXd& v) {
        auto df = out.df.col(j).segment(e0, ne);
        df = coef.col(0).cwiseProduct(v.head(ne));
        for (Eigen::Index s = 1; s < stencil; ++s) df += coef.col(s).cwiseProduct(v.segment(s * ne, ne));
        out.du.col(j).segment(e0, ne) = v.head(ne);
      });
    }
  }
  return out;
}

}  // namespace detail

/// Evaluates the system at network weights `weights` and parameter `mu`.
inline PinnEvaluation evaluate_system(const PinnProblem& p, const Eigen::Ref<const Eigen::VectorXd>& weights, double mu,
                                      const std::vector<std::size_t>* subset, bool with_jacobian) {
  if (subset) return detail::evaluate_subset(p, weights, mu, *subset, with_jacobian);
  return detail::evaluate_full(p, weights, mu, with_jacobian);
}

inline Eigen::VectorXd assemble_residual(const PinnProblem& p, const WeightVector& w, const std::vector<std::size_t>* subset = nullptr) {
  return evaluate_system(p, w.network(), p.mu_of(w), subset, false).f;
}

/// Rows align with assemble_residual; the trailing df/dmu = u column is
/// present iff mu is trainable.
inline Eigen::MatrixXd assemble_jacobian(const PinnProblem& p, const WeightVector& w, const std::vector<std::size_t>* subset = nullptr) {
  PinnEvaluation ev = evaluate_system(p, w.network(), p.mu_of(w), subset, true);
  if (!p.mu_trainable()) return std::move(ev.df);
  Eigen::MatrixXd J(ev.df.rows(), p.unknowns());
  J.leftCols(p.network_size()) = ev.df;
  J.col(p.network_size()) = ev.u;
  return J;
}

/// Mean squared residual over all of A.
inline double mse(const PinnProblem& p, const WeightVector& w) {
  const Eigen::VectorXd f = assemble_residual(p, w);
  return f.size() ? f.squaredNorm() / static_cast<double>(f.size()) : 0.0;
}

/// Network solution sampled on the lattice (boundary zeros explicit).
inline StateField lattice_state(const PinnProblem& p, const Eigen::Ref<const Eigen::VectorXd>& network_weights) {
  const Eigen::VectorXd u = evaluate(p.shape, network_weights, p.interior_inputs, p.mode, false).output;
  return StateField::from_interior(p.spec, u);
}

inline StateField lattice_state(const PinnProblem& p, const WeightVector& w) { return lattice_state(p, w.network()); }

// -- warm start -------------------------------------------------------------

struct SeedOptions {
  /// Bump amplitude; empty selects sqrt(1 - sqrt(1 + mu)) for -1 < mu < 0.
  std::optional<double> amplitude;
  double width = 40.0;
  std::uint64_t seed = 1;
  /// Upper bound on fitted points after removing duplicate network inputs.
  std::size_t max_fit_points = 20000;
};

inline double default_seed_amplitude(double mu) {
  if (mu > -1.0 && mu < 0.0) return std::sqrt(1.0 - std::sqrt(1.0 + mu));
  return 1.0;
}

/// Localized bump a * prod_k sech(b (x_k - 1/2)) in normalized coordinates,
/// rescaled so the sites nearest the centre carry exactly a (bond-centred
/// lattices have no site at 1/2).
inline double bump_value(const LatticeSpec& spec, const MultiIndex& idx, double a, double b) {
  const double h = 1.0 / (spec.size() - 1);
  const double peak = spec.centering() == Centering::bond ? std::cosh(0.5 * b * h) : 1.0;
  double v = a;
  for (const int i : idx) v *= peak / std::cosh(b * (static_cast<double>(i - 1) * h - 0.5));
  return v;
}

inline StateField bump_state(const LatticeSpec& spec, double a, double b) {
  StateField s(spec);
  for (std::size_t k = 0; k < spec.interior_count(); ++k) {
    const auto f = spec.interior_to_full(k);
    s.values[f] = bump_value(spec, spec.full_multi(f), a, b);
  }
  return s;
}

/// Least-squares fit of the network to `target` over A, used to land the
/// residual solve in the basin of a localized state. Points with identical
/// network inputs are fitted once.
inline WeightVector fit_to_state(const PinnProblem& p, const StateField& target, const LMConfig& cfg, const Eigen::VectorXd& w0, std::size_t max_points = 20000) {
  if (w0.size() != p.network_size()) throw std::invalid_argument("fit_to_state: initial weights do not match the network");
  const auto n_int = static_cast<Eigen::Index>(p.spec.interior_count());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_int));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto& X = p.interior_inputs;
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index k = 0; k < X.cols(); ++k)
      if (X(a, k) != X(b, k)) return X(a, k) < X(b, k);
    return a < b;
  };
  std::sort(order.begin(), order.end(), less);
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0 && (X.row(order[i]).array() == X.row(order[i - 1]).array()).all()) continue;
    keep.push_back(order[i]);
  }
  if (keep.size() > max_points) {
    std::vector<Eigen::Index> thinned;
    const double step = static_cast<double>(keep.size()) / static_cast<double>(max_points);
    for (std::size_t i = 0; i < max_points; ++i) thinned.push_back(keep[static_cast<std::size_t>(static_cast<double>(i) * step)]);
    keep.swap(thinned);
  }

  Eigen::MatrixXd Xf(static_cast<Eigen::Index>(keep.size()), X.cols());
  Eigen::VectorXd y(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    Xf.row(static_cast<Eigen::Index>(i)) = X.row(keep[i]);
    y[static_cast<Eigen::Index>(i)] = target.values[p.spec.interior_to_full(static_cast<std::size_t>(keep[i]))];
  }

  auto res = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd { return evaluate(p.shape, w, Xf, p.mode, false).output - y; };
  auto jac = [&](const Eigen::VectorXd& w) -> Eigen::MatrixXd { return evaluate(p.shape, w, Xf, p.mode, true).jacobian; };
  SolveResult r = lm_solve(res, jac, w0, cfg);
  return WeightVector{std::move(r.x), false};
}

inline WeightVector fit_to_state(const PinnProblem& p, const StateField& target, const LMConfig& cfg, std::uint64_t seed, std::size_t max_points = 20000) {
  return fit_to_state(p, target, cfg, init_weights(p.shape, seed).values, max_points);
}

/// Initial weights for a fixed-mu solve: the network fitted to a localized bump.
inline WeightVector warm_start(const PinnProblem& p, double mu, const SeedOptions& opt = {}) {
  const double a = opt.amplitude.value_or(default_seed_amplitude(mu));
  LMConfig cfg;
  cfg.max_iter = 200;
  cfg.residual_tol = 1e-14;
  cfg.step_tol = 1e-14;
  WeightVector w = fit_to_state(p, bump_state(p.spec, a, opt.width), cfg, opt.seed, opt.max_fit_points);
  return p.mu_trainable() ? w.with_extra(mu) : w;
}

// -- fixed-mu solve ---------------------------------------------------------

struct PinnSolve {
  WeightVector weights;
  SolveTrace trace;
};

/// Trains the network so that f_i(u(i, W), mu) = 0. With a subset spec the
/// stochastic variant is used and full-system MSE is recorded in the trace.
inline PinnSolve solve_fixed_mu(const PinnProblem& p, const WeightVector& w0, const LMConfig& cfg, const std::optional<SubsetSpec>& sub = std::nullopt) {
  if (p.mu_trainable()) throw std::invalid_argument("solve_fixed_mu requires a fixed mu");
  p.check(w0);
  const double mu = *p.mu;
  if (!sub) {
    auto res = [&](const Eigen::VectorXd& w) { return evaluate_system(p, w, mu, nullptr, false).f; };
    auto jac = [&](const Eigen::VectorXd& w) { return evaluate_system(p, w, mu, nullptr, true).df; };
    SolveResult r = lm_solve(res, jac, w0.values, cfg);
    return {WeightVector{std::move(r.x), false}, std::move(r.trace)};
  }
  auto res = [&](const Eigen::VectorXd& w, const std::vector<std::size_t>& s) { return evaluate_system(p, w, mu, &s, false).f; };
  auto jac = [&](const Eigen::VectorXd& w, const std::vector<std::size_t>& s) { return evaluate_system(p, w, mu, &s, true).df; };
  auto test = [&](const Eigen::VectorXd& w) { return mse(p, WeightVector{w, false}); };
  SolveResult r = stochastic_lm_solve(res, jac, w0.values, cfg, p.spec.interior_count(), *sub, test);
  return {WeightVector{std::move(r.x), false}, std::move(r.trace)};
}

}  // namespace lpinn

#endif  // LPINN_PINN_HPP
