#ifndef LPINN_SOLVER_HPP
#define LPINN_SOLVER_HPP

// Levenberg-Marquardt root finding for nonlinear systems F(x) = 0:
//
//   x+ = x - (J^T J + lambda I)^{-1} J^T F(x)
//
// A step is accepted only if it lowers ||F||_2; otherwise lambda grows and the
// step is recomputed. The stochastic variant restricts F and J to a random
// equation subset S_k redrawn every iteration. The solver knows nothing about
// what x means (lattice values, network weights, weights + mu, weights + lambda).

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace lpinn {

struct LMConfig {
  double lambda0 = 1e-3;
  double up_factor = 3.0;
  double down_factor = 0.3;
  int max_iter = 1000;
  /// Stop once the (batch) mean squared residual falls to this value.
  double residual_tol = 0.0;
  /// Stop once ||dx|| <= step_tol * (||x|| + step_tol).
  double step_tol = 0.0;
  std::uint64_t seed = 0;
  int max_rejections = 20;
  double lambda_min = 1e-15;
  double lambda_max = 1e15;
  /// Keep lambda at lambda0 (which may then be 0); a rejected step ends the solve.
  bool fixed_damping = false;
  /// Full-system MSE cadence for the stochastic variant (0 = final only).
  int test_every = 10;

  void validate() const {
    if (fixed_damping) {
      if (!(lambda0 >= 0.0)) throw std::invalid_argument("LMConfig: fixed damping must be >= 0");
    } else {
      if (!(lambda0 > 0.0)) throw std::invalid_argument("LMConfig: lambda0 must be positive");
      if (!(up_factor > 1.0 && down_factor > 0.0 && down_factor < 1.0))
        throw std::invalid_argument("LMConfig: require up_factor > 1 > down_factor > 0");
    }
    if (max_iter < 0 || max_rejections < 1) throw std::invalid_argument("LMConfig: bad iteration limits");
    if (residual_tol < 0.0 || step_tol < 0.0) throw std::invalid_argument("LMConfig: tolerances must be >= 0");
  }
};

enum class Termination { residual_tol, step_tol, max_iter, stalled };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::residual_tol: return "residual_tol";
    case Termination::step_tol: return "step_tol";
    case Termination::max_iter: return "max_iter";
    case Termination::stalled: return "stalled";
  }
  return "?";
}

struct TraceRecord {
  int iter = 0;
  double damping = 0.0;
  double batch_mse = 0.0;
  std::optional<double> full_mse;
  double step_norm = 0.0;
};

struct SolveTrace {
  std::vector<TraceRecord> records;
  Termination reason = Termination::max_iter;

  double final_batch_mse() const { return records.empty() ? std::numeric_limits<double>::quiet_NaN() : records.back().batch_mse; }
  std::optional<double> final_full_mse() const {
    for (auto it = records.rbegin(); it != records.rend(); ++it)
      if (it->full_mse) return it->full_mse;
    return std::nullopt;
  }
  int iterations() const { return records.empty() ? 0 : records.back().iter; }
};

struct SolveResult {
  Eigen::VectorXd x;
  SolveTrace trace;
};

/// Raised when damping leaves [lambda_min, lambda_max] or the residual is not
/// finite at the start point. Carries the best iterate and the trace so far.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, Eigen::VectorXd best, SolveTrace trace)
      : std::runtime_error(what), best_(std::move(best)), trace_(std::move(trace)) {}
  const Eigen::VectorXd& best() const { return best_; }
  const SolveTrace& trace() const { return trace_; }

 private:
  Eigen::VectorXd best_;
  SolveTrace trace_;
};

inline void write_trace_csv(std::ostream& os, const SolveTrace& trace) {
  os << "iter,damping,batch_mse,full_mse,step_norm\n" << std::setprecision(17);
  for (const auto& r : trace.records) {
    os << r.iter << ',' << r.damping << ',' << r.batch_mse << ',';
    if (r.full_mse) os << *r.full_mse;
    os << ',' << r.step_norm << '\n';
  }
}

// -- subsets ----------------------------------------------------------------

struct SubsetSpec {
  std::size_t size = 0;
  std::vector<std::size_t> mandatory;
  std::uint64_t seed = 0;
};

namespace detail {

/// Unbiased integer in [0, n) (Lemire's multiply-shift with rejection).
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  auto m = static_cast<unsigned __int128>(rng()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(rng()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace detail

/// Draws S_k: `size` distinct equation indices, all mandatory ones included,
/// the rest uniform over the remainder. Sorted ascending; deterministic in
/// (seed, iteration).
inline std::vector<std::size_t> sample_subset(std::size_t total, const SubsetSpec& spec, std::uint64_t iteration) {
  if (spec.size > total) throw std::invalid_argument("subset size exceeds number of equations");
  std::vector<std::size_t> mand = spec.mandatory;
  std::sort(mand.begin(), mand.end());
  if (std::adjacent_find(mand.begin(), mand.end()) != mand.end()) throw std::invalid_argument("duplicate mandatory index");
  if (!mand.empty() && mand.back() >= total) throw std::invalid_argument("mandatory index out of range");
  if (spec.size < mand.size()) throw std::invalid_argument("subset smaller than its mandatory set");

  std::vector<std::size_t> out;
  if (spec.size == total) {
    out.resize(total);
    for (std::size_t i = 0; i < total; ++i) out[i] = i;
    return out;
  }

  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32), static_cast<std::uint32_t>(iteration),
                    static_cast<std::uint32_t>(iteration >> 32)};
  std::mt19937_64 rng(seq);

  // Floyd's algorithm over the remainder [0, total - |mand|).
  const std::uint64_t rest = total - mand.size();
  const std::uint64_t k = spec.size - mand.size();
  std::unordered_set<std::uint64_t> picked;
  picked.reserve(static_cast<std::size_t>(k) * 2);
  for (std::uint64_t j = rest - k; j < rest; ++j) {
    const std::uint64_t t = detail::uniform_below(rng, j + 1);
    if (!picked.insert(t).second) picked.insert(j);
  }

  std::vector<std::uint64_t> rel(picked.begin(), picked.end());
  std::sort(rel.begin(), rel.end());
  out.reserve(spec.size);
  // Map remainder positions to equation indices by skipping mandatory ones.
  std::size_t skip = 0;
  for (const auto r : rel) {
    std::size_t idx = static_cast<std::size_t>(r) + skip;
    while (skip < mand.size() && mand[skip] <= idx) {
      ++skip;
      idx = static_cast<std::size_t>(r) + skip;
    }
    out.push_back(idx);
  }
  out.insert(out.end(), mand.begin(), mand.end());
  std::sort(out.begin(), out.end());
  return out;
}

// -- engine -----------------------------------------------------------------

namespace detail {

/// Lower triangle of J^T J.
inline Eigen::MatrixXd normal_matrix(const Eigen::MatrixXd& J) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(J.cols(), J.cols());
  A.selfadjointView<Eigen::Lower>().rankUpdate(J.transpose());
  return A;
}

inline Eigen::MatrixXd normal_matrix(const Eigen::SparseMatrix<double>& J) {
  const Eigen::SparseMatrix<double> JtJ = J.transpose() * J;
  return Eigen::MatrixXd(JtJ);
}

inline bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

template <class BeginIteration, class ResidualFn, class JacobianFn>
SolveResult lm_engine(BeginIteration&& begin_iteration, ResidualFn&& residual_fn, JacobianFn&& jacobian_fn, Eigen::VectorXd x, const LMConfig& cfg,
                      const std::function<double(const Eigen::VectorXd&)>& test_fn, bool resample) {
  cfg.validate();
  SolveResult out;
  auto& trace = out.trace;
  double lambda = cfg.lambda0;

  auto record = [&](int iter, double batch_mse, double step_norm, bool final) {
    TraceRecord r{iter, lambda, batch_mse, std::nullopt, step_norm};
    if (test_fn && (final || (cfg.test_every > 0 && iter % cfg.test_every == 0))) r.full_mse = test_fn(x);
    trace.records.push_back(r);
  };

  begin_iteration(0);
  Eigen::VectorXd r = residual_fn(x);
  if (!all_finite(r) || !x.allFinite()) throw SolverFailure("non-finite residual at the initial point", x, trace);
  double cost = r.squaredNorm();
  const auto batch_mse = [&](double c, Eigen::Index m) { return m > 0 ? c / static_cast<double>(m) : 0.0; };
  record(0, batch_mse(cost, r.size()), 0.0, cfg.max_iter == 0);

  trace.reason = Termination::max_iter;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    if (it > 1 && resample) {
      begin_iteration(static_cast<std::uint64_t>(it - 1));
      r = residual_fn(x);
      cost = r.squaredNorm();
    }
    if (batch_mse(cost, r.size()) <= cfg.residual_tol) {
      trace.reason = Termination::residual_tol;
      break;
    }

    const auto J = jacobian_fn(x);
    const Eigen::MatrixXd A = normal_matrix(J);
    const Eigen::VectorXd g = J.transpose() * r;

    bool accepted = false;
    bool converged = false;
    double step_norm = 0.0;
    double new_cost = cost;
    for (int rej = 0;; ++rej) {
      Eigen::MatrixXd M = A;
      M.diagonal().array() += lambda;
      Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(M);
      if (llt.info() == Eigen::Success) {
        const Eigen::VectorXd dx = llt.solve(g);
        step_norm = dx.norm();
        if (dx.allFinite() && step_norm <= cfg.step_tol * (x.norm() + cfg.step_tol)) {
          converged = true;
          break;
        }
        Eigen::VectorXd x_new = x - dx;
        Eigen::VectorXd r_new = residual_fn(x_new);
        const double c_new = r_new.squaredNorm();
        if (std::isfinite(c_new) && c_new < cost) {
          x = std::move(x_new);
          r = std::move(r_new);
          new_cost = c_new;
          accepted = true;
          if (!cfg.fixed_damping) lambda = std::max(lambda * cfg.down_factor, cfg.lambda_min);
          break;
        }
      }
      if (cfg.fixed_damping || rej + 1 >= cfg.max_rejections) break;
      lambda *= cfg.up_factor;
      if (lambda > cfg.lambda_max) throw SolverFailure("damping exceeded its upper bound", x, trace);
    }

    if (converged) {
      trace.reason = Termination::step_tol;
      break;
    }
    if (accepted) cost = new_cost;
    const bool last = it == cfg.max_iter;
    record(it, batch_mse(cost, r.size()), accepted ? step_norm : 0.0, last);
    if (!accepted && !resample) {
      trace.reason = Termination::stalled;
      break;
    }
  }
  if (test_fn && !trace.records.back().full_mse) trace.records.back().full_mse = test_fn(x);
  out.x = std::move(x);
  return out;
}

}  // namespace detail

/// Full LM solve. `jacobian_fn` may return a dense or a sparse matrix.
template <class ResidualFn, class JacobianFn>
SolveResult lm_solve(ResidualFn&& residual_fn, JacobianFn&& jacobian_fn, const Eigen::VectorXd& x0, const LMConfig& cfg) {
  return detail::lm_engine([](std::uint64_t) {}, std::forward<ResidualFn>(residual_fn), std::forward<JacobianFn>(jacobian_fn), x0, cfg, {}, false);
}

/// Stochastic LM: each iteration redraws S_k and takes the restricted step.
/// Callbacks receive the current subset. `test_fn` (optional) returns the
/// full-system MSE recorded every cfg.test_every iterations and at the end.
template <class SubsetResidualFn, class SubsetJacobianFn>
SolveResult stochastic_lm_solve(SubsetResidualFn&& residual_fn, SubsetJacobianFn&& jacobian_fn, const Eigen::VectorXd& x0, const LMConfig& cfg,
                                std::size_t total, const SubsetSpec& sub, const std::function<double(const Eigen::VectorXd&)>& test_fn = {}) {
  std::vector<std::size_t> subset;
  auto begin = [&](std::uint64_t k) { subset = sample_subset(total, sub, k); };
  auto res = [&](const Eigen::VectorXd& x) { return residual_fn(x, subset); };
  auto jac = [&](const Eigen::VectorXd& x) { return jacobian_fn(x, subset); };
  return detail::lm_engine(begin, res, jac, x0, cfg, test_fn, sub.size < total);
}

}  // namespace lpinn

#endif  // LPINN_SOLVER_HPP
