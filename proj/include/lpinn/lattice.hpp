#ifndef LPINN_LATTICE_HPP
#define LPINN_LATTICE_HPP

// Discrete Allen-Cahn system on d-dimensional cubic lattices with zero
// Dirichlet boundaries:
//
//   f_i(u, mu) = mu u_i + c Lap_d u_i + 2 u_i^3 - u_i^5,   i in A,
//
// where A = {2..n-1}^d is the interior and Lap_d is the (2d+1)-point stencil.
// Interior points are enumerated lexicographically (first coordinate most
// significant); every vector over A and every |A|x|A| matrix uses that order.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lpinn {

inline constexpr int kMaxDim = 5;

enum class Centering { site, bond };

inline std::string to_string(Centering c) { return c == Centering::site ? "site" : "bond"; }

inline Centering centering_from_string(const std::string& s) {
  if (s == "site") return Centering::site;
  if (s == "bond") return Centering::bond;
  throw std::invalid_argument("unknown centering '" + s + "' (expected site|bond)");
}

/// 1-based lattice coordinates, one entry per axis.
using MultiIndex = std::vector<int>;

struct ModelParams {
  double mu = 0.0;
};

class LatticeSpec {
 public:
  LatticeSpec() = default;

  int dim() const { return d_; }
  int half_width() const { return m_; }
  Centering centering() const { return centering_; }
  double coupling() const { return c_; }
  /// Points per axis, boundary included.
  int size() const { return n_; }

  std::size_t full_count() const { return full_count_; }
  std::size_t interior_count() const { return interior_to_full_.size(); }

  /// Row-major stride of `axis` in the full lattice.
  std::size_t stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }

  std::size_t interior_to_full(std::size_t a) const { return interior_to_full_[a]; }

  /// Position of a full-lattice point in A, or -1 for boundary points.
  std::ptrdiff_t full_to_interior(std::size_t f) const { return full_to_interior_[f]; }

  bool on_boundary(std::size_t f) const { return full_to_interior_[f] < 0; }

  std::size_t full_linear(const MultiIndex& idx) const {
    if (static_cast<int>(idx.size()) != d_) throw std::invalid_argument("multi-index has wrong dimension");
    std::size_t f = 0;
    for (int k = 0; k < d_; ++k) {
      const int i = idx[static_cast<std::size_t>(k)];
      if (i < 1 || i > n_) throw std::invalid_argument("multi-index out of range");
      f = f * static_cast<std::size_t>(n_) + static_cast<std::size_t>(i - 1);
    }
    return f;
  }

  MultiIndex full_multi(std::size_t f) const {
    MultiIndex idx(static_cast<std::size_t>(d_));
    for (int k = d_ - 1; k >= 0; --k) {
      idx[static_cast<std::size_t>(k)] = static_cast<int>(f % static_cast<std::size_t>(n_)) + 1;
      f /= static_cast<std::size_t>(n_);
    }
    return idx;
  }

  MultiIndex interior_multi(std::size_t a) const { return full_multi(interior_to_full(a)); }

  /// Interior position of the lattice centre (m,...,m) for site-centred
  /// lattices; for bond-centred lattices the lower of the two middle sites.
  std::size_t center_interior() const {
    const int mid = centering_ == Centering::site ? m_ : n_ / 2;
    return static_cast<std::size_t>(full_to_interior(full_linear(MultiIndex(static_cast<std::size_t>(d_), mid))));
  }

  friend LatticeSpec build_spec(int d, int m, Centering centering, double c);

 private:
  int d_ = 1;
  int m_ = 2;
  Centering centering_ = Centering::site;
  double c_ = 1.0;
  int n_ = 3;
  std::size_t full_count_ = 0;
  std::vector<std::size_t> strides_;
  std::vector<std::size_t> interior_to_full_;
  std::vector<std::ptrdiff_t> full_to_interior_;
};

/// n = 2m-1 for site-centred, n = 2m for bond-centred lattices.
inline LatticeSpec build_spec(int d, int m, Centering centering, double c) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("lattice dimension must be in 1..5");
  if (m < 2) throw std::invalid_argument("lattice half-width m must be >= 2");
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("coupling c must be positive");

  LatticeSpec s;
  s.d_ = d;
  s.m_ = m;
  s.centering_ = centering;
  s.c_ = c;
  s.n_ = centering == Centering::site ? 2 * m - 1 : 2 * m;

  const auto n = static_cast<std::size_t>(s.n_);
  s.strides_.assign(static_cast<std::size_t>(d), 1);
  for (int k = d - 2; k >= 0; --k) s.strides_[static_cast<std::size_t>(k)] = s.strides_[static_cast<std::size_t>(k) + 1] * n;
  s.full_count_ = s.strides_[0] * n;

  s.full_to_interior_.assign(s.full_count_, -1);
  std::size_t interior = 1;
  for (int k = 0; k < d; ++k) interior *= n - 2;
  s.interior_to_full_.reserve(interior);

  std::vector<std::size_t> coord(static_cast<std::size_t>(d), 0);
  for (std::size_t f = 0; f < s.full_count_; ++f) {
    bool inside = true;
    for (std::size_t k = 0; k < coord.size(); ++k) inside = inside && coord[k] > 0 && coord[k] + 1 < n;
    if (inside) {
      s.full_to_interior_[f] = static_cast<std::ptrdiff_t>(s.interior_to_full_.size());
      s.interior_to_full_.push_back(f);
    }
    for (int k = d - 1; k >= 0; --k) {
      if (++coord[static_cast<std::size_t>(k)] < n) break;
      coord[static_cast<std::size_t>(k)] = 0;
    }
  }
  return s;
}

/// Values on the full lattice {1..n}^d; boundary entries are stored as zeros.
struct StateField {
  LatticeSpec spec;
  std::vector<double> values;

  StateField() = default;
  explicit StateField(LatticeSpec s) : spec(std::move(s)), values(spec.full_count(), 0.0) {}

  double& at(const MultiIndex& idx) { return values[spec.full_linear(idx)]; }
  double at(const MultiIndex& idx) const { return values[spec.full_linear(idx)]; }

  Eigen::VectorXd interior() const {
    Eigen::VectorXd u(static_cast<Eigen::Index>(spec.interior_count()));
    for (std::size_t a = 0; a < spec.interior_count(); ++a) u[static_cast<Eigen::Index>(a)] = values[spec.interior_to_full(a)];
    return u;
  }

  static StateField from_interior(const LatticeSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& u) {
    if (static_cast<std::size_t>(u.size()) != spec.interior_count()) throw std::invalid_argument("interior vector has wrong length");
    StateField s(spec);
    for (std::size_t a = 0; a < spec.interior_count(); ++a) s.values[spec.interior_to_full(a)] = u[static_cast<Eigen::Index>(a)];
    return s;
  }

  bool boundary_is_zero() const {
    for (std::size_t f = 0; f < values.size(); ++f)
      if (spec.on_boundary(f) && values[f] != 0.0) return false;
    return true;
  }
};

namespace detail {

inline double stencil_sum(const LatticeSpec& spec, std::span<const double> full, std::size_t f) {
  double s = 0.0;
  for (int k = 0; k < spec.dim(); ++k) {
    const std::size_t st = spec.stride(k);
    s += full[f + st] + full[f - st];
  }
  return s;
}

inline double reaction(double mu, double u) {
  const double u2 = u * u;
  return mu * u + 2.0 * u2 * u - u2 * u2 * u;
}

inline double reaction_derivative(double mu, double u) {
  const double u2 = u * u;
  return mu + 6.0 * u2 - 5.0 * u2 * u2;
}

}  // namespace detail

/// Unweighted discrete Laplacian at an interior index.
inline double laplacian_at(const StateField& state, const MultiIndex& idx) {
  const auto f = state.spec.full_linear(idx);
  if (state.spec.on_boundary(f)) throw std::invalid_argument("laplacian_at: index lies on the boundary");
  return detail::stencil_sum(state.spec, state.values, f) - 2.0 * state.spec.dim() * state.values[f];
}

/// Residual over A from full-lattice values (boundary entries must be zero).
inline Eigen::VectorXd residual(const LatticeSpec& spec, std::span<const double> full, const ModelParams& params) {
  const double c = spec.coupling();
  const double diag = 2.0 * spec.dim();
  Eigen::VectorXd r(static_cast<Eigen::Index>(spec.interior_count()));
  for (std::size_t a = 0; a < spec.interior_count(); ++a) {
    const std::size_t f = spec.interior_to_full(a);
    const double u = full[f];
    r[static_cast<Eigen::Index>(a)] = detail::reaction(params.mu, u) + c * (detail::stencil_sum(spec, full, f) - diag * u);
  }
  return r;
}

inline Eigen::VectorXd residual(const LatticeSpec& spec, const StateField& state, const ModelParams& params) {
  return residual(spec, std::span<const double>(state.values), params);
}

/// df/du over A. Boundary neighbours are pinned to zero and drop out.
inline Eigen::SparseMatrix<double> state_jacobian(const LatticeSpec& spec, std::span<const double> full, const ModelParams& params) {
  const auto n_int = spec.interior_count();
  const double c = spec.coupling();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n_int * static_cast<std::size_t>(2 * spec.dim() + 1));
  for (std::size_t a = 0; a < n_int; ++a) {
    const std::size_t f = spec.interior_to_full(a);
    const auto row = static_cast<int>(a);
    trip.emplace_back(row, row, detail::reaction_derivative(params.mu, full[f]) - 2.0 * spec.dim() * c);
    for (int k = 0; k < spec.dim(); ++k) {
      for (const std::size_t g : {f + spec.stride(k), f - spec.stride(k)}) {
        const auto b = spec.full_to_interior(g);
        if (b >= 0) trip.emplace_back(row, static_cast<int>(b), c);
      }
    }
  }
  Eigen::SparseMatrix<double> J(static_cast<Eigen::Index>(n_int), static_cast<Eigen::Index>(n_int));
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

inline Eigen::SparseMatrix<double> state_jacobian(const LatticeSpec& spec, const StateField& state, const ModelParams& params) {
  return state_jacobian(spec, std::span<const double>(state.values), params);
}

/// Operator of the linear stability problem H v = mu v + c Lap v + 6u^2 v - 5u^4 v.
/// For this model it coincides with the state Jacobian.
inline Eigen::SparseMatrix<double> linearized_operator(const LatticeSpec& spec, const StateField& state, const ModelParams& params) {
  return state_jacobian(spec, state, params);
}

/// 1 / (1 + sqrt(1 + mu)).
inline double norm_prefactor(double mu) {
  if (mu < -1.0 || std::isnan(mu)) throw std::domain_error("solution norm requires mu >= -1");
  return 1.0 / (1.0 + std::sqrt(1.0 + mu));
}

/// d/dmu of norm_prefactor; unbounded at mu = -1.
inline double norm_prefactor_derivative(double mu) {
  if (mu <= -1.0 || std::isnan(mu)) throw std::domain_error("norm prefactor derivative requires mu > -1");
  const double s = std::sqrt(1.0 + mu);
  return -1.0 / (2.0 * s * (1.0 + s) * (1.0 + s));
}

/// ||u|| = sum_i u_i^2 / (1 + sqrt(1 + mu)) over the full lattice.
inline double solution_norm(const LatticeSpec& /*spec*/, const StateField& state, const ModelParams& params) {
  const double pre = norm_prefactor(params.mu);
  double s = 0.0;
  for (const double v : state.values) s += v * v;
  return pre * s;
}

// Text format: header "d n centering c mu", then one row "i1 ... id value" per
// full-lattice point in lexicographic order, 17 significant digits.

inline void write_state(std::ostream& os, const StateField& state, double mu) {
  const auto& s = state.spec;
  os << std::setprecision(17);
  os << s.dim() << ' ' << s.size() << ' ' << to_string(s.centering()) << ' ' << s.coupling() << ' ' << mu << '\n';
  for (std::size_t f = 0; f < s.full_count(); ++f) {
    for (const int i : s.full_multi(f)) os << i << ' ';
    os << state.values[f] << '\n';
  }
}

struct LoadedState {
  StateField state;
  double mu = 0.0;
};

inline LoadedState read_state(std::istream& is) {
  int d = 0, n = 0;
  std::string cent;
  double c = 0.0, mu = 0.0;
  if (!(is >> d >> n >> cent >> c >> mu)) throw std::runtime_error("state file: malformed header");
  const Centering centering = centering_from_string(cent);
  const int m = centering == Centering::site ? (n + 1) / 2 : n / 2;
  LoadedState out{StateField(build_spec(d, m, centering, c)), mu};
  if (out.state.spec.size() != n) throw std::runtime_error("state file: size inconsistent with centering");
  MultiIndex idx(static_cast<std::size_t>(d));
  for (std::size_t row = 0; row < out.state.spec.full_count(); ++row) {
    for (auto& i : idx)
      if (!(is >> i)) throw std::runtime_error("state file: truncated");
    double v = 0.0;
    if (!(is >> v)) throw std::runtime_error("state file: truncated");
    out.state.at(idx) = v;
  }
  if (!out.state.boundary_is_zero()) throw std::runtime_error("state file: nonzero boundary value");
  return out;
}

}  // namespace lpinn

#endif  // LPINN_LATTICE_HPP
