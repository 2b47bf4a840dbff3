#ifndef LPINN_NETWORK_HPP
#define LPINN_NETWORK_HPP

// Shallow network u(x) = s(s(x W1 + B1) W2 + B2) W3 + B3 with the Gaussian
// activation s(z) = exp(-z^2/2), an optional boundary mask prod_k sin(pi x_k)
// and an optional absolute value on the output.
//
// Flat weight layout: W1 (d_in x h1, row-major), B1, W2 (h1 x h2, row-major),
// B2, W3 (h2), B3. An augmented vector carries one extra trailing scalar
// (mu during continuation, lambda in eigen mode) that the network ignores.

#include "lpinn/lattice.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

namespace lpinn {

struct NetworkShape {
  int d_in = 1;
  int h1 = 4;
  int h2 = 4;

  Eigen::Index parameter_count() const { return (d_in + 1) * h1 + (h1 + 1) * h2 + (h2 + 1); }

  Eigen::Index w1_offset() const { return 0; }
  Eigen::Index b1_offset() const { return d_in * h1; }
  Eigen::Index w2_offset() const { return b1_offset() + h1; }
  Eigen::Index b2_offset() const { return w2_offset() + h1 * h2; }
  Eigen::Index w3_offset() const { return b2_offset() + h2; }
  Eigen::Index b3_offset() const { return w3_offset() + h2; }

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

inline NetworkShape make_shape(int d_in, int h1, int h2, int d_out = 1) {
  if (d_in < 1 || d_in > kMaxDim) throw std::invalid_argument("network input width must be in 1..5");
  if (h1 < 1 || h2 < 1) throw std::invalid_argument("hidden layer widths must be positive");
  if (d_out != 1) throw std::invalid_argument("network output width must be 1");
  return NetworkShape{d_in, h1, h2};
}

inline std::string to_string(const NetworkShape& s) {
  return std::to_string(s.d_in) + "," + std::to_string(s.h1) + "," + std::to_string(s.h2) + ",1";
}

struct WeightVector {
  Eigen::VectorXd values;
  bool augmented = false;

  Eigen::Index network_size() const { return values.size() - (augmented ? 1 : 0); }
  auto network() const { return values.head(network_size()); }
  auto network() { return values.head(network_size()); }

  double extra() const {
    if (!augmented) throw std::logic_error("weight vector has no augmented slot");
    return values[values.size() - 1];
  }
  double& extra() {
    if (!augmented) throw std::logic_error("weight vector has no augmented slot");
    return values[values.size() - 1];
  }

  /// Copy with a trailing trainable scalar appended.
  WeightVector with_extra(double v) const {
    WeightVector w{Eigen::VectorXd(network_size() + 1), true};
    w.values.head(network_size()) = network();
    w.values[network_size()] = v;
    return w;
  }

  WeightVector without_extra() const { return WeightVector{network(), false}; }
};

enum class InputTransform { raw, normalized, fold_sorted };

inline std::string to_string(InputTransform t) {
  switch (t) {
    case InputTransform::raw: return "raw";
    case InputTransform::normalized: return "normalized";
    case InputTransform::fold_sorted: return "fold_sorted";
  }
  return "?";
}

inline InputTransform input_transform_from_string(const std::string& s) {
  if (s == "raw") return InputTransform::raw;
  if (s == "normalized") return InputTransform::normalized;
  if (s == "fold_sorted") return InputTransform::fold_sorted;
  throw std::invalid_argument("unknown input transform '" + s + "'");
}

struct InputMode {
  InputTransform transform = InputTransform::fold_sorted;
  bool masked = false;
  bool absolute = false;

  void validate() const {
    if (masked && transform == InputTransform::raw) throw std::invalid_argument("boundary mask requires normalized coordinates");
  }
};

// -- activation -------------------------------------------------------------

inline double gaussian(double z) { return std::exp(-0.5 * z * z); }
inline double gaussian_derivative(double z) { return -z * gaussian(z); }

// -- initialization ---------------------------------------------------------

namespace detail {

/// Uniform double in [0,1) from the top 53 bits; platform independent.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

/// i.i.d. uniform on [-1, 1], deterministic in (shape, seed).
inline WeightVector init_weights(const NetworkShape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  WeightVector w{Eigen::VectorXd(shape.parameter_count()), false};
  for (Eigen::Index i = 0; i < w.values.size(); ++i) w.values[i] = 2.0 * detail::unit_uniform(rng) - 1.0;
  return w;
}

// -- input transforms -------------------------------------------------------

/// Maps a lattice index to network coordinates. Normalized: (i-1)/(n-1).
/// Fold-sorted: min(i-1, n-i)/(n-1) per axis, sorted ascending, so every
/// reflection/permutation of an index yields bitwise identical coordinates.
inline Eigen::VectorXd transform_index(const LatticeSpec& spec, const MultiIndex& idx, InputTransform mode) {
  const int d = spec.dim();
  const int n = spec.size();
  if (static_cast<int>(idx.size()) != d) throw std::invalid_argument("transform_index: wrong index dimension");
  Eigen::VectorXd t(d);
  const double span = static_cast<double>(n - 1);
  for (int k = 0; k < d; ++k) {
    const int i = idx[static_cast<std::size_t>(k)];
    if (i < 1 || i > n) throw std::invalid_argument("transform_index: index out of range");
    switch (mode) {
      case InputTransform::raw: t[k] = static_cast<double>(i); break;
      case InputTransform::normalized: t[k] = static_cast<double>(i - 1) / span; break;
      case InputTransform::fold_sorted: t[k] = static_cast<double>(std::min(i - 1, n - i)) / span; break;
    }
  }
  if (mode == InputTransform::fold_sorted) std::sort(t.data(), t.data() + d);
  return t;
}

/// Transformed coordinates of every full-lattice point (row f = full index f).
inline Eigen::MatrixXd transform_lattice(const LatticeSpec& spec, InputTransform mode) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(spec.full_count()), spec.dim());
  for (std::size_t f = 0; f < spec.full_count(); ++f) X.row(static_cast<Eigen::Index>(f)) = transform_index(spec, spec.full_multi(f), mode).transpose();
  return X;
}

// -- evaluation -------------------------------------------------------------

struct NetworkEval {
  Eigen::VectorXd output;    // one value per batch row
  Eigen::MatrixXd jacobian;  // batch x n_W, empty unless requested
};

/// Boundary mask prod_k sin(pi t_k) for each row of normalized coordinates,
/// evaluated as sin(pi min(t, 1 - t)) so it is exactly 0 at t = 1 as well.
inline Eigen::VectorXd mask_values(const Eigen::Ref<const Eigen::MatrixXd>& coords) {
  Eigen::VectorXd m = Eigen::VectorXd::Ones(coords.rows());
  for (Eigen::Index k = 0; k < coords.cols(); ++k) m.array() *= (std::numbers::pi * coords.col(k).array().min(1.0 - coords.col(k).array())).sin();
  return m;
}

namespace detail {

/// Forward pass over a batch with the quantities backpropagation needs.
struct ForwardPass {
  Eigen::MatrixXd Z1, A1, Z2, A2;
  Eigen::VectorXd raw;        // network output before mask and |.|
  Eigen::VectorXd mask;       // empty unless masked
  Eigen::VectorXd row_scale;  // d output / d raw, empty when identically 1
  Eigen::MatrixXd D1, D2;     // d raw / d Z1, d raw / d Z2 (only with sensitivities)
};

/// `mask` optionally supplies precomputed mask values for the batch rows.
inline ForwardPass forward_pass(const NetworkShape& shape, const Eigen::Ref<const Eigen::VectorXd>& weights, const Eigen::Ref<const Eigen::MatrixXd>& coords,
                                const InputMode& mode, bool sensitivities, const Eigen::VectorXd* mask = nullptr) {
  mode.validate();
  if (coords.cols() != shape.d_in) throw std::invalid_argument("coordinate width does not match network input");
  if (weights.size() < shape.parameter_count()) throw std::invalid_argument("weight vector too short for network shape");

  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMat> W1(weights.data() + shape.w1_offset(), shape.d_in, shape.h1);
  const auto B1 = weights.segment(shape.b1_offset(), shape.h1);
  const Eigen::Map<const RowMat> W2(weights.data() + shape.w2_offset(), shape.h1, shape.h2);
  const auto B2 = weights.segment(shape.b2_offset(), shape.h2);
  const auto W3 = weights.segment(shape.w3_offset(), shape.h2);
  const double B3 = weights[shape.b3_offset()];

  const Eigen::Index batch = coords.rows();
  ForwardPass fp;
  fp.Z1 = coords * W1;
  fp.Z1.rowwise() += B1.transpose();
  fp.A1 = (-0.5 * fp.Z1.array().square()).exp().matrix();
  fp.Z2 = fp.A1 * W2;
  fp.Z2.rowwise() += B2.transpose();
  fp.A2 = (-0.5 * fp.Z2.array().square()).exp().matrix();
  fp.raw = fp.A2 * W3;
  fp.raw.array() += B3;

  if (mode.masked) {
    if (mask) {
      if (mask->size() != batch) throw std::invalid_argument("mask length does not match the batch");
      fp.mask = *mask;
    } else {
      fp.mask = mask_values(coords);
    }
  }
  if (!sensitivities) return fp;

  if (mode.masked || mode.absolute) {
    fp.row_scale = mode.masked ? fp.mask : Eigen::VectorXd::Ones(batch);
    if (mode.absolute) {
      for (Eigen::Index b = 0; b < batch; ++b) {
        const double y = mode.masked ? fp.raw[b] * fp.mask[b] : fp.raw[b];
        fp.row_scale[b] *= y > 0.0 ? 1.0 : (y < 0.0 ? -1.0 : 0.0);
      }
    }
  }
  fp.D2 = ((-fp.Z2.array() * fp.A2.array()).rowwise() * W3.transpose().array()).matrix();
  fp.D1 = ((-fp.Z1.array() * fp.A1.array()) * (fp.D2 * W2.transpose()).array()).matrix();
  return fp;
}

/// Calls f(j, column) for every weight index j with the column of
/// d output / d W_j over the batch (mask and sign included). `col` is scratch.
template <class F>
void for_each_jacobian_column(const NetworkShape& shape, const ForwardPass& fp, const Eigen::Ref<const Eigen::MatrixXd>& coords, Eigen::VectorXd& col, F&& f) {
  const Eigen::Index batch = coords.rows();
  col.resize(batch);
  auto emit = [&](Eigen::Index j) {
    if (fp.row_scale.size()) col.array() *= fp.row_scale.array();
    f(j, col);
  };
  for (int k = 0; k < shape.d_in; ++k)
    for (int i = 0; i < shape.h1; ++i) {
      col = coords.col(k).cwiseProduct(fp.D1.col(i));
      emit(shape.w1_offset() + k * shape.h1 + i);
    }
  for (int i = 0; i < shape.h1; ++i) {
    col = fp.D1.col(i);
    emit(shape.b1_offset() + i);
  }
  for (int i = 0; i < shape.h1; ++i)
    for (int j = 0; j < shape.h2; ++j) {
      col = fp.A1.col(i).cwiseProduct(fp.D2.col(j));
      emit(shape.w2_offset() + i * shape.h2 + j);
    }
  for (int j = 0; j < shape.h2; ++j) {
    col = fp.D2.col(j);
    emit(shape.b2_offset() + j);
  }
  for (int j = 0; j < shape.h2; ++j) {
    col = fp.A2.col(j);
    emit(shape.w3_offset() + j);
  }
  col.setOnes();
  emit(shape.b3_offset());
}

inline Eigen::VectorXd finish_output(const ForwardPass& fp, const InputMode& mode) {
  Eigen::VectorXd y = fp.raw;
  if (mode.masked) y.array() *= fp.mask.array();
  if (mode.absolute) y = y.cwiseAbs();
  return y;
}

}  // namespace detail

/// Batched forward pass over rows of `coords`; optionally with the exact
/// weight Jacobian (mask factor and |.| sign included, subgradient 0 at 0).
inline NetworkEval evaluate(const NetworkShape& shape, const Eigen::Ref<const Eigen::VectorXd>& weights, const Eigen::Ref<const Eigen::MatrixXd>& coords,
                            const InputMode& mode, bool with_jacobian, const Eigen::VectorXd* mask = nullptr) {
  NetworkEval ev;
  constexpr Eigen::Index kChunk = 4096;
  if (!with_jacobian && coords.rows() > kChunk) {
    // Large forward-only batches go in cache-sized chunks.
    ev.output.resize(coords.rows());
    for (Eigen::Index r0 = 0; r0 < coords.rows(); r0 += kChunk) {
      const Eigen::Index nr = std::min(kChunk, coords.rows() - r0);
      const Eigen::VectorXd part = mask ? Eigen::VectorXd(mask->segment(r0, nr)) : Eigen::VectorXd();
      const detail::ForwardPass fp = detail::forward_pass(shape, weights, coords.middleRows(r0, nr), mode, false, mask ? &part : nullptr);
      ev.output.segment(r0, nr) = detail::finish_output(fp, mode);
    }
    return ev;
  }
  const detail::ForwardPass fp = detail::forward_pass(shape, weights, coords, mode, with_jacobian, mask);
  ev.output = detail::finish_output(fp, mode);
  if (with_jacobian) {
    ev.jacobian.resize(coords.rows(), shape.parameter_count());
    Eigen::VectorXd col;
    detail::for_each_jacobian_column(shape, fp, coords, col, [&](Eigen::Index j, const Eigen::VectorXd& c) { ev.jacobian.col(j) = c; });
  }
  return ev;
}

/// Network output plus P * (d output / d W) for a sparse row combination P,
/// without forming the batch Jacobian.
template <class Sparse>
NetworkEval evaluate_combined(const NetworkShape& shape, const Eigen::Ref<const Eigen::VectorXd>& weights, const Eigen::Ref<const Eigen::MatrixXd>& coords,
                              const InputMode& mode, const Sparse& P) {
  if (P.cols() != coords.rows()) throw std::invalid_argument("combination matrix does not match the batch");
  const detail::ForwardPass fp = detail::forward_pass(shape, weights, coords, mode, true);
  NetworkEval ev;
  ev.output = detail::finish_output(fp, mode);
  ev.jacobian.resize(P.rows(), shape.parameter_count());
  Eigen::VectorXd col;
  detail::for_each_jacobian_column(shape, fp, coords, col, [&](Eigen::Index j, const Eigen::VectorXd& c) { ev.jacobian.col(j) = P * c; });
  return ev;
}

inline double forward(const NetworkShape& shape, const WeightVector& w, const Eigen::Ref<const Eigen::VectorXd>& coords, const InputMode& mode) {
  const Eigen::MatrixXd X = coords.transpose();
  return evaluate(shape, w.values, X, mode, false).output[0];
}

inline Eigen::MatrixXd weight_jacobian(const NetworkShape& shape, const WeightVector& w, const Eigen::Ref<const Eigen::MatrixXd>& coords, const InputMode& mode) {
  return evaluate(shape, w.values, coords, mode, true).jacobian;
}

// -- serialization ----------------------------------------------------------

// Header "shape d_in h1 h2 1 augmented 0|1", then one value per line.

inline void write_weights(std::ostream& os, const NetworkShape& shape, const WeightVector& w) {
  os << "shape " << shape.d_in << ' ' << shape.h1 << ' ' << shape.h2 << " 1 augmented " << (w.augmented ? 1 : 0) << '\n';
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < w.values.size(); ++i) os << w.values[i] << '\n';
}

struct LoadedWeights {
  NetworkShape shape;
  WeightVector weights;
};

inline LoadedWeights read_weights(std::istream& is) {
  std::string tag, aug_tag;
  int d_in = 0, h1 = 0, h2 = 0, d_out = 0, aug = 0;
  if (!(is >> tag >> d_in >> h1 >> h2 >> d_out >> aug_tag >> aug) || tag != "shape" || aug_tag != "augmented")
    throw std::runtime_error("weights file: malformed header");
  LoadedWeights out{make_shape(d_in, h1, h2, d_out), {}};
  out.weights.augmented = aug != 0;
  out.weights.values.resize(out.shape.parameter_count() + (out.weights.augmented ? 1 : 0));
  for (Eigen::Index i = 0; i < out.weights.values.size(); ++i)
    if (!(is >> out.weights.values[i])) throw std::runtime_error("weights file: truncated");
  return out;
}

}  // namespace lpinn

#endif  // LPINN_NETWORK_HPP
