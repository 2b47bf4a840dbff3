#ifndef LPINN_CONFIG_HPP
#define LPINN_CONFIG_HPP

// Run configuration: plain text, one `key = value` per line, grouped under
// `[section]` headers. `#` starts a comment. Keys may also be given fully
// qualified (`lm.max_iter = 500`) before any header. Unknown keys and
// malformed values are errors.
//
// Defaults depend on lattice.dim and are applied before the explicit keys,
// so `[lattice] dim = 3` alone selects the three-dimensional setup.

#include "lpinn/continuation.hpp"
#include "lpinn/lattice.hpp"
#include "lpinn/network.hpp"
#include "lpinn/pinn.hpp"
#include "lpinn/solver.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lpinn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // [lattice]
  int dim = 1;
  int m = 10;
  Centering centering = Centering::site;
  double c = 0.05;
  // [network]
  NetworkShape shape = make_shape(1, 4, 4);
  InputMode input;
  // [eigen]
  NetworkShape eigen_shape = make_shape(1, 4, 4);
  std::string eigen_method = "pinn";  // pinn | oracle | both
  int eigen_power_steps = 3000;
  int eigen_fresh_attempts = 2;
  int eigen_max_iter = 5000;
  // [lm]
  LMConfig lm;
  // [continuation]
  ContinuationParams cont;
  // [corrector]
  CorrectorOptions corrector;
  // [subset]
  std::size_t subset_size = 0;  // 0 = full system
  bool subset_center = true;
  // [seed]
  SeedOptions seed_opt;
  // [run]
  double mu = -0.1;
  std::uint64_t seed = 1;
  std::string out = "out";
  bool oracle = false;
  std::string annotate = "none";  // none | pinn | oracle
  std::string input_path;
  // [sweep]
  std::string sweep_kind = "alpha";  // alpha | gamma | beta | width
  std::vector<double> sweep_values;
  std::vector<double> sweep_beta1;
  std::vector<double> sweep_beta2;
  std::vector<NetworkShape> sweep_shapes;
  int jobs = 0;  // 0 = hardware concurrency

  LatticeSpec spec() const { return build_spec(dim, m, centering, c); }

  PinnProblem problem(std::optional<double> fixed_mu) const { return make_problem(spec(), shape, input, fixed_mu); }

  std::optional<SubsetSpec> subset() const {
    if (subset_size == 0) return std::nullopt;
    const LatticeSpec s = spec();
    SubsetSpec sub;
    sub.size = subset_size;
    sub.seed = seed;
    if (subset_center) sub.mandatory.push_back(s.center_interior());
    return sub;
  }

  void validate() const;
};

/// Defaults for the given dimension: lattice sizes, shapes, continuation mode
/// and fixed-mu parameter of the reference experiments.
inline RunConfig dimension_defaults(int dim) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("lattice.dim must be in 1..5");
  RunConfig r;
  r.dim = dim;
  r.m = dim == 1 ? 10 : 8;
  r.shape = dim == 1 ? make_shape(1, 4, 4) : dim == 2 ? make_shape(2, 7, 7) : make_shape(dim, 10, 10);
  r.eigen_shape = dim == 1 ? make_shape(1, 4, 4) : make_shape(dim, 14, 14);
  r.mu = dim <= 2 ? -0.1 : -0.5;
  r.cont = dim == 1 ? ContinuationParams::norm_defaults() : ContinuationParams::arclength_defaults();
  r.lm.max_iter = 1000;
  r.lm.residual_tol = 1e-30;
  r.lm.step_tol = 1e-16;
  if (dim == 5) {
    r.subset_size = 1001;
    r.input.masked = true;
    r.lm.test_every = 100;
  }
  if (dim == 3)
    r.sweep_shapes = {make_shape(3, 5, 5), make_shape(3, 10, 5), make_shape(3, 10, 10), make_shape(3, 15, 10),
                      make_shape(3, 15, 15), make_shape(3, 20, 15), make_shape(3, 20, 20)};
  return r;
}

/// Grid used when sweep.values (or beta1/beta2) is left empty.
inline void fill_sweep_defaults(RunConfig& r) {
  if (r.sweep_values.empty()) {
    if (r.sweep_kind == "alpha") r.sweep_values = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4, 1e5};
    if (r.sweep_kind == "gamma") r.sweep_values = {10.0 / 100.0, 10.0 / 300.0, 10.0 / 1000.0, 10.0 / 3000.0};
  }
  if (r.sweep_kind == "beta") {
    if (r.sweep_beta1.empty()) r.sweep_beta1 = {250.0 / 40.0, 500.0 / 40.0, 1000.0 / 40.0};
    if (r.sweep_beta2.empty()) r.sweep_beta2 = {25.0, 50.0, 100.0};
  }
  if (r.sweep_kind == "width" && r.sweep_shapes.empty()) r.sweep_shapes = {r.shape};
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": not a number: '" + v + "'");
  return x;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int x = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": not an integer: '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": not a boolean: '" + v + "'");
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  for (const auto& t : split(v, ',')) out.push_back(parse_double(key, t));
  return out;
}

inline NetworkShape parse_shape(const std::string& key, const std::string& v) {
  const auto parts = split(v, ',');
  if (parts.size() != 4) throw ConfigError(key + ": shape must read d,h1,h2,1");
  const int d = parse_int<int>(key, parts[0]);
  const int h1 = parse_int<int>(key, parts[1]);
  const int h2 = parse_int<int>(key, parts[2]);
  const int o = parse_int<int>(key, parts[3]);
  if (o != 1 || d < 1 || d > kMaxDim || h1 < 1 || h2 < 1) throw ConfigError(key + ": invalid shape '" + v + "'");
  return make_shape(d, h1, h2);
}

inline std::string shape_text(const NetworkShape& s) {
  std::ostringstream os;
  os << s.d_in << ',' << s.h1 << ',' << s.h2 << ",1";
  return os.str();
}

template <class T>
std::string fmt(const T& v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string list_text(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

inline std::string choice(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed)
    if (v == a) return v;
  throw ConfigError(key + ": unexpected value '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto dbl = [](double RunConfig::*f) { return [f](RunConfig& r, const std::string& k, const std::string& v) { r.*f = parse_double(k, v); }; };
    t["lattice.dim"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.dim = parse_int<int>(k, v); };
    t["lattice.m"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.m = parse_int<int>(k, v); };
    t["lattice.centering"] = [](RunConfig& r, const std::string& k, const std::string& v) {
      try {
        r.centering = centering_from_string(v);
      } catch (const std::invalid_argument&) {
        throw ConfigError(k + ": expected site or bond");
      }
    };
    t["lattice.c"] = dbl(&RunConfig::c);
    t["network.shape"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.shape = parse_shape(k, v); };
    t["network.transform"] = [](RunConfig& r, const std::string& k, const std::string& v) {
      try {
        r.input.transform = input_transform_from_string(v);
      } catch (const std::invalid_argument&) {
        throw ConfigError(k + ": expected raw, normalized or fold_sorted");
      }
    };
    t["network.masked"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.input.masked = parse_bool(k, v); };
    t["eigen.shape"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.eigen_shape = parse_shape(k, v); };
    t["eigen.method"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.eigen_method = choice(k, v, {"pinn", "oracle", "both"}); };
    t["eigen.power_steps"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.eigen_power_steps = parse_int<int>(k, v); };
    t["eigen.fresh_attempts"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.eigen_fresh_attempts = parse_int<int>(k, v); };
    t["eigen.max_iter"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.eigen_max_iter = parse_int<int>(k, v); };
    t["lm.lambda0"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.lm.lambda0 = parse_double(k, v); };
    t["lm.up_factor"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.lm.up_factor = parse_double(k, v); };
    t["lm.down_factor"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.lm.down_factor = parse_double(k, v); };
    t["lm.max_iter"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.lm.max_iter = parse_int<int>(k, v); };
    t["lm.residual_tol"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.lm.residual_tol = parse_double(k, v); };
    t["lm.step_tol"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.lm.step_tol = parse_double(k, v); };
    t["lm.max_rejections"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.lm.max_rejections = parse_int<int>(k, v); };
    t["lm.test_every"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.lm.test_every = parse_int<int>(k, v); };
    t["continuation.alpha"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.cont.alpha = parse_double(k, v); };
    t["continuation.beta1"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.cont.beta1 = parse_double(k, v); };
    t["continuation.beta2"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.cont.beta2 = parse_double(k, v); };
    t["continuation.gamma"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.cont.gamma = parse_double(k, v); };
    t["continuation.delta"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.cont.delta = parse_double(k, v); };
    t["continuation.drop_sqrt"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.cont.drop_sqrt = parse_bool(k, v); };
    t["continuation.k_max"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.cont.k_max = parse_int<int>(k, v); };
    t["continuation.norm_target"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.cont.norm_target = parse_double(k, v); };
    t["continuation.mu_start"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.cont.mu_start = parse_double(k, v); };
    t["continuation.mu_offset"] = [](RunConfig& r, const std::string& k, const std::string& v) {
      if (v == "auto")
        r.cont.mu_offset.reset();
      else
        r.cont.mu_offset = parse_double(k, v);
    };
    t["corrector.max_iter"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.corrector.lm.max_iter = parse_int<int>(k, v); };
    t["corrector.accept_mse"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.corrector.accept_mse = parse_double(k, v); };
    t["corrector.accept_constraint"] = [](RunConfig& r, const std::string& k, const std::string& v) {
      r.corrector.accept_constraint = parse_double(k, v);
    };
    t["subset.size"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.subset_size = parse_int<std::size_t>(k, v); };
    t["subset.center"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.subset_center = parse_bool(k, v); };
    t["seed.amplitude"] = [](RunConfig& r, const std::string& k, const std::string& v) {
      if (v == "auto")
        r.seed_opt.amplitude.reset();
      else
        r.seed_opt.amplitude = parse_double(k, v);
    };
    t["seed.width"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.seed_opt.width = parse_double(k, v); };
    t["run.mu"] = dbl(&RunConfig::mu);
    t["run.seed"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.seed = parse_int<std::uint64_t>(k, v); };
    t["run.out"] = [](RunConfig& r, const std::string&, const std::string& v) { r.out = v; };
    t["run.oracle"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.oracle = parse_bool(k, v); };
    t["run.annotate"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.annotate = choice(k, v, {"none", "pinn", "oracle"}); };
    t["run.input"] = [](RunConfig& r, const std::string&, const std::string& v) { r.input_path = v; };
    t["sweep.kind"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.sweep_kind = choice(k, v, {"alpha", "gamma", "beta", "width"}); };
    t["sweep.values"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.sweep_values = parse_list(k, v); };
    t["sweep.beta1"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.sweep_beta1 = parse_list(k, v); };
    t["sweep.beta2"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.sweep_beta2 = parse_list(k, v); };
    t["sweep.shapes"] = [](RunConfig& r, const std::string& k, const std::string& v) {
      r.sweep_shapes.clear();
      for (const auto& s : split(v, ';'))
        if (!s.empty()) r.sweep_shapes.push_back(parse_shape(k, s));
    };
    t["sweep.jobs"] = [](RunConfig& r, const std::string& k, const std::string& v) { r.jobs = parse_int<int>(k, v); };
    return t;
  }();
  return table;
}

}  // namespace detail

/// Explicit settings in file order; later entries override earlier ones.
using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

inline ConfigEntries parse_config(std::istream& is) {
  ConfigEntries out;
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    if (!detail::setters().count(key)) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    out.emplace_back(std::move(key), value);
  }
  return out;
}

inline ConfigEntries parse_config_text(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

inline void RunConfig::validate() const {
  if (m < 2) throw ConfigError("lattice.m must be >= 2");
  if (!(c > 0.0)) throw ConfigError("lattice.c must be positive");
  if (shape.d_in != dim) throw ConfigError("network.shape input width must equal lattice.dim");
  if (eigen_shape.d_in != dim) throw ConfigError("eigen.shape input width must equal lattice.dim");
  try {
    input.validate();
    lm.validate();
    cont.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (subset_size > 0 && subset_size > spec().interior_count()) throw ConfigError("subset.size exceeds the number of equations");
  if (eigen_power_steps < 0 || eigen_fresh_attempts < 0 || eigen_max_iter < 1) throw ConfigError("eigen: bad iteration settings");
  if (!(seed_opt.width > 0.0)) throw ConfigError("seed.width must be positive");
  for (const auto& s : sweep_shapes)
    if (s.d_in != dim) throw ConfigError("sweep.shapes input width must equal lattice.dim");
}

/// Dimension defaults overlaid with the entries (lattice.dim is read first).
inline RunConfig resolve_config(const ConfigEntries& entries) {
  int dim = 1;
  for (const auto& [k, v] : entries)
    if (k == "lattice.dim") dim = detail::parse_int<int>(k, v);
  RunConfig r = dimension_defaults(dim);
  for (const auto& [k, v] : entries) {
    const auto it = detail::setters().find(k);
    if (it == detail::setters().end()) throw ConfigError("unknown key '" + k + "'");
    it->second(r, k, v);
  }
  r.seed_opt.seed = r.seed;
  fill_sweep_defaults(r);
  r.validate();
  return r;
}

/// Fully resolved configuration in the input grammar; feeding it back to
/// resolve_config reproduces the run.
inline void write_config(std::ostream& os, const RunConfig& r) {
  using detail::fmt;
  os << "[lattice]\ndim = " << r.dim << "\nm = " << r.m << "\ncentering = " << to_string(r.centering) << "\nc = " << fmt(r.c) << "\n\n";
  os << "[network]\nshape = " << detail::shape_text(r.shape) << "\ntransform = " << to_string(r.input.transform)
     << "\nmasked = " << (r.input.masked ? "true" : "false") << "\n\n";
  os << "[eigen]\nshape = " << detail::shape_text(r.eigen_shape) << "\nmethod = " << r.eigen_method << "\npower_steps = " << r.eigen_power_steps
     << "\nfresh_attempts = " << r.eigen_fresh_attempts << "\nmax_iter = " << r.eigen_max_iter << "\n\n";
  os << "[lm]\nlambda0 = " << fmt(r.lm.lambda0) << "\nup_factor = " << fmt(r.lm.up_factor) << "\ndown_factor = " << fmt(r.lm.down_factor)
     << "\nmax_iter = " << r.lm.max_iter << "\nresidual_tol = " << fmt(r.lm.residual_tol) << "\nstep_tol = " << fmt(r.lm.step_tol)
     << "\nmax_rejections = " << r.lm.max_rejections << "\ntest_every = " << r.lm.test_every << "\n\n";
  os << "[continuation]\nalpha = " << fmt(r.cont.alpha) << "\nbeta1 = " << fmt(r.cont.beta1) << "\nbeta2 = " << fmt(r.cont.beta2)
     << "\ngamma = " << fmt(r.cont.gamma) << "\ndelta = " << fmt(r.cont.delta) << "\ndrop_sqrt = " << (r.cont.drop_sqrt ? "true" : "false")
     << "\nk_max = " << r.cont.k_max << "\nnorm_target = " << fmt(r.cont.norm_target) << "\nmu_start = " << fmt(r.cont.mu_start)
     << "\nmu_offset = " << (r.cont.mu_offset ? fmt(*r.cont.mu_offset) : std::string("auto")) << "\n\n";
  os << "[corrector]\nmax_iter = " << r.corrector.lm.max_iter << "\naccept_mse = " << fmt(r.corrector.accept_mse)
     << "\naccept_constraint = " << fmt(r.corrector.accept_constraint) << "\n\n";
  os << "[subset]\nsize = " << r.subset_size << "\ncenter = " << (r.subset_center ? "true" : "false") << "\n\n";
  os << "[seed]\namplitude = " << (r.seed_opt.amplitude ? fmt(*r.seed_opt.amplitude) : std::string("auto")) << "\nwidth = " << fmt(r.seed_opt.width)
     << "\n\n";
  os << "[run]\nmu = " << fmt(r.mu) << "\nseed = " << r.seed << "\nout = " << r.out << "\noracle = " << (r.oracle ? "true" : "false")
     << "\nannotate = " << r.annotate << "\ninput = " << r.input_path << "\n\n";
  os << "[sweep]\nkind = " << r.sweep_kind << "\nvalues = " << detail::list_text(r.sweep_values) << "\nbeta1 = " << detail::list_text(r.sweep_beta1)
     << "\nbeta2 = " << detail::list_text(r.sweep_beta2) << "\nshapes = ";
  for (std::size_t i = 0; i < r.sweep_shapes.size(); ++i) os << (i ? ";" : "") << detail::shape_text(r.sweep_shapes[i]);
  os << "\njobs = " << r.jobs << "\n";
}

}  // namespace lpinn

#endif  // LPINN_CONFIG_HPP
