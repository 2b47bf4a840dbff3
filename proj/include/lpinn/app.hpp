#ifndef LPINN_APP_HPP
#define LPINN_APP_HPP

// Command implementations behind the lpinn executable. Every command writes
// into its output directory: config.ini (resolved configuration), the CSV
// artifacts, and timing.csv (wall times kept apart so the other files are
// reproducible byte for byte).

#include "lpinn/config.hpp"
#include "lpinn/continuation.hpp"
#include "lpinn/lattice.hpp"
#include "lpinn/network.hpp"
#include "lpinn/oracle.hpp"
#include "lpinn/pinn.hpp"
#include "lpinn/solver.hpp"
#include "lpinn/stability.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace lpinn {

namespace fs = std::filesystem;

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_solver = 3, exit_partial = 4, exit_io = 5 };

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace app {

class Timer {
 public:
  void start(std::string phase) {
    phase_ = std::move(phase);
    t0_ = std::chrono::steady_clock::now();
  }
  void stop() { rows_.emplace_back(phase_, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count()); }
  const std::vector<std::pair<std::string, double>>& rows() const { return rows_; }

 private:
  std::string phase_;
  std::chrono::steady_clock::time_point t0_;
  std::vector<std::pair<std::string, double>> rows_;
};

inline void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

inline void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string());
  body(os);
  if (!os) throw IoError("write failed: " + path.string());
}

inline void write_timing(const fs::path& dir, const Timer& t) {
  write_file(dir / "timing.csv", [&](std::ostream& os) {
    os << "phase,seconds\n";
    for (const auto& [p, s] : t.rows()) os << p << ',' << s << '\n';
  });
}

inline void write_resolved(const fs::path& dir, const RunConfig& cfg) {
  make_dir(dir);
  write_file(dir / "config.ini", [&](std::ostream& os) { write_config(os, cfg); });
}

inline EigenSolveOptions eigen_options(const RunConfig& cfg) {
  EigenSolveOptions o;
  o.lm.max_iter = cfg.eigen_max_iter;
  o.seed = cfg.seed;
  o.guess_power_steps = cfg.eigen_power_steps;
  o.fresh_attempts = cfg.eigen_fresh_attempts;
  return o;
}

inline double step_rmse(const std::vector<BranchPoint>& pts) {
  double s = 0.0;
  int n = 0;
  for (const auto& q : pts)
    if (q.k >= 3) {
      s += q.mse;
      ++n;
    }
  return n ? std::sqrt(s / n) : std::nan("");
}

inline double step_constraint(const std::vector<BranchPoint>& pts, double alpha, bool take_max) {
  double s = 0.0;
  int n = 0;
  for (const auto& q : pts)
    if (q.k >= 3) {
      const double v = std::abs(q.constraint_residual) / alpha;
      s = take_max ? std::max(s, v) : s + v;
      ++n;
    }
  if (!n) return std::nan("");
  return take_max ? s : s / n;
}

/// Interior lattice values per point: k,mu,u_1,...,u_|A|.
inline void write_branch_lattice_states(std::ostream& os, const std::vector<BranchPoint>& pts, const std::function<StateField(const Eigen::VectorXd&)>& state) {
  std::vector<BranchPoint> rows;
  rows.reserve(pts.size());
  for (const auto& q : pts) {
    BranchPoint r;
    r.k = q.k;
    r.mu = q.mu;
    r.x = state(q.x).interior();
    rows.push_back(std::move(r));
  }
  os << "# k,mu,interior lattice values\n";
  write_branch_states(os, rows);
}

/// Runs `n` independent jobs on up to `jobs` threads.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(n, jobs > 0 ? static_cast<std::size_t>(jobs) : hw);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace app

// -- solve ------------------------------------------------------------------

inline int cmd_solve(const RunConfig& cfg, std::ostream& log = std::cout) {
  const fs::path dir = cfg.out;
  app::write_resolved(dir, cfg);
  app::Timer timer;
  const PinnProblem p = cfg.problem(cfg.mu);
  timer.start("warm_start");
  const WeightVector w0 = warm_start(p, cfg.mu, cfg.seed_opt);
  timer.stop();
  timer.start("solve");
  PinnSolve s;
  try {
    s = solve_fixed_mu(p, w0, cfg.lm, cfg.subset());
  } catch (const SolverFailure& e) {
    timer.stop();
    app::write_timing(dir, timer);
    log << "solver failure: " << e.what() << '\n';
    return exit_solver;
  }
  timer.stop();
  const double final_mse = mse(p, s.weights);
  const StateField u = lattice_state(p, s.weights);
  const LatticeSpec& spec = p.spec;

  app::write_file(dir / "weights.txt", [&](std::ostream& os) { write_weights(os, p.shape, s.weights); });
  app::write_file(dir / "solution.txt", [&](std::ostream& os) { write_state(os, u, cfg.mu); });
  app::write_file(dir / "trace.csv", [&](std::ostream& os) { write_trace_csv(os, s.trace); });
  // u(i, c, ..., c) through the centre along the first axis.
  const int mid = spec.centering() == Centering::site ? spec.half_width() : spec.size() / 2;
  app::write_file(dir / "slice.csv", [&](std::ostream& os) {
    os << "i,u\n" << std::setprecision(17);
    MultiIndex idx(static_cast<std::size_t>(spec.dim()), mid);
    for (int i = 1; i <= spec.size(); ++i) {
      idx[0] = i;
      os << i << ',' << u.at(idx) << '\n';
    }
  });

  std::optional<double> diff;
  if (cfg.oracle) {
    timer.start("direct");
    try {
      const double a = cfg.seed_opt.amplitude.value_or(default_seed_amplitude(cfg.mu));
      const StateField du = direct_solve(spec, cfg.mu, bump_state(spec, a, cfg.seed_opt.width).interior());
      diff = (du.interior() - u.interior()).cwiseAbs().maxCoeff();
      app::write_file(dir / "direct_solution.txt", [&](std::ostream& os) { write_state(os, du, cfg.mu); });
    } catch (const std::invalid_argument& e) {
      log << "oracle skipped: " << e.what() << '\n';
    } catch (const SolverFailure& e) {
      log << "oracle failed: " << e.what() << '\n';
    }
    timer.stop();
  }
  app::write_file(dir / "summary.csv", [&](std::ostream& os) {
    os << "mu,mse,iterations,termination,norm,direct_max_abs_diff\n" << std::setprecision(17);
    os << cfg.mu << ',' << final_mse << ',' << s.trace.iterations() << ',' << to_string(s.trace.reason) << ',' << solution_norm(spec, u, ModelParams{cfg.mu})
       << ',';
    if (diff) os << *diff;
    os << '\n';
  });
  app::write_timing(dir, timer);
  log << "mse " << final_mse << " iterations " << s.trace.iterations() << " (" << to_string(s.trace.reason) << ")";
  if (diff) log << " direct max |diff| " << *diff;
  log << '\n';
  return std::isfinite(final_mse) ? exit_ok : exit_solver;
}

// -- branch -----------------------------------------------------------------

struct BranchRun {
  Branch pinn;
  std::optional<Branch> direct;
  std::optional<AnnotateReport> eigen;
  bool init_failed = false;
  std::string error;
};

/// Traces the PINN branch (plus optional annotation and oracle branch) and
/// writes the branch artifacts into `dir`.
inline BranchRun run_branch(const RunConfig& cfg, const fs::path& dir, app::Timer& timer) {
  BranchRun run;
  const PinnProblem free = cfg.problem(std::nullopt);
  const PinnBranchSystem sys(free);
  timer.start("pinn_branch");
  try {
    run.pinn = trace_branch(free, cfg.cont, cfg.lm, cfg.corrector, cfg.seed_opt);
  } catch (const CorrectorFailure& e) {
    timer.stop();
    run.init_failed = true;
    run.error = e.what();
    return run;
  } catch (const SolverFailure& e) {
    timer.stop();
    run.init_failed = true;
    run.error = e.what();
    return run;
  }
  timer.stop();

  if (cfg.annotate != "none") {
    timer.start("annotate");
    const EigenMethod m = eigen_method_from_string(cfg.annotate);
    std::vector<BranchPoint> pts = run.pinn.points;
    run.eigen = annotate_branch(pts, m, sys, cfg.eigen_shape, app::eigen_options(cfg));
    run.pinn.points = std::move(pts);
    timer.stop();
    std::vector<EigenRow> rows;
    for (const auto& q : run.pinn.points) {
      EigenRow r{q.k, q.mu, q.norm, {}, {}, q.stable};
      const bool fell_back = std::find(run.eigen->fallbacks.begin(), run.eigen->fallbacks.end(), q.k) != run.eigen->fallbacks.end();
      if (m == EigenMethod::pinn && !fell_back)
        r.lambda_pinn = q.lambda_max;
      else
        r.lambda_oracle = q.lambda_max;
      rows.push_back(r);
    }
    app::write_file(dir / "eigen.csv", [&](std::ostream& os) { write_eigen_csv(os, rows); });
  }
  app::write_file(dir / "branch_pinn.csv", [&](std::ostream& os) { write_branch_csv(os, run.pinn.points, cfg.cont, "pinn"); });
  app::write_file(dir / "branch_pinn_states.csv",
                  [&](std::ostream& os) { app::write_branch_lattice_states(os, run.pinn.points, [&](const Eigen::VectorXd& x) { return sys.state(x); }); });

  if (cfg.oracle) {
    timer.start("direct_branch");
    try {
      run.direct = direct_trace_branch(free.spec, cfg.cont, cfg.corrector, cfg.seed_opt);
    } catch (const std::exception& e) {
      run.error = std::string("oracle branch: ") + e.what();
    }
    timer.stop();
    if (run.direct) {
      app::write_file(dir / "branch_direct.csv", [&](std::ostream& os) { write_branch_csv(os, run.direct->points, cfg.cont, "direct"); });
      timer.start("compare");
      const double lin = matched_norm_deviation(run.pinn.points, run.direct->points);
      const double refined = refined_norm_deviation(free.spec, run.pinn.points, run.direct->points);
      timer.stop();
      app::write_file(dir / "compare.csv", [&](std::ostream& os) {
        os << "metric,value\n" << std::setprecision(17);
        os << "pinn_points," << run.pinn.points.size() << "\ndirect_points," << run.direct->points.size() << "\npinn_folds," << count_folds(run.pinn.points)
           << "\ndirect_folds," << count_folds(run.direct->points) << "\nmatched_norm_deviation_interpolated," << lin
           << "\nmatched_norm_deviation_refined," << refined << '\n';
      });
    }
  }
  return run;
}

inline int cmd_branch(const RunConfig& cfg, std::ostream& log = std::cout) {
  const fs::path dir = cfg.out;
  app::write_resolved(dir, cfg);
  app::Timer timer;
  const BranchRun run = run_branch(cfg, dir, timer);
  app::write_timing(dir, timer);
  if (run.init_failed) {
    log << "branch initialization failed: " << run.error << '\n';
    return exit_solver;
  }
  log << "pinn branch: " << run.pinn.points.size() << " points, " << count_folds(run.pinn.points) << " folds, "
      << (run.pinn.complete ? "complete" : "partial: " + run.pinn.message) << '\n';
  if (run.eigen) log << "eigen fallbacks " << run.eigen->fallbacks.size() << ", failures " << run.eigen->failures.size() << '\n';
  if (!run.error.empty()) log << run.error << '\n';
  return run.pinn.complete ? exit_ok : exit_partial;
}

// -- eig --------------------------------------------------------------------

struct EigenInput {
  LatticeSpec spec;
  std::vector<BranchPoint> points;  // x = interior lattice values
};

/// A state file (write_state) or a branch state CSV (k,mu,u...).
inline EigenInput read_eigen_input(const RunConfig& cfg) {
  if (cfg.input_path.empty()) throw ConfigError("eig: run.input (--input) is required");
  std::ifstream is(cfg.input_path);
  if (!is) throw ConfigError("eig: cannot read input " + cfg.input_path);
  std::string first;
  std::getline(is, first);
  is.clear();
  is.seekg(0);
  EigenInput in;
  try {
    if (first.find(',') != std::string::npos || (!first.empty() && first[0] == '#')) {
      in.spec = cfg.spec();
      in.points = read_branch_states(is);
      for (const auto& q : in.points)
        if (q.x.size() != static_cast<Eigen::Index>(in.spec.interior_count())) throw ConfigError("eig: branch states do not match the configured lattice");
    } else {
      LoadedState ls = read_state(is);
      in.spec = ls.state.spec;
      BranchPoint q;
      q.mu = ls.mu;
      q.x = ls.state.interior();
      in.points.push_back(std::move(q));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("eig: unreadable input: ") + e.what());
  }
  if (in.points.empty()) throw ConfigError("eig: input holds no states");
  if (cfg.eigen_shape.d_in != in.spec.dim()) throw ConfigError("eig: eigen.shape does not match the input dimension");
  for (auto& q : in.points) q.norm = solution_norm(in.spec, StateField::from_interior(in.spec, q.x), ModelParams{q.mu});
  return in;
}

inline int cmd_eig(const RunConfig& cfg, std::ostream& log = std::cout) {
  const EigenInput in = read_eigen_input(cfg);
  const fs::path dir = cfg.out;
  app::write_resolved(dir, cfg);
  app::Timer timer;
  const DirectBranchSystem sys(in.spec);
  std::vector<BranchPoint> pinn = in.points, oracle = in.points;
  std::optional<AnnotateReport> rep;
  if (cfg.eigen_method != "oracle") {
    timer.start("pinn");
    rep = annotate_branch(pinn, EigenMethod::pinn, sys, cfg.eigen_shape, app::eigen_options(cfg));
    timer.stop();
  }
  if (cfg.eigen_method != "pinn") {
    timer.start("oracle");
    annotate_branch(oracle, EigenMethod::oracle, sys, cfg.eigen_shape);
    timer.stop();
  }
  std::vector<EigenRow> rows;
  double max_diff = 0.0;
  int flips = 0;
  for (std::size_t i = 0; i < in.points.size(); ++i) {
    EigenRow r{in.points[i].k, in.points[i].mu, in.points[i].norm, {}, {}, {}};
    if (rep && std::find(rep->fallbacks.begin(), rep->fallbacks.end(), in.points[i].k) == rep->fallbacks.end()) r.lambda_pinn = pinn[i].lambda_max;
    if (cfg.eigen_method != "pinn") r.lambda_oracle = oracle[i].lambda_max;
    r.stable = r.lambda_pinn ? pinn[i].stable : r.lambda_oracle ? oracle[i].stable : pinn[i].stable;
    if (r.lambda_pinn && r.lambda_oracle) {
      max_diff = std::max(max_diff, std::abs(*r.lambda_pinn - *r.lambda_oracle));
      if (std::abs(*r.lambda_oracle) > 1e-6 && classify_stability(*r.lambda_pinn) != classify_stability(*r.lambda_oracle)) ++flips;
    }
    rows.push_back(r);
  }
  app::write_file(dir / "eigen.csv", [&](std::ostream& os) { write_eigen_csv(os, rows); });
  if (cfg.eigen_method == "both") {
    app::write_file(dir / "agreement.csv", [&](std::ostream& os) {
      os << "metric,value\n" << std::setprecision(17);
      os << "points," << rows.size() << "\npinn_fallbacks," << rep->fallbacks.size() << "\nmax_abs_lambda_difference," << max_diff
         << "\nstability_flips_outside_window," << flips << '\n';
    });
    log << "max |dlambda| " << max_diff << ", flips " << flips << ", pinn fallbacks " << rep->fallbacks.size() << '\n';
  }
  app::write_timing(dir, timer);
  log << "eigen rows " << rows.size() << '\n';
  if (rep && !rep->failures.empty()) return exit_solver;
  return exit_ok;
}

// -- sweep ------------------------------------------------------------------

inline int cmd_sweep(const RunConfig& cfg, std::ostream& log = std::cout) {
  const fs::path dir = cfg.out;
  app::write_resolved(dir, cfg);
  app::Timer timer;

  // Grid points as independent configs, each with its own directory.
  std::vector<RunConfig> grid;
  std::vector<std::string> labels;
  if (cfg.sweep_kind == "beta") {
    for (double b1 : cfg.sweep_beta1)
      for (double b2 : cfg.sweep_beta2) {
        RunConfig g = cfg;
        g.cont.beta1 = b1;
        g.cont.beta2 = b2;
        grid.push_back(g);
        labels.push_back(detail::fmt(b1) + "," + detail::fmt(b2));
      }
  } else if (cfg.sweep_kind == "width") {
    for (const auto& s : cfg.sweep_shapes) {
      RunConfig g = cfg;
      g.shape = s;
      grid.push_back(g);
      labels.push_back(detail::shape_text(s));
    }
  } else {
    for (double v : cfg.sweep_values) {
      RunConfig g = cfg;
      (cfg.sweep_kind == "alpha" ? g.cont.alpha : g.cont.gamma) = v;
      grid.push_back(g);
      labels.push_back(detail::fmt(v));
    }
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i].out = (dir / ("point_" + std::to_string(i))).string();
    grid[i].oracle = false;
  }

  // Oracle reference for the gamma sweep: one fine direct branch.
  std::optional<Branch> reference;
  std::vector<double> ref_folds;
  if (cfg.sweep_kind == "gamma" || (cfg.sweep_kind == "beta" && cfg.oracle)) {
    timer.start("oracle");
    ContinuationParams rp = cfg.cont;
    if (cfg.sweep_kind == "gamma") rp.gamma = *std::min_element(cfg.sweep_values.begin(), cfg.sweep_values.end()) / 10.0;
    try {
      reference = direct_trace_branch(cfg.spec(), rp, cfg.corrector, cfg.seed_opt);
      ref_folds = fold_norms(reference->points);
      app::write_file(dir / "branch_direct.csv", [&](std::ostream& os) { write_branch_csv(os, reference->points, rp, "direct"); });
    } catch (const std::exception& e) {
      log << "oracle reference failed: " << e.what() << '\n';
    }
    timer.stop();
  }

  std::vector<std::string> rows(grid.size());
  std::vector<double> seconds(grid.size(), 0.0);
  std::mutex log_mutex;
  app::parallel_for(grid.size(), cfg.jobs, [&](std::size_t i) {
    const RunConfig& g = grid[i];
    std::ostringstream row;
    row << std::setprecision(17);
    if (cfg.sweep_kind == "width")
      row << i;
    else
      row << labels[i];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      app::write_resolved(g.out, g);
      if (cfg.sweep_kind == "width") {
        const PinnProblem p = g.problem(g.mu);
        const PinnSolve s = solve_fixed_mu(p, warm_start(p, g.mu, g.seed_opt), g.lm, g.subset());
        app::write_file(fs::path(g.out) / "trace.csv", [&](std::ostream& os) { write_trace_csv(os, s.trace); });
        row << ',' << '"' << labels[i] << '"' << ',' << g.shape.parameter_count() << ',' << mse(p, s.weights) << ',' << s.trace.iterations() << ",ok";
      } else {
        app::Timer inner;
        RunConfig gg = g;
        gg.annotate = "none";
        const BranchRun run = run_branch(gg, g.out, inner);
        if (run.init_failed) throw CorrectorFailure(run.error);
        const auto& pts = run.pinn.points;
        row << ',' << pts.size() << ',' << (run.pinn.complete ? 1 : 0) << ',' << count_folds(pts) << ',' << app::step_rmse(pts) << ','
            << app::step_constraint(pts, g.cont.alpha, false) << ',' << app::step_constraint(pts, g.cont.alpha, true);
        if (reference) {
          const double w = cfg.sweep_kind == "gamma" ? *std::max_element(cfg.sweep_values.begin(), cfg.sweep_values.end()) : 0.1;
          const double all = matched_norm_deviation(reference->points, pts);
          const double f2 = ref_folds.size() >= 2 ? matched_norm_deviation(reference->points, pts, ref_folds[1] - w, ref_folds[1] + w) : std::nan("");
          row << ',' << all << ',' << f2;
        }
        row << ',' << (run.pinn.complete ? "ok" : "partial");
      }
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(log_mutex);
      log << "grid point " << labels[i] << " failed: " << e.what() << '\n';
      row << ",failed";
    }
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows[i] = row.str();
  });

  app::write_file(dir / "summary.csv", [&](std::ostream& os) {
    if (cfg.sweep_kind == "width")
      os << "index,shape,n_w,mse,iterations,status\n";
    else {
      os << (cfg.sweep_kind == "beta" ? "beta1,beta2" : cfg.sweep_kind) << ",points,complete,folds,system_rmse,mean_constraint_over_alpha,max_constraint_over_alpha";
      if (reference) os << ",polyline_deviation,polyline_deviation_second_fold";
      os << ",status\n";
    }
    for (const auto& r : rows) os << r << '\n';
  });
  app::write_file(dir / "timing.csv", [&](std::ostream& os) {
    os << "phase,seconds\n";
    for (const auto& [p, s] : timer.rows()) os << p << ',' << s << '\n';
    for (std::size_t i = 0; i < grid.size(); ++i) os << "point_" << i << ',' << seconds[i] << '\n';
  });
  log << "sweep " << cfg.sweep_kind << ": " << grid.size() << " grid points\n";
  return exit_ok;
}

// -- compare ----------------------------------------------------------------

struct CsvBranch {
  std::vector<BranchPoint> points;
};

/// Reads k, mu and norm from a branch CSV.
inline std::vector<BranchPoint> read_branch_csv(std::istream& is) {
  std::vector<BranchPoint> pts;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line.rfind("k,mu,norm", 0) != 0) throw std::runtime_error("branch csv: unexpected header");
      header = true;
      continue;
    }
    std::istringstream ls(line);
    std::string k, mu, norm;
    std::getline(ls, k, ',');
    std::getline(ls, mu, ',');
    std::getline(ls, norm, ',');
    BranchPoint q;
    q.k = std::stoi(k);
    q.mu = std::stod(mu);
    q.norm = std::stod(norm);
    pts.push_back(std::move(q));
  }
  if (!header) throw std::runtime_error("branch csv: missing header");
  return pts;
}

/// Branch CSVs: matched-norm deviation of `a` against the polyline of `b`
/// and fold counts. State files: max |u_a - u_b|.
inline int cmd_compare(const std::string& a, const std::string& b, const std::string& out, std::ostream& log = std::cout) {
  if (a.empty() || b.empty()) throw ConfigError("compare: --a and --b are required");
  std::ifstream ia(a), ib(b);
  if (!ia || !ib) throw ConfigError("compare: cannot read inputs");
  std::string first;
  std::getline(ia, first);
  ia.clear();
  ia.seekg(0);
  const fs::path dir = out;
  std::ostringstream body;
  body << "metric,value\n" << std::setprecision(17);
  try {
    if (first.rfind("# ", 0) == 0 || first.rfind("k,", 0) == 0) {
      const auto pa = read_branch_csv(ia);
      const auto pb = read_branch_csv(ib);
      const double dev = matched_norm_deviation(pa, pb);
      body << "a_points," << pa.size() << "\nb_points," << pb.size() << "\na_folds," << count_folds(pa) << "\nb_folds," << count_folds(pb)
           << "\nmatched_norm_deviation," << dev << '\n';
      log << "matched-norm deviation " << dev << ", folds " << count_folds(pa) << " / " << count_folds(pb) << '\n';
    } else {
      const LoadedState sa = read_state(ia);
      const LoadedState sb = read_state(ib);
      if (sa.state.spec.size() != sb.state.spec.size() || sa.state.spec.dim() != sb.state.spec.dim())
        throw ConfigError("compare: states live on different lattices");
      double d = 0.0;
      for (std::size_t i = 0; i < sa.state.values.size(); ++i) d = std::max(d, std::abs(sa.state.values[i] - sb.state.values[i]));
      body << "max_abs_difference," << d << '\n';
      log << "max |u_a - u_b| " << d << '\n';
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("compare: ") + e.what());
  }
  app::make_dir(dir);
  app::write_file(dir / "compare.csv", [&](std::ostream& os) { os << body.str(); });
  return exit_ok;
}

// -- command line -----------------------------------------------------------

/// Parses the command line and dispatches. Returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App cli{"Steady states, branches and stability of discrete Allen-Cahn lattices via shallow networks"};
  cli.require_subcommand(1);
  cli.fallthrough();
  std::string config_path, out;
  std::uint64_t seed = 0;
  std::vector<std::string> sets;
  cli.add_option("--config", config_path, "configuration file");
  CLI::Option* seed_opt = cli.add_option("--seed", seed, "random seed");
  CLI::Option* out_opt = cli.add_option("--out", out, "output directory");
  cli.add_option("--set", sets, "extra setting section.key=value (repeatable)");

  ConfigEntries flags;
  auto flag = [&](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags.emplace_back(key, v); }, help);
  };
  auto lattice_flags = [&](CLI::App* sub) {
    flag(sub, "--dim", "lattice.dim", "lattice dimension (1..5)");
    flag(sub, "--m", "lattice.m", "half-width");
    flag(sub, "--c", "lattice.c", "coupling");
    flag(sub, "--centering", "lattice.centering", "site or bond");
    flag(sub, "--net", "network.shape", "network shape d,h1,h2,1");
    flag(sub, "--transform", "network.transform", "raw, normalized or fold_sorted");
    flag(sub, "--masked", "network.masked", "boundary sine mask (true/false)");
    flag(sub, "--max-iter", "lm.max_iter", "LM iterations");
  };
  bool oracle_flag = false;

  CLI::App* solve = cli.add_subcommand("solve", "fixed-mu solve");
  lattice_flags(solve);
  flag(solve, "--mu", "run.mu", "bifurcation parameter");
  flag(solve, "--subset", "subset.size", "stochastic subset size (0 = full system)");
  solve->add_flag("--oracle", oracle_flag, "also run the direct solver");

  CLI::App* branch = cli.add_subcommand("branch", "branch tracing");
  lattice_flags(branch);
  flag(branch, "--annotate", "run.annotate", "none, pinn or oracle");
  flag(branch, "--norm-target", "continuation.norm_target", "stop once the norm reaches this value");
  flag(branch, "--gamma", "continuation.gamma", "norm step");
  flag(branch, "--alpha", "continuation.alpha", "constraint weight");
  branch->add_flag("--oracle", oracle_flag, "also trace the direct branch and compare");

  CLI::App* eig = cli.add_subcommand("eig", "largest eigenvalue of states");
  lattice_flags(eig);
  flag(eig, "--input", "run.input", "state file or branch state CSV");
  flag(eig, "--method", "eigen.method", "pinn, oracle or both");
  flag(eig, "--eigen-net", "eigen.shape", "eigen network shape d,h1,h2,1");

  CLI::App* sweep = cli.add_subcommand("sweep", "parameter sweeps");
  lattice_flags(sweep);
  flag(sweep, "--kind", "sweep.kind", "alpha, gamma, beta or width");
  flag(sweep, "--values", "sweep.values", "comma-separated grid");
  flag(sweep, "--shapes", "sweep.shapes", "semicolon-separated shapes");
  flag(sweep, "--jobs", "sweep.jobs", "worker threads");
  flag(sweep, "--norm-target", "continuation.norm_target", "stop once the norm reaches this value");
  sweep->add_flag("--oracle", oracle_flag, "beta sweep: compare against the direct branch");

  CLI::App* compare = cli.add_subcommand("compare", "compare two branch CSVs or two state files");
  std::string ca, cb;
  compare->add_option("--a", ca, "first file")->required();
  compare->add_option("--b", cb, "second file")->required();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e, log, err);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    if (compare->parsed()) return cmd_compare(ca, cb, out_opt->count() ? out : std::string("out"), log);

    ConfigEntries entries;
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw ConfigError("cannot read config " + config_path);
      entries = parse_config(is);
    }
    for (const auto& e : flags) entries.push_back(e);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects section.key=value");
      entries.emplace_back(detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)));
      if (!detail::setters().count(entries.back().first)) throw ConfigError("unknown key '" + entries.back().first + "'");
    }
    if (oracle_flag) entries.emplace_back("run.oracle", "true");
    if (seed_opt->count()) entries.emplace_back("run.seed", std::to_string(seed));
    if (out_opt->count()) entries.emplace_back("run.out", out);
    const RunConfig cfg = resolve_config(entries);

    if (solve->parsed()) return cmd_solve(cfg, log);
    if (branch->parsed()) return cmd_branch(cfg, log);
    if (eig->parsed()) return cmd_eig(cfg, log);
    return cmd_sweep(cfg, log);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return exit_io;
  } catch (const SolverFailure& e) {
    err << "solver failure: " << e.what() << '\n';
    return exit_solver;
  } catch (const CorrectorFailure& e) {
    err << "solver failure: " << e.what() << '\n';
    return exit_solver;
  } catch (const EigenFailure& e) {
    err << "solver failure: " << e.what() << '\n';
    return exit_solver;
  }
}

}  // namespace lpinn

#endif  // LPINN_APP_HPP
