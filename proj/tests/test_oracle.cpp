#include "catch_amalgamated.hpp"

#include "lpinn/oracle.hpp"
#include "support.hpp"

#include <cmath>

using namespace lpinn;
using Catch::Approx;

TEST_CASE("direct_solve hand cases", "[oracle]") {
  const auto s = build_spec(1, 2, Centering::site, 0.05);
  const StateField z = direct_solve(s, -0.5, Eigen::VectorXd::Zero(1));
  CHECK(z.values[1] == 0.0);
  const StateField r = direct_solve(s, -0.5, Eigen::VectorXd::Constant(1, 1.5));
  CHECK(r.values[1] == Approx(std::sqrt(1.0 + std::sqrt(0.4))).epsilon(1e-13));
  CHECK(r.values[1] == Approx(1.27768).margin(1e-5));
  CHECK(state_mse(s, r, -0.5) <= 1e-24);
  CHECK_THROWS_AS(direct_solve(s, -0.5, Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

TEST_CASE("oracle dimension policy", "[oracle]") {
  const auto s4 = build_spec(4, 3, Centering::site, 0.05);
  const auto s5 = build_spec(5, 3, Centering::site, 0.05);
  const Eigen::VectorXd z4 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s4.interior_count()));
  CHECK_THROWS_AS(direct_solve(s4, -0.5, z4), std::invalid_argument);
  CHECK_NOTHROW(direct_solve(s4, -0.5, z4, default_direct_lm(), OracleOptions{3, true}));
  CHECK_THROWS_AS(direct_solve(s5, -0.5, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s5.interior_count())), default_direct_lm(), OracleOptions{5, true}),
                  std::invalid_argument);
}

TEST_CASE("direct and PINN solutions agree in 1D", "[oracle][slow]") {
  for (const auto cent : {Centering::site, Centering::bond}) {
    const auto s = build_spec(1, 10, cent, 0.05);
    const PinnProblem p = make_problem(s, make_shape(1, 4, 4), InputMode{}, -0.1);
    LMConfig cfg;
    cfg.max_iter = 1000;
    cfg.residual_tol = 1e-30;
    cfg.step_tol = 1e-16;
    const PinnSolve pinn = solve_fixed_mu(p, warm_start(p, -0.1), cfg);
    const StateField direct = direct_solve(s, -0.1, bump_state(s, default_seed_amplitude(-0.1), 40.0).interior());
    CHECK(state_mse(s, direct, -0.1) <= 1e-24);
    const double diff = (lattice_state(p, pinn.weights).interior() - direct.interior()).cwiseAbs().maxCoeff();
    INFO(to_string(cent) << " diff " << diff);
    CHECK(diff <= 1e-9);
  }
}

TEST_CASE("direct branch norm steps", "[oracle]") {
  const auto s = build_spec(1, 10, Centering::bond, 0.15);
  ContinuationParams p = ContinuationParams::norm_defaults();
  p.norm_target = 3.0;
  const Branch br = direct_trace_branch(s, p);
  INFO(br.message);
  REQUIRE(br.complete);
  for (std::size_t i = 2; i < br.points.size(); ++i) CHECK(std::abs(br.points[i].norm - br.points[i - 1].norm - p.gamma) <= 1e-8);

  // re-solving at a stored norm returns the stored parameter
  for (const std::size_t i : {std::size_t{10}, br.points.size() / 2, br.points.size() - 3}) {
    const auto q = oracle_point_at_norm(s, br.points, br.points[i].norm, br.points[i].mu);
    REQUIRE(q);
    CHECK(std::abs(q->mu - br.points[i].mu) <= 1e-10);
    CHECK((q->x - br.points[i].x).cwiseAbs().maxCoeff() <= 1e-8);
  }
  CHECK(refined_norm_deviation(s, br.points, br.points) <= 1e-10);
  CHECK_FALSE(oracle_point_at_norm(s, br.points, 100.0, 0.0));
}
