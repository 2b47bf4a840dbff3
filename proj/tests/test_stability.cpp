#include "catch_amalgamated.hpp"

#include "lpinn/oracle.hpp"
#include "lpinn/stability.hpp"
#include "support.hpp"

#include <limits>
#include <numbers>
#include <random>
#include <sstream>

using namespace lpinn;
using Catch::Approx;

TEST_CASE("classify_stability", "[stability]") {
  CHECK(classify_stability(-0.1) == Stability::stable);
  CHECK(classify_stability(0.1) == Stability::unstable);
  CHECK(classify_stability(0.0) == Stability::unstable);
  CHECK(classify_stability(-1e-300) == Stability::stable);
  CHECK_THROWS_AS(classify_stability(std::numeric_limits<double>::quiet_NaN()), std::invalid_argument);
  CHECK_THROWS_AS(classify_stability(std::numeric_limits<double>::infinity()), std::invalid_argument);
}

TEST_CASE("eigen residual of the zero network", "[stability]") {
  const auto s = build_spec(1, 10, Centering::site, 0.05);
  const auto shape = make_shape(1, 4, 4);
  const WeightVector w = WeightVector{Eigen::VectorXd::Zero(shape.parameter_count()), false}.with_extra(0.3);
  const Eigen::VectorXd g = eigen_residual(s, StateField(s), -0.5, shape, w);
  REQUIRE(g.size() == 18);
  CHECK(g.head(17).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g[17] == -1.0);
  CHECK_THROWS_AS(eigen_residual(s, StateField(s), -0.5, shape, w.without_extra()), std::invalid_argument);
}

TEST_CASE("eigen residual rows", "[stability]") {
  std::mt19937_64 rng(4);
  const auto s = build_spec(2, 4, Centering::site, 0.05);
  const auto shape = make_shape(2, 5, 5);
  const StateField u = StateField::from_interior(s, testing::uniform_vector(rng, static_cast<Eigen::Index>(s.interior_count()), -1.0, 1.0));
  const EigenProblem ep = make_eigen_problem(s, u, -0.3, shape);
  Eigen::VectorXd w(ep.unknowns());
  w << testing::uniform_vector(rng, shape.parameter_count(), -1.0, 1.0), 0.7;
  const Eigen::VectorXd g = eigen_residual(ep, w);
  const Eigen::VectorXd v = evaluate(shape, w.head(shape.parameter_count()), ep.inputs, ep.mode, false).output;
  CHECK(v.minCoeff() >= 0.0);
  const StateField vf = StateField::from_interior(s, v);
  for (std::size_t a = 0; a < s.interior_count(); ++a) {
    const MultiIndex idx = s.interior_multi(a);
    const double ui = u.at(idx);
    const double vi = vf.at(idx);
    const double expect = (-0.3 - 0.7) * vi + 0.05 * laplacian_at(vf, idx) + 6 * ui * ui * vi - 5 * ui * ui * ui * ui * vi;
    CHECK(g[static_cast<Eigen::Index>(a)] == Approx(expect).margin(1e-14));
  }
  CHECK(g[g.size() - 1] == Approx(v.norm() - 1.0).margin(1e-15));
}

TEST_CASE("eigen Jacobian matches central differences", "[stability][property]") {
  std::mt19937_64 rng(41);
  for (int draw = 0; draw < 100; ++draw) {
    const int d = 1 + draw % 2;
    const auto s = build_spec(d, 4 + draw % 3, draw % 3 ? Centering::site : Centering::bond, 0.05 + 0.1 * (draw % 2));
    const auto shape = make_shape(d, 3 + draw % 3, 3 + draw % 4);
    const StateField u = StateField::from_interior(s, testing::uniform_vector(rng, static_cast<Eigen::Index>(s.interior_count()), -1.2, 1.2));
    const EigenProblem ep = make_eigen_problem(s, u, -0.5 + 0.01 * draw, shape);
    Eigen::VectorXd w(ep.unknowns());
    w << testing::uniform_vector(rng, shape.parameter_count(), -1.0, 1.0), -0.4 + 0.01 * draw;
    w[shape.b3_offset()] += 4.0;  // away from the kink of |.|
    const Eigen::MatrixXd J = eigen_jacobian(ep, w);
    const Eigen::MatrixXd Jfd = testing::fd_jacobian([&](const Eigen::VectorXd& x) { return eigen_residual(ep, x); }, w);
    const double err = testing::rel_error(J, Jfd);
    INFO("draw " << draw << " err " << err);
    CHECK(err <= 1e-6);
  }
}

TEST_CASE("eigen-PINN on the zero state", "[stability]") {
  const auto s = build_spec(1, 10, Centering::site, 0.05);  // 17 interior
  const double closed = -0.5 - 4.0 * 0.05 * std::pow(std::sin(std::numbers::pi / 36.0), 2);
  const EigenSolution sol = solve_largest_eigenpair(s, StateField(s), -0.5, make_shape(1, 4, 4));
  CHECK(sol.result.lambda == Approx(closed).margin(1e-8));
  CHECK(sol.result.lambda == Approx(-0.50152).margin(1e-5));
  CHECK(sol.result.residual_mse <= 1e-16);
  CHECK(sol.result.norm_defect <= 1e-8);
  CHECK(*std::min_element(sol.result.v.values.begin(), sol.result.v.values.end()) >= 0.0);
  CHECK(sol.result.v.boundary_is_zero());

  // the oracle eigenpair leaves a vanishing residual when inserted directly
  const EigenResult o = direct_largest_eigenpair(s, StateField(s), -0.5);
  CHECK(o.lambda == Approx(closed).margin(1e-13));
  CHECK(o.residual_mse <= 1e-18);
  CHECK(std::abs(sol.result.lambda - o.lambda) <= 1e-8);
  CHECK((sol.result.v.interior() - o.v.interior()).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("zero branch stability threshold", "[stability]") {
  const auto s = build_spec(1, 10, Centering::site, 0.05);
  const double shift = 4.0 * 0.05 * std::pow(std::sin(std::numbers::pi / 36.0), 2);
  for (const double mu : {-0.2, -0.01, shift - 1e-4}) {
    const double l = direct_largest_eigenpair(s, StateField(s), mu).lambda;
    CHECK(l == Approx(mu - shift).margin(1e-13));
    CHECK(classify_stability(l) == Stability::stable);
  }
  CHECK(classify_stability(direct_largest_eigenpair(s, StateField(s), shift + 1e-4).lambda) == Stability::unstable);
}

TEST_CASE("annotated branch: PINN and oracle agree", "[stability][slow]") {
  const auto s = build_spec(1, 10, Centering::site, 0.05);
  ContinuationParams p = ContinuationParams::norm_defaults();
  p.norm_target = 2.5;
  const Branch br = direct_trace_branch(s, p);
  REQUIRE(br.complete);
  std::vector<BranchPoint> sample;
  for (std::size_t i = 0; i < br.points.size(); i += 5) sample.push_back(br.points[i]);
  REQUIRE(sample.size() >= 40);
  auto by_pinn = sample;
  auto by_oracle = sample;
  const DirectBranchSystem sys(s);
  const AnnotateReport rp = annotate_branch(by_pinn, EigenMethod::pinn, sys, make_shape(1, 4, 4));
  const AnnotateReport ro = annotate_branch(by_oracle, EigenMethod::oracle, sys, make_shape(1, 4, 4));
  CHECK(rp.failures.empty());
  CHECK(ro.failures.empty());
  CHECK(rp.fallbacks.empty());
  int stable = 0, unstable = 0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    REQUIRE(by_pinn[i].lambda_max);
    REQUIRE(by_oracle[i].lambda_max);
    CHECK(std::abs(*by_pinn[i].lambda_max - *by_oracle[i].lambda_max) <= 1e-8);
    if (std::abs(*by_oracle[i].lambda_max) > 1e-6) CHECK(*by_pinn[i].stable == *by_oracle[i].stable);
    (*by_oracle[i].stable ? stable : unstable) += 1;

    // the oracle's top eigenvector has no sign changes
    const EigenResult o = direct_largest_eigenpair(s, sys.state(sample[i].x), sample[i].mu);
    CHECK(o.v.interior().minCoeff() >= -1e-12);
  }
  CHECK(stable > 0);
  CHECK(unstable > 0);

  std::vector<EigenRow> rows{{1, -0.1, 0.5, -0.25, -0.25, true}, {2, -0.1, 0.6, std::nullopt, 0.5, false}};
  std::ostringstream os;
  write_eigen_csv(os, rows);
  CHECK(os.str() == "k,mu,norm,lambda_pinn,lambda_oracle,stable\n1,-0.10000000000000001,0.5,-0.25,-0.25,1\n2,-0.10000000000000001,0.59999999999999998,,0.5,0\n");
}

TEST_CASE("power iteration agrees with the dense solve", "[stability][oracle]") {
  const auto s = build_spec(2, 6, Centering::site, 0.05);
  const StateField u = direct_solve(s, -0.1, bump_state(s, default_seed_amplitude(-0.1), 40.0).interior());
  EigenOracleOptions power;
  power.force_power = true;
  const EigenResult a = direct_largest_eigenpair(s, u, -0.1);
  const EigenResult b = direct_largest_eigenpair(s, u, -0.1, power);
  CHECK(std::abs(a.lambda - b.lambda) <= 1e-10);

  const Eigen::SparseMatrix<double> I = Eigen::MatrixXd::Identity(5, 5).sparseView();
  const auto [l, v] = largest_eigenpair(I);
  CHECK(l == Approx(1.0).margin(1e-14));
  CHECK(v.norm() == Approx(1.0).margin(1e-14));
  const auto [lp, vp] = largest_eigenpair(I, power);
  CHECK(lp == Approx(1.0).margin(1e-14));
  CHECK((vp.array() - 1.0 / std::sqrt(5.0)).abs().maxCoeff() <= 1e-15);
}
