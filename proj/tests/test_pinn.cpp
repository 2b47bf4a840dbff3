#include "catch_amalgamated.hpp"

#include "lpinn/pinn.hpp"
#include "support.hpp"

#include <chrono>
#include <numeric>
#include <random>

using namespace lpinn;
using Catch::Approx;

namespace {

const InputMode kFold{InputTransform::fold_sorted, false, false};

std::vector<std::size_t> all_equations(const PinnProblem& p) {
  std::vector<std::size_t> s(p.spec.interior_count());
  std::iota(s.begin(), s.end(), std::size_t{0});
  return s;
}

}  // namespace

TEST_CASE("zero network gives the zero residual", "[pinn]") {
  const auto s = build_spec(2, 5, Centering::site, 0.05);
  const auto shape = make_shape(2, 7, 7);
  const PinnProblem p = make_problem(s, shape, kFold, -0.3);
  const WeightVector w{Eigen::VectorXd::Zero(shape.parameter_count()), false};
  CHECK(assemble_residual(p, w).cwiseAbs().maxCoeff() == 0.0);
  CHECK(mse(p, w) == 0.0);
}

TEST_CASE("constant network hand values", "[pinn]") {
  const auto s = build_spec(1, 2, Centering::site, 0.05);  // n = 3, one equation
  const auto shape = make_shape(1, 4, 4);
  const PinnProblem p = make_problem(s, shape, kFold, -0.5);
  WeightVector w{Eigen::VectorXd::Zero(shape.parameter_count()), false};
  w.values[shape.b3_offset()] = 1.0;
  const Eigen::VectorXd f = assemble_residual(p, w);
  REQUIRE(f.size() == 1);
  CHECK(f[0] == Approx(0.4).epsilon(1e-14));
  const std::vector<std::size_t> sub{0};
  CHECK(assemble_residual(p, w, &sub)[0] == Approx(0.4).epsilon(1e-14));

  // zero weights: d f / d B3 = mu - 2c (both neighbours on the boundary)
  const WeightVector z{Eigen::VectorXd::Zero(shape.parameter_count()), false};
  CHECK(assemble_jacobian(p, z)(0, shape.b3_offset()) == Approx(-0.6).epsilon(1e-14));
  CHECK(assemble_jacobian(p, z, &sub)(0, shape.b3_offset()) == Approx(-0.6).epsilon(1e-14));

  // larger lattice: mu - 2dc + c * (number of interior neighbours)
  const auto s2 = build_spec(2, 4, Centering::site, 0.05);
  const PinnProblem p2 = make_problem(s2, make_shape(2, 3, 3), kFold, -0.5);
  const Eigen::MatrixXd J2 = assemble_jacobian(p2, WeightVector{Eigen::VectorXd::Zero(p2.network_size()), false});
  for (std::size_t a = 0; a < s2.interior_count(); ++a) {
    const MultiIndex idx = s2.interior_multi(a);
    int inner = 0;
    for (int k = 0; k < 2; ++k)
      for (const int dlt : {-1, 1}) {
        const int j = idx[static_cast<std::size_t>(k)] + dlt;
        if (j > 1 && j < s2.size()) ++inner;
      }
    CHECK(J2(static_cast<Eigen::Index>(a), p2.shape.b3_offset()) == Approx(-0.5 - 4 * 0.05 + 0.05 * inner).epsilon(1e-13));
  }
}

TEST_CASE("augmented column equals the network output", "[pinn]") {
  const auto s = build_spec(1, 10, Centering::bond, 0.05);
  const auto shape = make_shape(1, 4, 4);
  const PinnProblem p = make_problem(s, shape, kFold, std::nullopt);
  const WeightVector w = init_weights(shape, 3).with_extra(-0.2);
  const Eigen::MatrixXd J = assemble_jacobian(p, w);
  CHECK(J.rows() == 18);
  CHECK(J.cols() == 34);
  const StateField u = lattice_state(p, w);
  CHECK((J.col(33) - u.interior()).cwiseAbs().maxCoeff() == 0.0);

  const PinnProblem fixed = make_problem(s, shape, kFold, -0.2);
  CHECK(assemble_jacobian(fixed, w.without_extra()).cols() == 33);
  CHECK_THROWS_AS(assemble_residual(fixed, w), std::invalid_argument);
  CHECK_THROWS_AS(assemble_residual(p, w.without_extra()), std::invalid_argument);
}

TEST_CASE("assembled Jacobians match central differences", "[pinn][property]") {
  std::mt19937_64 rng(23);
  for (int draw = 0; draw < 100; ++draw) {
    const int d = 1 + draw % 3;
    const bool masked = draw % 4 == 3;
    const bool augmented = draw % 2 == 1;
    const bool use_subset = draw % 3 == 2;
    const auto s = build_spec(d, 3 + draw % 3, draw % 5 == 0 ? Centering::bond : Centering::site, 0.05 + 0.1 * (draw % 2));
    const auto shape = make_shape(d, 3 + draw % 3, 3 + draw % 4);
    const InputMode mode{draw % 2 ? InputTransform::fold_sorted : InputTransform::normalized, masked, false};
    const double mu = -0.8 + 0.015 * draw;
    const PinnProblem p = make_problem(s, shape, mode, augmented ? std::nullopt : std::optional<double>(mu));
    WeightVector w{testing::uniform_vector(rng, shape.parameter_count(), -1.0, 1.0), false};
    if (augmented) w = w.with_extra(mu);

    std::vector<std::size_t> sub;
    if (use_subset) sub = sample_subset(s.interior_count(), SubsetSpec{std::min<std::size_t>(7, s.interior_count()), {s.center_interior()}, 1}, draw);
    const std::vector<std::size_t>* sp = use_subset ? &sub : nullptr;

    const Eigen::MatrixXd J = assemble_jacobian(p, w, sp);
    auto f = [&](const Eigen::VectorXd& v) { return assemble_residual(p, WeightVector{v, augmented}, sp); };
    const double err = testing::rel_error(J, testing::fd_jacobian(f, w.values));
    INFO("draw " << draw << " err " << err);
    CHECK(err <= 1e-6);
    CHECK(J.rows() == (use_subset ? static_cast<Eigen::Index>(sub.size()) : static_cast<Eigen::Index>(s.interior_count())));
    CHECK(J.cols() == shape.parameter_count() + (augmented ? 1 : 0));
  }
}

TEST_CASE("subset assembly agrees with full assembly", "[pinn]") {
  for (const bool masked : {false, true}) {
    const auto s = build_spec(5, 3, Centering::site, 0.05);  // 3^5 interior
    const auto shape = make_shape(5, 10, 10);
    const PinnProblem p = make_problem(s, shape, InputMode{InputTransform::fold_sorted, masked, false}, -0.5);
    WeightVector w = init_weights(shape, 5);
    const auto all = all_equations(p);
    const Eigen::VectorXd ff = assemble_residual(p, w);
    const Eigen::VectorXd fs = assemble_residual(p, w, &all);
    CHECK((ff - fs).cwiseAbs().maxCoeff() <= 1e-14);
    const Eigen::MatrixXd Jf = assemble_jacobian(p, w);
    const Eigen::MatrixXd Js = assemble_jacobian(p, w, &all);
    CHECK((Jf - Js).cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("masked boundary neighbours contribute exactly zero", "[pinn]") {
  const auto s = build_spec(5, 3, Centering::site, 0.05);  // n = 5
  const auto shape = make_shape(5, 6, 6);
  const InputMode mode{InputTransform::fold_sorted, true, false};
  const PinnProblem p = make_problem(s, shape, mode, -0.5);
  WeightVector w = init_weights(shape, 2);
  // Equation at (2,3,3,3,3): its neighbour (1,3,3,3,3) lies on the boundary.
  const std::size_t a = static_cast<std::size_t>(s.full_to_interior(s.full_linear({2, 3, 3, 3, 3})));
  const std::vector<std::size_t> sub{a};
  const double f = assemble_residual(p, w, &sub)[0];

  const StateField u = lattice_state(p, w);
  CHECK(u.boundary_is_zero());
  const Eigen::MatrixXd X = transform_lattice(s, InputTransform::fold_sorted);
  CHECK(evaluate(shape, w.values, X.row(static_cast<Eigen::Index>(s.full_linear({1, 3, 3, 3, 3}))), mode, false).output[0] == 0.0);
  const double uc = u.at({2, 3, 3, 3, 3});
  double nb = 0.0;
  for (const MultiIndex& q : {MultiIndex{3, 3, 3, 3, 3}, MultiIndex{2, 2, 3, 3, 3}, MultiIndex{2, 4, 3, 3, 3}, MultiIndex{2, 3, 2, 3, 3},
                              MultiIndex{2, 3, 4, 3, 3}, MultiIndex{2, 3, 3, 2, 3}, MultiIndex{2, 3, 3, 4, 3}, MultiIndex{2, 3, 3, 3, 2},
                              MultiIndex{2, 3, 3, 3, 4}})
    nb += u.at(q);
  const double expect = -0.5 * uc + 0.05 * (nb - 10.0 * uc) + 2.0 * uc * uc * uc - uc * uc * uc * uc * uc;
  CHECK(f == Approx(expect).epsilon(1e-13));
}

TEST_CASE("mse is the mean of squared residuals", "[pinn]") {
  const auto s = build_spec(2, 4, Centering::bond, 0.05);
  const auto shape = make_shape(2, 7, 7);
  const PinnProblem p = make_problem(s, shape, kFold, -0.1);
  const WeightVector w = init_weights(shape, 9);
  const Eigen::VectorXd f = assemble_residual(p, w);
  CHECK(mse(p, w) == f.squaredNorm() / static_cast<double>(f.size()));
}

TEST_CASE("1D fixed-mu solve reaches machine precision", "[pinn][slow]") {
  const auto s = build_spec(1, 10, Centering::site, 0.05);
  const auto shape = make_shape(1, 4, 4);
  const PinnProblem p = make_problem(s, shape, kFold, -0.1);
  LMConfig cfg;
  cfg.max_iter = 1000;
  cfg.residual_tol = 1e-30;
  cfg.step_tol = 1e-16;
  const auto t0 = std::chrono::steady_clock::now();
  const WeightVector w0 = warm_start(p, -0.1);
  const PinnSolve r = solve_fixed_mu(p, w0, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(mse(p, r.weights) <= 1e-20);
  CHECK(r.trace.iterations() <= 1000);
  CHECK(secs <= 10.0);
  // nontrivial localized state
  const StateField u = lattice_state(p, r.weights);
  CHECK(u.at({10}) > 0.1);
  CHECK(u.at({10}) == u.interior().maxCoeff());
  CHECK(std::abs(u.at({2})) < 1e-2);

  const PinnSolve again = solve_fixed_mu(p, warm_start(p, -0.1), cfg);
  CHECK(again.weights.values == r.weights.values);
}

TEST_CASE("solve_fixed_mu needs a fixed mu", "[pinn]") {
  const auto s = build_spec(1, 4, Centering::site, 0.05);
  const auto shape = make_shape(1, 4, 4);
  const PinnProblem p = make_problem(s, shape, kFold, std::nullopt);
  CHECK_THROWS_AS(solve_fixed_mu(p, init_weights(shape, 1).with_extra(0.0), LMConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(make_problem(s, make_shape(2, 4, 4), kFold, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_problem(s, shape, InputMode{InputTransform::fold_sorted, false, true}, 0.0), std::invalid_argument);
}
