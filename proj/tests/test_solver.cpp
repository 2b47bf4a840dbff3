#include "catch_amalgamated.hpp"

#include "lpinn/lattice.hpp"
#include "lpinn/solver.hpp"
#include "support.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

using namespace lpinn;
using Catch::Approx;

TEST_CASE("scalar LM step", "[solver]") {
  LMConfig cfg;
  cfg.lambda0 = 1.0;
  cfg.fixed_damping = true;
  cfg.max_iter = 1;
  auto F = [](const Eigen::VectorXd& x) { return x; };
  auto J = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Ones(1, 1); };
  const SolveResult r = lm_solve(F, J, Eigen::VectorXd::Ones(1), cfg);
  CHECK(r.x[0] == 0.5);
  REQUIRE(r.trace.records.size() == 2);
  CHECK(r.trace.records[1].step_norm == Approx(0.5).epsilon(1e-15));
  CHECK(r.trace.records[1].damping == 1.0);
}

TEST_CASE("zero damping reproduces the Newton step", "[solver]") {
  std::mt19937_64 rng(1);
  Eigen::MatrixXd A(4, 4);
  for (int i = 0; i < 4; ++i) A.row(i) = testing::uniform_vector(rng, 4, -1.0, 1.0).transpose();
  A.diagonal().array() += 3.0;
  const Eigen::VectorXd b = testing::uniform_vector(rng, 4, -1.0, 1.0);
  LMConfig cfg;
  cfg.lambda0 = 0.0;
  cfg.fixed_damping = true;
  cfg.max_iter = 1;
  auto F = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return A * x - b; };
  auto J = [&](const Eigen::VectorXd&) { return A; };
  const SolveResult r = lm_solve(F, J, Eigen::VectorXd::Zero(4), cfg);
  const Eigen::VectorXd exact = A.lu().solve(b);
  CHECK((r.x - exact).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("accepted steps never increase the residual", "[solver]") {
  // Rosenbrock as a residual system.
  auto F = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(2);
    r << 10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0];
    return r;
  };
  auto J = [](const Eigen::VectorXd& x) {
    Eigen::MatrixXd j(2, 2);
    j << -20.0 * x[0], 10.0, -1.0, 0.0;
    return j;
  };
  LMConfig cfg;
  cfg.max_iter = 200;
  cfg.residual_tol = 1e-30;
  const SolveResult r = lm_solve(F, J, Eigen::Vector2d(-1.2, 1.0), cfg);
  CHECK(r.x[0] == Approx(1.0).margin(1e-10));
  CHECK(r.x[1] == Approx(1.0).margin(1e-10));
  for (std::size_t i = 1; i < r.trace.records.size(); ++i) {
    CHECK(r.trace.records[i].batch_mse <= r.trace.records[i - 1].batch_mse);
    CHECK(r.trace.records[i].damping >= cfg.lambda_min);
    CHECK(r.trace.records[i].damping <= cfg.lambda_max);
    CHECK(r.trace.records[i].iter == r.trace.records[i - 1].iter + 1);
  }
}

TEST_CASE("damping cap raises a solver failure", "[solver]") {
  auto F = [](const Eigen::VectorXd& x) { return x; };
  auto wrong = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Constant(1, 1, -1.0); };
  LMConfig cfg;
  cfg.lambda0 = 1e13;
  cfg.up_factor = 10.0;
  try {
    lm_solve(F, wrong, Eigen::VectorXd::Ones(1), cfg);
    FAIL("expected SolverFailure");
  } catch (const SolverFailure& e) {
    CHECK(e.best()[0] == 1.0);
  }

  auto nan = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Constant(1, std::numeric_limits<double>::quiet_NaN()); };
  CHECK_THROWS_AS(lm_solve(nan, wrong, Eigen::VectorXd::Ones(1), cfg), SolverFailure);

  LMConfig bad;
  bad.up_factor = 0.5;
  CHECK_THROWS_AS(lm_solve(F, wrong, Eigen::VectorXd::Ones(1), bad), std::invalid_argument);
}

TEST_CASE("sample_subset", "[solver]") {
  const auto s = build_spec(5, 8, Centering::site, 0.05);
  const std::size_t total = s.interior_count();
  REQUIRE(total == 371293);
  const std::size_t center = s.center_interior();
  CHECK(s.interior_multi(center) == MultiIndex(5, 8));

  const SubsetSpec sub{1001, {center}, 42};
  const auto a = sample_subset(total, sub, 3);
  CHECK(a.size() == 1001);
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 1001);
  CHECK(std::binary_search(a.begin(), a.end(), center));
  CHECK(a.back() < total);
  CHECK(a == sample_subset(total, sub, 3));
  CHECK(a != sample_subset(total, sub, 4));
  CHECK(a != sample_subset(total, SubsetSpec{1001, {center}, 43}, 3));

  const auto full = sample_subset(10, SubsetSpec{10, {4}, 1}, 0);
  for (std::size_t i = 0; i < 10; ++i) CHECK(full[i] == i);

  CHECK_THROWS_AS(sample_subset(10, SubsetSpec{11, {}, 1}, 0), std::invalid_argument);
  CHECK_THROWS_AS(sample_subset(10, SubsetSpec{1, {2, 3}, 1}, 0), std::invalid_argument);
}

TEST_CASE("sample_subset is uniform over the remainder", "[solver]") {
  const std::size_t total = 20;
  const SubsetSpec sub{6, {0, 7}, 5};
  std::vector<int> hits(total, 0);
  const int rounds = 20000;
  for (int k = 0; k < rounds; ++k)
    for (const auto i : sample_subset(total, sub, static_cast<std::uint64_t>(k))) ++hits[i];
  CHECK(hits[0] == rounds);
  CHECK(hits[7] == rounds);
  const double expect = rounds * 4.0 / 18.0;
  for (std::size_t i = 0; i < total; ++i) {
    if (i == 0 || i == 7) continue;
    CHECK(std::abs(hits[i] - expect) < 0.05 * expect);
  }
}

TEST_CASE("full subset matches lm_solve", "[solver]") {
  auto F = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(3);
    r << x[0] * x[0] + x[1] - 2.0, std::sin(x[0]) - 0.5 * x[1], x[0] * x[1] - 0.3;
    return r;
  };
  auto J = [](const Eigen::VectorXd& x) {
    Eigen::MatrixXd j(3, 2);
    j << 2.0 * x[0], 1.0, std::cos(x[0]), -0.5, x[1], x[0];
    return j;
  };
  auto Fs = [&](const Eigen::VectorXd& x, const std::vector<std::size_t>& s) {
    const Eigen::VectorXd r = F(x);
    Eigen::VectorXd out(static_cast<Eigen::Index>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) out[static_cast<Eigen::Index>(i)] = r[static_cast<Eigen::Index>(s[i])];
    return out;
  };
  auto Js = [&](const Eigen::VectorXd& x, const std::vector<std::size_t>& s) {
    const Eigen::MatrixXd j = J(x);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(s.size()), 2);
    for (std::size_t i = 0; i < s.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = j.row(static_cast<Eigen::Index>(s[i]));
    return out;
  };
  LMConfig cfg;
  cfg.max_iter = 50;
  const Eigen::Vector2d x0(0.4, 0.9);
  const SolveResult a = lm_solve(F, J, x0, cfg);
  const SolveResult b = stochastic_lm_solve(Fs, Js, x0, cfg, 3, SubsetSpec{3, {}, 9});
  CHECK(a.x == b.x);
  REQUIRE(a.trace.records.size() == b.trace.records.size());
  for (std::size_t i = 0; i < a.trace.records.size(); ++i) CHECK(a.trace.records[i].damping == b.trace.records[i].damping);
}

TEST_CASE("stochastic LM records the test MSE", "[solver]") {
  // Overdetermined consistent linear system, solved from random row subsets.
  std::mt19937_64 rng(8);
  const Eigen::Index m = 40;
  Eigen::MatrixXd A(m, 3);
  for (Eigen::Index i = 0; i < m; ++i) A.row(i) = testing::uniform_vector(rng, 3, -1.0, 1.0).transpose();
  const Eigen::Vector3d truth(0.3, -1.2, 0.7);
  const Eigen::VectorXd b = A * truth;
  auto Fs = [&](const Eigen::VectorXd& x, const std::vector<std::size_t>& s) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) out[static_cast<Eigen::Index>(i)] = A.row(static_cast<Eigen::Index>(s[i])).dot(x) - b[static_cast<Eigen::Index>(s[i])];
    return out;
  };
  auto Js = [&](const Eigen::VectorXd&, const std::vector<std::size_t>& s) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(s.size()), 3);
    for (std::size_t i = 0; i < s.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = A.row(static_cast<Eigen::Index>(s[i]));
    return out;
  };
  auto test = [&](const Eigen::VectorXd& x) { return (A * x - b).squaredNorm() / static_cast<double>(m); };
  LMConfig cfg;
  cfg.max_iter = 30;
  cfg.test_every = 10;
  const SolveResult r = stochastic_lm_solve(Fs, Js, Eigen::Vector3d::Zero(), cfg, static_cast<std::size_t>(m), SubsetSpec{5, {0}, 2}, test);
  CHECK((r.x - truth).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(r.trace.records.front().full_mse);
  CHECK(r.trace.records.back().full_mse);
  for (std::size_t i = 0; i + 1 < r.trace.records.size(); ++i) CHECK(r.trace.records[i].full_mse.has_value() == (r.trace.records[i].iter % 10 == 0));
  REQUIRE(r.trace.final_full_mse());
  CHECK(*r.trace.final_full_mse() <= 1e-16);

  std::ostringstream os;
  write_trace_csv(os, r.trace);
  CHECK(os.str().rfind("iter,damping,batch_mse,full_mse,step_norm\n", 0) == 0);
}
