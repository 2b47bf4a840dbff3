#include "catch_amalgamated.hpp"

#include "lpinn/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lpinn;
using Catch::Approx;

TEST_CASE("dimension defaults", "[config]") {
  const RunConfig one = resolve_config({});
  CHECK(one.dim == 1);
  CHECK(one.m == 10);
  CHECK(one.spec().interior_count() == 17);
  CHECK(one.shape == make_shape(1, 4, 4));
  CHECK(one.cont.norm_mode());
  CHECK(one.cont.alpha == 10.0);
  CHECK(one.cont.beta1 == 1.0);
  CHECK(one.cont.gamma == Approx(0.01));
  CHECK(one.lm.max_iter == 1000);

  const RunConfig two = resolve_config({{"lattice.dim", "2"}});
  CHECK(two.shape == make_shape(2, 7, 7));
  CHECK(two.cont.arclength_mode());
  CHECK(two.cont.beta1 == Approx(25.0));
  CHECK(two.cont.beta2 == 100.0);
  CHECK(two.cont.delta == 1.0);
  CHECK(two.cont.norm_target == 40.0);

  const RunConfig five = resolve_config({{"lattice.dim", "5"}});
  CHECK(five.spec().interior_count() == 371293);
  CHECK(five.shape.parameter_count() == 181);
  CHECK(five.mu == -0.5);
  REQUIRE(five.subset());
  CHECK(five.subset()->size == 1001);
  CHECK(five.subset()->mandatory == std::vector<std::size_t>{five.spec().center_interior()});
  CHECK(five.input.masked);

  const RunConfig three = resolve_config({{"lattice.dim", "3"}, {"sweep.kind", "width"}});
  CHECK(three.sweep_shapes.size() == 7);

  const RunConfig alpha = resolve_config({{"sweep.kind", "alpha"}});
  REQUIRE(alpha.sweep_values.size() == 11);
  CHECK(alpha.sweep_values.front() == 1e-5);
  CHECK(alpha.sweep_values.back() == 1e5);
  const RunConfig gamma = resolve_config({{"sweep.kind", "gamma"}});
  CHECK(gamma.sweep_values == std::vector<double>{0.1, 10.0 / 300.0, 0.01, 10.0 / 3000.0});
}

TEST_CASE("config grammar", "[config]") {
  const auto e = parse_config_text(
      "# comment\n"
      "[lattice]\n"
      "dim = 2   # trailing comment\n"
      "c=0.15\n"
      "\n"
      "[continuation]\n"
      "norm_target = 12.5\n");
  REQUIRE(e.size() == 3);
  CHECK(e[0] == std::pair<std::string, std::string>{"lattice.dim", "2"});
  const RunConfig r = resolve_config(e);
  CHECK(r.dim == 2);
  CHECK(r.c == 0.15);
  CHECK(r.cont.norm_target == 12.5);

  CHECK_THROWS_AS(parse_config_text("[lattice]\nsize = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("dim = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[lattice\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[lattice]\ndim 2\n"), ConfigError);
}

TEST_CASE("invalid settings are config errors", "[config]") {
  CHECK_THROWS_AS(resolve_config({{"lattice.dim", "6"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"lattice.dim", "two"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"lattice.c", "-1"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"network.shape", "2,4,4,1"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"network.shape", "1,4,4,2"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"network.masked", "maybe"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"continuation.gamma", "0"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"run.annotate", "all"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"subset.size", "100"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"lm.up_factor", "0.5"}}), ConfigError);
}

TEST_CASE("resolved config round trip", "[config]") {
  for (const ConfigEntries& e : {ConfigEntries{},
                                 ConfigEntries{{"lattice.dim", "2"}, {"lattice.centering", "bond"}, {"run.seed", "7"}, {"seed.amplitude", "0.9"}},
                                 ConfigEntries{{"lattice.dim", "3"}, {"sweep.kind", "width"}, {"continuation.mu_offset", "0.05"}},
                                 ConfigEntries{{"sweep.kind", "beta"}, {"lm.residual_tol", "1e-28"}, {"continuation.drop_sqrt", "false"}}}) {
    const RunConfig a = resolve_config(e);
    std::ostringstream first;
    write_config(first, a);
    const RunConfig b = resolve_config(parse_config_text(first.str()));
    std::ostringstream second;
    write_config(second, b);
    CHECK(first.str() == second.str());
    CHECK(b.seed == a.seed);
    CHECK(b.seed_opt.seed == a.seed);
  }
}

TEST_CASE("shipped configs resolve", "[config]") {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(LPINN_CONFIG_DIR)) {
    if (entry.path().extension() != ".ini") continue;
    INFO(entry.path());
    std::ifstream is(entry.path());
    REQUIRE(is);
    CHECK_NOTHROW(resolve_config(parse_config(is)));
    ++count;
  }
  CHECK(count >= 9);
}
