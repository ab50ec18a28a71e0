#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "oracles/oracles.hpp"
#include "test_support.hpp"

#include "delaykern/asymptotic_gains.hpp"
#include "delaykern/errors.hpp"
#include "delaykern/scalar_core.hpp"

using namespace delaykern;

namespace {

double ku(double a, double T) { return stabilizing_upper_bound({a, T, 1.0}).value(); }

}  // namespace

TEST_SUITE("scalar variance") {
  TEST_CASE("open loop variance") {
    const auto c = variance_integral({-1.0, 0.5, 1.0}, 0.0);
    CHECK(c.f_value == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(c.j_value == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(c.branch == CostBranch::below);
  }

  TEST_CASE("boundary branch k = |a|") {
    const auto c = variance_integral({-1.0, 0.5, 1.0}, 1.0);
    CHECK(c.branch == CostBranch::equal);
    CHECK(c.f_value == 0.375);
    CHECK(c.j_value == 0.75);
  }

  TEST_CASE("matches the literal piecewise formula across branches") {
    for (double a : {-3.0, -1.0, -0.2, 0.0, 0.3, 0.9}) {
      for (double T : {0.05, 0.5, 1.0}) {
        if (a * T >= 1.0) continue;
        const double hi = ku(a, T);
        for (int i = 1; i < 12; ++i) {
          const double k = a + (hi - a) * i / 12.0;
          if (a == 0.0 && k == 0.0) continue;
          const double got = variance_integral({a, T, 1.0}, k).f_value;
          CHECK_MESSAGE(rel_err(got, oracle::variance_literal(a, T, k)) < 1e-12,
                        "a=" << a << " T=" << T << " k=" << k);
        }
      }
    }
  }

  TEST_CASE("large |a| T stays finite and accurate") {
    for (double k : {-40.0, 1e-30, 0.001, 30.0}) {
      const double got = variance_integral({-91.0, 1.0, 1.0}, k).f_value;
      CHECK(std::isfinite(got));
      CHECK(rel_err(got, oracle::variance_literal(-91.0, 1.0, k)) < 1e-12);
    }
  }

  TEST_CASE("continuity across k = |a|") {
    for (double a : {-0.5, -1.0, -2.0, -7.0}) {
      const double T = 0.7;
      const ScalarPlant p{a, T, 1.0};
      const double f0 = variance_integral(p, -a).f_value;
      const double slope = detail::variance_and_slope(a, T, -a).df_dk;
      for (double dk : {-1e-7, 1e-7}) {
        const double f = variance_integral(p, -a + dk).f_value;
        CHECK(std::abs(f - (f0 + slope * dk)) < 1e-9);
        CHECK(rel_err(f, oracle::variance_literal(a, T, -a + dk)) < 1e-12);
      }
      CHECK(rel_err(f0, oracle::variance_literal(a, T, -a)) < 1e-15);
    }
  }

  TEST_CASE("slope agrees with a five-point difference") {
    for (double a : {-2.0, -0.5, 0.4}) {
      const double T = 0.8;
      const double hi = ku(a, T);
      for (int i = 1; i < 8; ++i) {
        const double k = a + (hi - a) * i / 8.0;
        const double h = 1e-3;
        auto f = [&](double x) {
          return oracle::variance_literal(oracle::Real(a), oracle::Real(T), oracle::Real(x));
        };
        const double fd = static_cast<double>(
            (f(k - 2 * h) - 8 * f(k - h) + 8 * f(k + h) - f(k + 2 * h)) / (12 * h));
        CHECK(rel_err(detail::variance_and_slope(a, T, k).df_dk, fd) < 1e-8);
      }
    }
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(variance_integral({-1.0, 1.0, 1.0}, -1.5), DomainError);
    CHECK_THROWS_AS(variance_integral({-1.0, 1.0, 1.0}, 10.0), DomainError);
    CHECK_THROWS_AS(variance_integral({1.0, 1.0, 1.0}, 1.0), DomainError);
    CHECK_THROWS_AS(variance_integral({0.0, 1.0, 1.0}, 0.0), BoundaryError);
    CHECK_THROWS_AS(variance_integral({-1.0, -0.1, 1.0}, 0.0), DomainError);
    CHECK_THROWS_AS(variance_integral({-1.0, 0.1, 0.0}, 0.0), DomainError);
  }
}

TEST_SUITE("stabilizing bound") {
  TEST_CASE("a = 0 gives pi/(2T)") {
    for (double T : {0.1, 1.0, 3.0}) {
      CHECK(std::abs(ku(0.0, T) - std::numbers::pi / (2 * T)) < 1e-12 * std::numbers::pi / T);
    }
  }

  TEST_CASE("residual and dense-scan oracle") {
    for (double a : {-5.0, -1.0, 0.0, 0.5, 0.95}) {
      const double T = 1.0;
      const double k = ku(a, T);
      const double res = T * std::sqrt(k * k - a * a) - std::acos(a / k);
      CHECK(std::abs(res) < 1e-12 * std::max(1.0, k));
      CHECK(rel_err(k, oracle::upper_bound_scan(a, T)) < 1e-12);
    }
  }

  TEST_CASE("limits") {
    CHECK(rel_err(ku(1.0 - 1e-6, 1.0), 1.0) < 1e-2);
    const double ratio = ku(-1e4, 1.0) / 1e4;
    CHECK(ratio >= 1.0);
    CHECK(ratio <= 1.01);
    CHECK(rel_err(ku(-1.0, 1e3), 1.0) < 1e-2);
  }

  TEST_CASE("decreasing and midpoint convex in a and in T") {
    const double T = 1.0;
    std::vector<double> v;
    for (int i = 0; i < 50; ++i) v.push_back(ku(-5.0 + 5.9 * i / 49.0, T));
    for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] < v[i - 1]);
    for (std::size_t i = 1; i + 1 < v.size(); ++i) CHECK(v[i] <= 0.5 * (v[i - 1] + v[i + 1]));

    std::vector<double> w;
    for (int i = 0; i < 50; ++i) w.push_back(ku(-0.5, 0.1 + 4.9 * i / 49.0));
    for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] < w[i - 1]);
    for (std::size_t i = 1; i + 1 < w.size(); ++i) CHECK(w[i] <= 0.5 * (w[i - 1] + w[i + 1]));
  }

  TEST_CASE("no delay and unstabilizable") {
    const auto b = stabilizing_upper_bound({-1.0, 0.0, 1.0});
    CHECK_FALSE(b.bounded());
    CHECK(b.above(1e300));
    CHECK_THROWS_AS(b.value(), DomainError);
    CHECK_THROWS_AS(stabilizing_upper_bound({1.0, 1.0, 1.0}), NoSolutionError);
    CHECK_THROWS_AS(stabilizing_upper_bound({2.0, 1.0, 1.0}), NoSolutionError);
  }

  TEST_CASE("implicit derivative") {
    CHECK(rel_err(upper_bound_derivative({0.0, 1.0, 1.0}), -2.0 / std::numbers::pi) < 1e-12);
    const double h = 1e-6;
    const double fd = (ku(-5.0 + h, 1.0) - ku(-5.0 - h, 1.0)) / (2 * h);
    CHECK(rel_err(upper_bound_derivative({-5.0, 1.0, 1.0}), fd) < 1e-5);
    CHECK(upper_bound_derivative({0.5, 1.0, 1.0}) < 0.0);
    CHECK_THROWS_AS(upper_bound_derivative({0.5, 0.0, 1.0}), DomainError);
  }
}

TEST_SUITE("optimal gain") {
  TEST_CASE("delay-free closed form") {
    const auto g = optimal_gain({-1.0, 0.0, 1.0});
    CHECK(g.k == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-15));
  }

  TEST_CASE("agrees with golden-section search on the literal cost") {
    for (double a : {-2.0, -0.5, 0.0, 0.5}) {
      for (double T : {0.2, 1.0}) {
        for (double r : {0.1, 1.0, 10.0}) {
          if (a * T >= 1.0) continue;
          const double hi = ku(a, T);
          const auto g = optimal_gain({a, T, r});
          const double want = oracle::optimal_gain_literal(a, T, r, hi);
          CHECK_MESSAGE(std::abs(g.k - want) < 1e-8 * (hi - a),
                        "a=" << a << " T=" << T << " r=" << r);
          CHECK(g.k > a);
          CHECK(g.k < hi);
          CHECK(g.k <= optimal_gain({a, 0.0, r}).k);
        }
      }
    }
  }

  TEST_CASE("expensive regime") {
    const double k = optimal_gain({-1.0, 1.0, 1000.0}).k;
    const double ratio = k / expensive_gain(-1.0, 1.0, 1000.0).k;
    CHECK(ratio >= 0.95);
    CHECK(ratio <= 1.05);
  }

  TEST_CASE("small delay") {
    const double T = 1e-3;
    const double k = optimal_gain({-1.0, T, 1.0}).k;
    CHECK(std::abs(k - small_delay_gain(-1.0, T, 1.0).k) < 10 * T * T);
  }

  TEST_CASE("resolves exponentially small optima") {
    // J is flat to ~exp(-2|a|T) here; the minimizer sits at ~exp(aT)/(2r|a|).
    for (double a : {-20.0, -60.0, -91.0}) {
      const double r = 1000.0;
      const double k = optimal_gain({a, 1.0, r}).k;
      const double ratio = k / expensive_gain(a, 1.0, r).k;
      CHECK_MESSAGE(ratio > 0.95, "a=" << a << " ratio=" << ratio);
      CHECK_MESSAGE(ratio < 1.05, "a=" << a << " ratio=" << ratio);
    }
  }

  TEST_CASE("unstabilizable") {
    CHECK_THROWS_AS(optimal_gain({1.0, 1.0, 1.0}), NoSolutionError);
  }
}

TEST_SUITE("region boundaries") {
  TEST_CASE("delay-free row") {
    const std::vector<double> a{-1.0};
    const auto rows = region_boundaries(a, 0.0);
    REQUIRE(rows.size() == 1);
    CHECK_FALSE(rows[0].k_upper.has_value());
    CHECK_FALSE(rows[0].k_cheap.has_value());
    REQUIRE(rows[0].k_expensive.has_value());
    CHECK(*rows[0].k_expensive == 0.0);
  }

  TEST_CASE("expensive boundary is the grid minimizer of k^2 f") {
    const double a = -2.0;
    const double T = 1.0;
    const std::vector<double> grid{a};
    const auto rows = region_boundaries(grid, T);
    const double hi = ku(a, T);
    const double want = oracle::grid_argmin(
        [&](double k) { return k * k * oracle::variance_literal(a, T, k); }, a + 1e-6, hi - 1e-6,
        20000);
    REQUIRE(rows[0].k_expensive.has_value());
    CHECK(std::abs(*rows[0].k_expensive - want) < 2 * (hi - a) / 20000);
  }

  TEST_CASE("a = 0 boundaries inside (0, pi/2)") {
    const std::vector<double> grid{0.0};
    const auto row = region_boundaries(grid, 1.0)[0];
    for (auto v : {row.k_upper, row.k_cheap, row.k_expensive}) {
      REQUIRE(v.has_value());
      CHECK(*v > 0.0);
      CHECK(*v <= std::numbers::pi / 2 + 1e-12);
    }
    CHECK(*row.k_cheap < *row.k_upper);
  }

  TEST_CASE("nesting and missing rows") {
    std::vector<double> grid;
    for (int i = 0; i < 30; ++i) grid.push_back(-6.0 + 7.5 * i / 29.0);
    const auto rows = region_boundaries(grid, 1.0);
    for (const auto& row : rows) {
      if (row.a * 1.0 >= 1.0) {
        CHECK_FALSE(row.k_upper.has_value());
        CHECK_FALSE(row.note.empty());
        continue;
      }
      REQUIRE(row.k_cheap.has_value());
      CHECK(*row.k_expensive <= *row.k_cheap);
      CHECK(*row.k_cheap < *row.k_upper);
      CHECK(*row.k_cheap == doctest::Approx(oracle::optimal_gain_literal(row.a, 1.0, 0.0, *row.k_upper))
                               .epsilon(1e-6));
    }
  }
}
