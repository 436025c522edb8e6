#include <doctest.h>

#include <numkit/lp.hpp>

using namespace numkit;

TEST_CASE("simplex solves a boxed maximization") {
    // max x + y, x + y <= 1.5, 0 <= via box rows, free vars
    LpProblem p;
    p.objective.resize(2);
    p.objective << 1.0, 1.0;
    p.a_ub.resize(5, 2);
    p.b_ub.resize(5);
    p.a_ub << 1.0, 1.0,   // x + y <= 1.5
        1.0, 0.0,         // x <= 1
        0.0, 1.0,         // y <= 1
        -1.0, 0.0,        // x >= 0
        0.0, -1.0;        // y >= 0
    p.b_ub << 1.5, 1.0, 1.0, 0.0, 0.0;
    auto sol = solve_lp(p);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.objective == doctest::Approx(1.5).epsilon(1e-10));
}

TEST_CASE("simplex with equality constraints and nonnegative variables") {
    // min p + q s.t. p - q = -0.3, p,q >= 0 -> p=0, q=0.3
    LpProblem p;
    p.objective.resize(2);
    p.objective << -1.0, -1.0;
    p.nonneg = {true, true};
    p.a_eq.resize(1, 2);
    p.a_eq << 1.0, -1.0;
    p.b_eq.resize(1);
    p.b_eq << -0.3;
    auto sol = solve_lp(p);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.x(0) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(sol.x(1) == doctest::Approx(0.3).epsilon(1e-10));
}

TEST_CASE("simplex reports infeasible systems") {
    // x >= 0, x <= -1
    LpProblem p;
    p.objective.resize(1);
    p.objective << 1.0;
    p.nonneg = {true};
    p.a_ub.resize(1, 1);
    p.a_ub << 1.0;
    p.b_ub.resize(1);
    p.b_ub << -1.0;
    auto sol = solve_lp(p);
    CHECK(sol.status == LpStatus::infeasible);
}

TEST_CASE("simplex reports unbounded programs") {
    LpProblem p;
    p.objective.resize(1);
    p.objective << 1.0;
    p.nonneg = {true};
    auto sol = solve_lp(p);
    CHECK(sol.status == LpStatus::unbounded);
}

TEST_CASE("degenerate equality rows are tolerated") {
    // duplicated equality row
    LpProblem p;
    p.objective.resize(2);
    p.objective << 0.0, -1.0;
    p.nonneg = {true, true};
    p.a_eq.resize(2, 2);
    p.a_eq << 1.0, 1.0, 1.0, 1.0;
    p.b_eq.resize(2);
    p.b_eq << 1.0, 1.0;
    auto sol = solve_lp(p);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.x(0) == doctest::Approx(1.0));
    CHECK(sol.x(1) == doctest::Approx(0.0));
}
