#include <cmath>
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "mvjump/policy.hpp"

using namespace mvjump;

namespace {

std::shared_ptr<const RiccatiSolution> two_mark_solution() {
    static const auto sol = std::make_shared<const RiccatiSolution>(
        solve(one_asset_model(0.15, 0.25, {{0.4, 0.5}, {-0.4, 0.5}}), 400));
    return sol;
}

std::shared_ptr<const RiccatiSolution> negative_jump_solution() {
    static const auto sol =
        std::make_shared<const RiccatiSolution>(solve(one_asset_model(0.2, 0.3, {{-0.5, 1.0}}), 400));
    return sol;
}

// A solution table with prescribed P-(0), for plug-in checks.
RiccatiSolution with_p_minus0(double pm) {
    RiccatiSolution sol = *two_mark_solution();
    sol.p_minus.front() = pm;
    return sol;
}

}  // namespace

TEST(ValueFunction, ZeroWealthAndTerminalTime) {
    const auto& sol = *two_mark_solution();
    for (double t : {0.0, 0.3, 1.0}) EXPECT_EQ(value_function(t, 0.0, sol), 0.0);
    for (double x : {-2.0, 0.5, 3.0}) EXPECT_EQ(value_function(1.0, x, sol), x * x);
}

TEST(ValueFunction, QuadraticHomogeneity) {
    const auto& sol = *two_mark_solution();
    for (double x : {-1.3, 0.7})
        for (double lam : {0.5, 3.0})
            EXPECT_NEAR(value_function(0.2, lam * x, sol), lam * lam * value_function(0.2, x, sol), 1e-13);
}

TEST(ValueFunction, ContinuousAtZeroAndConvexOnHalfLines) {
    const auto& sol = *two_mark_solution();
    EXPECT_LT(value_function(0.0, 1e-8, sol), 1e-15);
    EXPECT_LT(value_function(0.0, -1e-8, sol), 1e-15);
    for (double s : {1.0, -1.0}) {
        for (double x = 0.1; x < 3.0; x += 0.1) {
            const double a = value_function(0.0, s * (x - 0.1), sol);
            const double b = value_function(0.0, s * x, sol);
            const double c = value_function(0.0, s * (x + 0.1), sol);
            EXPECT_GE(a + c - 2.0 * b, -1e-14);
        }
    }
}

TEST(Lagrangian, PlugIns) {
    const auto& sol = *two_mark_solution();
    EXPECT_EQ(lagrangian_value(1.0, 1.0, sol), 0.0);
    EXPECT_DOUBLE_EQ(lagrangian_value(0.0, 1.0, sol), sol.p_minus0());
    EXPECT_DOUBLE_EQ(lagrangian_value(3.0, 1.0, sol), 4.0 * sol.p_plus0());
}

TEST(DStar, Formula) {
    const auto& sol = *two_mark_solution();
    EXPECT_DOUBLE_EQ(d_star(0.7, 0.7, sol), 0.7);
    EXPECT_DOUBLE_EQ(d_star(0.0, 1.0, with_p_minus0(0.5)), 2.0);
    const double pm = sol.p_minus0();
    EXPECT_NEAR(d_star(0.0, 1.0, sol), 1.0 / (1.0 - pm), 1e-14);
    EXPECT_LE(0.0 - d_star(0.0, 1.0, sol), 0.0);
}

TEST(DStar, MaximizesDualObjective) {
    const auto& sol = *two_mark_solution();
    const double x0 = 0.0, z = 1.0;
    const double ds = d_star(x0, z, sol);
    double best = -1e300, arg = 0.0, prev = -1e300;
    bool rising = true;
    const double h = 1e-4;
    for (double d = z; d <= z + 10.0 * (z - x0); d += h) {
        const double f = dual_objective(x0, z, d, sol);
        if (f > best) best = f, arg = d;
        if (f < prev) rising = false;
        if (!rising) {
            EXPECT_LE(f, prev + 1e-12);  // unimodal
        }
        prev = f;
    }
    EXPECT_NEAR(arg, ds, h);
}

TEST(DStar, Errors) {
    const auto& sol = *two_mark_solution();
    EXPECT_THROW(d_star(1.0, 0.5, sol), DomainError);
    EXPECT_THROW(d_star(0.0, 1.0, with_p_minus0(1.0)), InvariantError);
}

TEST(Feedback, ZeroAtVertex) {
    const auto pol = make_policy(0.0, 1.0, two_mark_solution());
    EXPECT_TRUE(feedback(0.4, pol.d_star, pol).isZero());
}

TEST(Feedback, DoingNothingWhenTargetIsInitialWealth) {
    const auto pol = make_policy(2.0, 2.0, two_mark_solution());
    EXPECT_TRUE(feedback(0.0, 2.0, pol).isZero());
}

TEST(Feedback, NegativeJumpCaseIsLinearBelowVertex) {
    const auto pol = make_policy(0.0, 1.0, negative_jump_solution());
    for (double x : {-1.0, 0.0, 0.5, pol.d_star - 0.01})
        for (double t : {0.0, 0.3337, 1.0})
            EXPECT_NEAR(feedback(t, x, pol)[0], 0.2 / 0.34 * (pol.d_star - x), 1e-9);
}

TEST(Feedback, NoShortingOnRandomStates) {
    const auto pol = make_policy(0.0, 1.0, two_mark_solution());
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> T(0.0, 1.0), X(-20.0, 20.0);
    for (int k = 0; k < 2000; ++k) EXPECT_GE(feedback(T(rng), X(rng), pol).minCoeff(), 0.0);
}

TEST(Frontier, Values) {
    const auto& sol = *two_mark_solution();
    EXPECT_EQ(frontier(1.0, {1.0}, sol).front().variance, 0.0);
    const auto half = with_p_minus0(0.5);
    EXPECT_DOUBLE_EQ(frontier(0.0, {1.0}, half).front().variance, 1.0);
    EXPECT_THROW(frontier(1.0, {0.5}, sol), DomainError);
}

TEST(Frontier, HalfLine) {
    const auto& sol = *two_mark_solution();
    std::vector<double> zs;
    for (int i = 1; i <= 20; ++i) zs.push_back(1.0 + 0.25 * i);
    const auto pts = frontier(1.0, zs, sol);
    const double slope = pts.front().std / (pts.front().z - 1.0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        EXPECT_NEAR(pts[i].std / (pts[i].z - 1.0), slope, 1e-12);
        if (i > 0) {
            EXPECT_GT(pts[i].variance, pts[i - 1].variance);
        }
        if (i > 1) {
            const double d2 = pts[i].variance - 2.0 * pts[i - 1].variance + pts[i - 2].variance;
            EXPECT_NEAR(d2, 2.0 * sol.p_minus0() / (1.0 - sol.p_minus0()) * 0.0625, 1e-10);
        }
    }
}
