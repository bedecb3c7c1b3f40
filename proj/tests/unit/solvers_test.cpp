/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 The cfpc Authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace cfpc;
using cfpc::testkit::random_instance;
using cfpc::testkit::symmetric_coeffs;

TEST(MaxMin, SingleUserUsesFullPower)
{
    const auto in = random_instance(1, 5, 3);
    const auto r = solve_maxmin(in.coeffs);
    EXPECT_EQ(r.eta[0], 1.0);
    const auto& c = in.coeffs;
    EXPECT_DOUBLE_EQ(r.objective_value, c.rho * c.a(0) / (c.rho * c.u(0, 0) + c.n(0)));
}

TEST(MaxMin, SymmetricUsersGetEqualFullPower)
{
    const auto c = symmetric_coeffs(2);
    const auto r = solve_maxmin(c);
    EXPECT_NEAR(r.eta[0], 1.0, 1e-6);
    EXPECT_NEAR(r.eta[1], 1.0, 1e-6);
    const Vec s = sinr(c, r.eta);
    EXPECT_NEAR(s(0), s(1), 1e-9);
}

TEST(MaxMin, MatchesGridOracle)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto in = random_instance(2, 5, seed);
        const auto r = solve_maxmin(in.coeffs);
        const auto grid = brute_force(in.coeffs, Objective::maxmin, 0.01);
        EXPECT_GE(r.objective_value, grid.objective_value - 1e-3) << "seed " << seed;
        EXPECT_NEAR(sinr(in.coeffs, r.eta).minCoeff(), r.objective_value, 1e-12);
    }
}

TEST(MaxMin, BisectionBracketsTheOptimum)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto in = random_instance(5, 12, seed);
        const double tol = 1e-4;
        const auto r = solve_maxmin(in.coeffs, tol);
        // anything clearly above the returned value is infeasible
        EXPECT_FALSE(feasibility_fixed_point(in.coeffs, r.objective_value * (1 + 10 * tol)).feasible);
        EXPECT_TRUE(feasibility_fixed_point(in.coeffs, r.objective_value * (1 - tol)).feasible);
        EXPECT_LE(r.eta.eta().maxCoeff(), 1.0);
    }
}

TEST(Feasibility, ZeroTarget)
{
    const auto in = random_instance(4, 8, 1);
    const auto r = feasibility_fixed_point(in.coeffs, 0.0);
    EXPECT_TRUE(r.feasible);
    EXPECT_TRUE(r.eta.isZero());
    EXPECT_THROW(feasibility_fixed_point(in.coeffs, -1.0), ConfigError);
}

TEST(Feasibility, AboveSingleUserBoundIsInfeasible)
{
    const auto in = random_instance(4, 8, 2);
    const auto& c = in.coeffs;
    const double bound = (c.rho * c.a.array() / c.n.array()).maxCoeff();
    const auto r = feasibility_fixed_point(c, bound * 1.01);
    EXPECT_FALSE(r.feasible);
    EXPECT_EQ(r.status, FeasibilityStatus::exceeds_box);
}

TEST(Feasibility, ConsistentWithBisection)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto in = random_instance(3, 10, seed);
        const double t = 0.9 * solve_maxmin(in.coeffs).objective_value;
        const auto r = feasibility_fixed_point(in.coeffs, t);
        ASSERT_TRUE(r.feasible);
        EXPECT_LE(r.eta.maxCoeff(), 1.0);
        EXPECT_GE(sinr(in.coeffs, PowerAllocation(r.eta)).minCoeff(), t * (1 - 1e-9));
    }
}

TEST(Feasibility, IteratesAreNonDecreasing)
{
    const auto in = random_instance(6, 15, 4);
    const double t = 0.95 * solve_maxmin(in.coeffs).objective_value;
    Vec prev = Vec::Zero(6);
    for (int it = 1; it < 60; ++it) {
        const auto r = feasibility_fixed_point(in.coeffs, t, it);
        EXPECT_TRUE((r.eta.array() >= prev.array()).all()) << "iteration " << it;
        prev = r.eta;
        if (r.feasible) break;
    }
}

TEST(Feasibility, MaxIterDeclaredInfeasible)
{
    const auto in = random_instance(6, 15, 4);
    const double t = 0.95 * solve_maxmin(in.coeffs).objective_value;
    const auto r = feasibility_fixed_point(in.coeffs, t, 1);
    EXPECT_FALSE(r.feasible);
    EXPECT_EQ(r.status, FeasibilityStatus::max_iter);
}

TEST(Solvers, NonFiniteCoefficientsRejected)
{
    auto c = symmetric_coeffs(2);
    c.n(0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(solve_maxmin(c), NumericalError);
    EXPECT_THROW(solve_weighted(c, Objective::sum_rate), NumericalError);
    EXPECT_THROW(make_sinr_coefficients(c.a, c.d, c.u, c.n, c.rho), NumericalError);
}

TEST(Weighted, SingleUserUsesFullPower)
{
    const auto in = random_instance(1, 5, 9);
    for (auto obj : {Objective::sum_rate, Objective::product}) {
        const auto r = solve_weighted(in.coeffs, obj);
        EXPECT_EQ(r.eta[0], 1.0);
        EXPECT_TRUE(r.converged);
    }
}

TEST(Weighted, WithinOnePercentOfGridOracle)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto in = random_instance(2, 5, seed);
        for (auto obj : {Objective::sum_rate, Objective::product}) {
            const auto r = solve_weighted(in.coeffs, obj);
            const auto grid = brute_force(in.coeffs, obj, 0.01);
            EXPECT_GE(r.objective_value, grid.objective_value - 0.01 * std::abs(grid.objective_value))
                << to_string(obj) << " seed " << seed;
        }
    }
}

TEST(Weighted, AscentNeverDecreasesObjective)
{
    const auto in = random_instance(6, 12, 5);
    for (auto obj : {Objective::sum_rate, Objective::product}) {
        WeightedConfig cfg;
        cfg.multistarts = 1;
        double prev = -std::numeric_limits<double>::infinity();
        for (int it = 1; it <= 40; ++it) {
            cfg.max_iter = it;
            const auto r = solve_weighted(in.coeffs, obj, cfg);
            EXPECT_GE(r.objective_value, prev - 1e-12 * std::abs(prev));
            prev = r.objective_value;
        }
    }
}

TEST(Weighted, ReportsKktResidualAndStaysInBox)
{
    const auto in = random_instance(8, 20, 6);
    const auto r = solve_weighted(in.coeffs, Objective::product);
    EXPECT_GE(r.eta.eta().minCoeff(), 1e-6);
    EXPECT_LE(r.eta.eta().maxCoeff(), 1.0);
    EXPECT_DOUBLE_EQ(r.objective_value, objective_value(in.coeffs, r.eta.eta(), Objective::product));
    EXPECT_LT(r.kkt_residual, 1e-3);
    EXPECT_THROW(solve_weighted(in.coeffs, Objective::maxmin), ConfigError);
}

TEST(BruteForce, Examples)
{
    const auto one = random_instance(1, 4, 1);
    for (auto obj : {Objective::maxmin, Objective::sum_rate, Objective::product})
        EXPECT_EQ(brute_force(one.coeffs, obj, 0.1).eta[0], 1.0);

    const auto sym = brute_force(symmetric_coeffs(2), Objective::maxmin, 0.05);
    EXPECT_EQ(sym.eta[0], 1.0);
    EXPECT_EQ(sym.eta[1], 1.0);

    const auto in = random_instance(3, 6, 2);
    for (auto obj : {Objective::maxmin, Objective::sum_rate, Objective::product}) {
        const auto r = brute_force(in.coeffs, obj, 0.05);
        EXPECT_LE(std::abs(objective_value(in.coeffs, r.eta.eta(), obj) - r.objective_value),
                  1e-12 * std::abs(r.objective_value));
    }
}

TEST(BruteForce, RefusesLargeOrMisalignedGrids)
{
    const auto in = random_instance(5, 6, 2);
    EXPECT_THROW(brute_force(in.coeffs, Objective::maxmin, 0.1), ConfigError);
    const auto small = random_instance(2, 6, 2);
    EXPECT_THROW(brute_force(small.coeffs, Objective::maxmin, 0.3), ConfigError);
}

TEST(BruteForce, TiesKeepLexicographicallySmallest)
{
    // Zero coupling: user 0's SINR depends only on its own power, user 1 is capped low.
    Mat u = Mat::Identity(2, 2);
    u(0, 1) = u(1, 0) = 1e-12;
    const auto c = make_sinr_coefficients(Vec::Constant(2, 1.0), Mat::Zero(2, 2), u, Vec::Constant(2, 1.0), 1.0);
    // max-min is limited by the weaker user; many eta_0 values tie once user 0 exceeds it
    Mat u2 = u;
    const auto weak = make_sinr_coefficients((Vec(2) << 100.0, 1.0).finished(), Mat::Zero(2, 2), u2,
                                             Vec::Constant(2, 1.0), 1.0);
    const auto r = brute_force(weak, Objective::maxmin, 0.1);
    // min SINR is user 1's value at eta_1 = 1 for any eta_0 large enough; the smallest such eta_0 wins
    EXPECT_EQ(r.eta[1], 1.0);
    const double target = sinr(weak, r.eta).minCoeff();
    for (int i = 0; i < 10 && i / 10.0 < r.eta[0] - 1e-12; ++i) {
        Vec e(2);
        e << i / 10.0, 1.0;
        EXPECT_LT(objective_value(weak, e, Objective::maxmin), target);
    }
    (void)c;
}

TEST(Solvers, SymmetricInstancesGiveEqualPower)
{
    const auto c = symmetric_coeffs(3);
    EXPECT_NEAR((solve_maxmin(c).eta.eta().array() - 1.0).abs().maxCoeff(), 0.0, 1e-6);
    for (auto obj : {Objective::sum_rate, Objective::product}) {
        const Vec eta = solve_weighted(c, obj).eta.eta();
        EXPECT_NEAR(eta.maxCoeff() - eta.minCoeff(), 0.0, 1e-6);
    }
    const auto bf = brute_force(c, Objective::sum_rate, 0.05);
    EXPECT_EQ(bf.eta.eta(), Vec::Ones(3));
}

TEST(Solvers, ReportSerializes)
{
    const auto r = solve_maxmin(symmetric_coeffs(2));
    const nlohmann::json j = r;
    EXPECT_EQ(j.at("eta").size(), 2u);
    EXPECT_TRUE(j.at("converged").get<bool>());
    EXPECT_GE(j.at("wall_time").get<double>(), 0.0);
}
