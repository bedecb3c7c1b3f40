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

/**
 * @file solvers.hpp
 * @brief Optimization baselines for uplink power control: bisection max-min
 * with an interference-function feasibility test, projected gradient ascent
 * for sum-rate and product objectives, and an exhaustive grid oracle.
 */

#pragma once

#include "cfpc/common.hpp"
#include "cfpc/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace cfpc {

enum class Objective { maxmin, sum_rate, product };

inline std::string to_string(Objective o)
{
    switch (o) {
    case Objective::maxmin: return "maxmin";
    case Objective::sum_rate: return "sum_rate";
    case Objective::product: return "product";
    }
    return "?";
}

/// maxmin: min_k SINR_k; sum_rate: sum_k log2(1 + SINR_k);
/// product: sum_k ln SINR_k (log of the SINR product).
inline double objective_value(const SinrCoefficients& c, const Vec& eta, Objective obj)
{
    const Vec s = detail::sinr_raw(c, eta);
    switch (obj) {
    case Objective::maxmin: return s.minCoeff();
    case Objective::sum_rate: return (s.array().log1p() / std::log(2.0)).sum();
    case Objective::product: return s.array().log().sum();
    }
    return 0.0;
}

struct SolveReport {
    PowerAllocation eta;
    double objective_value = 0.0;
    int iterations = 0;
    bool converged = false;
    double wall_time = 0.0; // seconds
    double kkt_residual = 0.0;
};

inline void to_json(nlohmann::json& j, const SolveReport& r)
{
    j = nlohmann::json{{"eta", std::vector<double>(r.eta.eta().data(), r.eta.eta().data() + r.eta.size())},
                       {"objective_value", r.objective_value},
                       {"iterations", r.iterations},
                       {"converged", r.converged},
                       {"wall_time", r.wall_time},
                       {"kkt_residual", r.kkt_residual}};
}

namespace detail {

class Stopwatch {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline void require_finite(const SinrCoefficients& c)
{
    if (!c.a.allFinite() || !c.interference.allFinite() || !c.n.allFinite() || !std::isfinite(c.rho))
        throw NumericalError("solver: non-finite SINR coefficients");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Max-min
// ---------------------------------------------------------------------------

enum class FeasibilityStatus { converged, exceeds_box, max_iter };

struct FeasibilityResult {
    bool feasible = false;
    Vec eta;
    int iterations = 0;
    FeasibilityStatus status = FeasibilityStatus::converged;
};

/// Decides whether every UE can reach SINR >= target inside the box.
///
/// Iterates eta <- target / (rho a) * (rho * interference * eta + n) from zero.
/// The map is a standard interference function, so iterates are componentwise
/// non-decreasing and reach the minimal fixed point when one exists. Leaving
/// the box proves infeasibility; running out of iterations is reported as
/// infeasible with status max_iter. `eta` holds the last iterate.
inline FeasibilityResult feasibility_fixed_point(const SinrCoefficients& c, double target, int max_iter = 500,
                                                 double box_tol = 1e-10)
{
    if (!(target >= 0.0) || !std::isfinite(target)) throw ConfigError("feasibility: target must be finite and >= 0");
    const auto K = c.a.size();
    FeasibilityResult r;
    r.eta = Vec::Zero(K);
    if (target == 0.0) {
        r.feasible = true;
        return r;
    }
    const Vec gain = (target / (c.rho * c.a.array())).matrix();
    for (int it = 1; it <= max_iter; ++it) {
        Vec next = (gain.array() * detail::sinr_denominator(c, r.eta).array()).matrix();
        r.iterations = it;
        if ((next.array() > 1.0 + box_tol).any()) {
            r.eta = std::move(next);
            r.status = FeasibilityStatus::exceeds_box;
            return r;
        }
        const double step = (next - r.eta).cwiseAbs().maxCoeff();
        r.eta = std::move(next);
        if (step <= 1e-13) {
            r.feasible = true;
            r.eta = r.eta.cwiseMin(1.0);
            return r;
        }
    }
    r.status = FeasibilityStatus::max_iter;
    return r;
}

/// Bisection on the common SINR target over [0, max_k rho a_k / n_k]; `tol`
/// is relative to the current upper bracket. The feasible allocation found
/// at the lower bracket is scaled so its largest entry is 1, which raises
/// every SINR.
inline SolveReport solve_maxmin(const SinrCoefficients& c, double tol = 1e-4, int max_iter = 500)
{
    if (!(tol > 0.0)) throw ConfigError("solve_maxmin: tol must be > 0");
    detail::require_finite(c);
    detail::Stopwatch clock;

    double lo = 0.0;
    double hi = (c.rho * c.a.array() / c.n.array()).maxCoeff();
    Vec best = Vec::Zero(c.a.size());
    int iterations = 0;
    while (hi - lo > tol * hi) {
        const double mid = 0.5 * (lo + hi);
        auto fp = feasibility_fixed_point(c, mid, max_iter);
        if (fp.feasible) {
            lo = mid;
            best = std::move(fp.eta);
        } else {
            hi = mid;
        }
        ++iterations;
    }
    const double peak = best.maxCoeff();
    Vec eta = peak > 0.0 ? Vec(best / peak) : Vec(Vec::Ones(c.a.size()));
    eta = eta.cwiseMin(1.0).cwiseMax(0.0);

    SolveReport rep;
    rep.objective_value = objective_value(c, eta, Objective::maxmin);
    rep.eta = PowerAllocation(std::move(eta));
    rep.iterations = iterations;
    rep.converged = true;
    rep.wall_time = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// Sum-rate / product: projected gradient ascent
// ---------------------------------------------------------------------------

struct WeightedConfig {
    int multistarts = 8;
    int max_iter = 1000;
    double armijo_shrink = 0.5;
    double armijo_slope = 1e-4;
    double floor = 1e-6; // lower box bound on eta
    double kkt_tol = 1e-9;
    std::uint64_t seed = 0;
};

namespace detail {

inline Vec objective_gradient(const SinrCoefficients& c, const Vec& eta, Objective obj)
{
    const Vec s = sinr_raw(c, eta);
    Vec w;
    if (obj == Objective::sum_rate)
        w = (1.0 / ((1.0 + s.array()) * std::log(2.0))).matrix();
    else
        w = s.array().inverse().matrix();
    return sinr_vjp(c, eta, w);
}

struct AscentResult {
    Vec eta;
    double value = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    double kkt = std::numeric_limits<double>::infinity();
};

inline AscentResult projected_ascent(const SinrCoefficients& c, Vec eta, Objective obj, const WeightedConfig& cfg)
{
    auto project = [&](const Vec& v) { return Vec(v.cwiseMax(cfg.floor).cwiseMin(1.0)); };
    AscentResult r;
    r.eta = project(eta);
    r.value = objective_value(c, r.eta, obj);
    double step = 1.0;
    int flat = 0;
    for (int it = 0; it < cfg.max_iter; ++it) {
        const Vec g = objective_gradient(c, r.eta, obj);
        if (!g.allFinite()) break;
        r.kkt = (project(r.eta + g) - r.eta).cwiseAbs().maxCoeff();
        if (r.kkt <= cfg.kkt_tol) {
            r.converged = true;
            break;
        }
        double s = std::min(step * 2.0, 1e12);
        bool accepted = false;
        Vec cand;
        double fc = 0.0;
        while (s > 1e-20) {
            cand = project(r.eta + s * g);
            fc = objective_value(c, cand, obj);
            if (std::isfinite(fc) && fc >= r.value + cfg.armijo_slope * g.dot(cand - r.eta)) {
                accepted = true;
                break;
            }
            s *= cfg.armijo_shrink;
        }
        r.iterations = it + 1;
        if (!accepted) break;
        step = s;
        const double gain = fc - r.value;
        r.eta = std::move(cand);
        r.value = fc;
        flat = gain <= 1e-14 * std::max(1.0, std::abs(fc)) ? flat + 1 : 0;
        if (flat >= 5) {
            r.kkt = (project(r.eta + objective_gradient(c, r.eta, obj)) - r.eta).cwiseAbs().maxCoeff();
            r.converged = true;
            break;
        }
    }
    return r;
}

} // namespace detail

/// Maximizes sum_k log2(1 + SINR_k) or sum_k ln SINR_k over [floor, 1]^K by
/// projected gradient ascent with Armijo backtracking. Starts: all-ones,
/// 0.5, 0.1, then random points; the best end point is returned.
inline SolveReport solve_weighted(const SinrCoefficients& c, Objective obj, const WeightedConfig& cfg = {})
{
    if (obj == Objective::maxmin) throw ConfigError("solve_weighted: use solve_maxmin for the max-min objective");
    if (cfg.multistarts < 1 || cfg.max_iter < 1 || !(cfg.floor > 0.0) || cfg.floor >= 1.0 ||
        !(cfg.armijo_shrink > 0.0 && cfg.armijo_shrink < 1.0) || !(cfg.armijo_slope > 0.0 && cfg.armijo_slope < 1.0))
        throw ConfigError("solve_weighted: invalid config");
    detail::require_finite(c);
    detail::Stopwatch clock;

    const auto K = c.a.size();
    auto rng = make_rng(cfg.seed, "multistart");
    std::uniform_real_distribution<double> unif(cfg.floor, 1.0);

    detail::AscentResult best;
    bool have = false;
    int total_iter = 0;
    for (int s = 0; s < cfg.multistarts; ++s) {
        Vec start(K);
        if (s == 0) start.setOnes();
        else if (s == 1) start.setConstant(0.5);
        else if (s == 2) start.setConstant(0.1);
        else
            for (Eigen::Index k = 0; k < K; ++k) start(k) = unif(rng);
        auto r = detail::projected_ascent(c, std::move(start), obj, cfg);
        total_iter += r.iterations;
        if (!have || r.value > best.value) {
            best = std::move(r);
            have = true;
        }
    }

    SolveReport rep;
    rep.eta = PowerAllocation(best.eta);
    rep.objective_value = objective_value(c, best.eta, obj);
    rep.iterations = total_iter;
    rep.converged = best.converged;
    rep.kkt_residual = best.kkt;
    rep.wall_time = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// Grid oracle
// ---------------------------------------------------------------------------

inline constexpr int kBruteForceMaxUes = 4;

/// Exhaustive search over the uniform grid {0, step, ..., 1}^K ({step, ..., 1}^K
/// for the product objective, whose value is -inf at zero power). Ties keep
/// the lexicographically smallest point.
inline SolveReport brute_force(const SinrCoefficients& c, Objective obj, double grid_step)
{
    const int K = c.num_ues();
    if (K > kBruteForceMaxUes)
        throw ConfigError("brute_force: K = " + std::to_string(K) + " exceeds limit " +
                          std::to_string(kBruteForceMaxUes));
    if (!(grid_step > 0.0) || grid_step > 1.0) throw ConfigError("brute_force: grid_step must be in (0, 1]");
    const int n = static_cast<int>(std::lround(1.0 / grid_step));
    if (std::abs(n * grid_step - 1.0) > 1e-9) throw ConfigError("brute_force: 1 / grid_step must be an integer");
    detail::require_finite(c);
    detail::Stopwatch clock;

    const int first = obj == Objective::product ? 1 : 0;
    auto level = [n](int i) { return i == n ? 1.0 : static_cast<double>(i) / n; };

    std::vector<int> idx(static_cast<std::size_t>(K), first);
    Vec eta(K);
    Vec best_eta(K);
    double best = -std::numeric_limits<double>::infinity();
    bool have = false;
    int evaluations = 0;
    for (;;) {
        for (int k = 0; k < K; ++k) eta(k) = level(idx[static_cast<std::size_t>(k)]);
        const double v = objective_value(c, eta, obj);
        ++evaluations;
        if (!have || v > best) {
            best = v;
            best_eta = eta;
            have = true;
        }
        // odometer: last coordinate varies fastest
        int k = K - 1;
        while (k >= 0 && idx[static_cast<std::size_t>(k)] == n) idx[static_cast<std::size_t>(k--)] = first;
        if (k < 0) break;
        ++idx[static_cast<std::size_t>(k)];
    }

    SolveReport rep;
    rep.eta = PowerAllocation(best_eta);
    rep.objective_value = best;
    rep.iterations = evaluations;
    rep.converged = true;
    rep.wall_time = clock.seconds();
    return rep;
}

} // namespace cfpc
