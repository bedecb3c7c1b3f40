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
 * @file scenario.hpp
 * @brief Random cell-free network realizations: node placement on a wrapped
 * square, three-slope pathloss with log-normal shadowing, pilot assignment
 * and the LMMSE channel-estimate statistics.
 */

#pragma once

#include "cfpc/common.hpp"
#include "cfpc/params.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace cfpc {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Euclidean distance on the torus obtained by wrapping a square of the given
/// side at its edges.
inline double wrap_distance(Point2 p, Point2 q, double side)
{
    auto axis = [side](double a, double b) {
        const double d = std::abs(a - b);
        return std::min(d, side - d);
    };
    return std::hypot(axis(p.x, q.x), axis(p.y, q.y));
}

/// Three-slope pathloss in dB (negative), distance in km.
inline double path_loss_db(double d_km, const PathLossModel& m)
{
    if (d_km > m.d1_km) return -m.l_const_db - 35.0 * std::log10(d_km);
    const double near = -m.l_const_db - 15.0 * std::log10(m.d1_km);
    if (d_km > m.d0_km) return near - 20.0 * std::log10(d_km);
    return near - 20.0 * std::log10(m.d0_km);
}

inline double path_loss_db(double d_km, const SystemParams& params) { return path_loss_db(d_km, params.pathloss); }

/// One network realization. beta_db is the source of truth; beta is
/// db_to_linear(beta_db) elementwise, so a scenario rebuilt from its stored dB
/// values is bit-identical.
struct Scenario {
    std::vector<Point2> ap_positions;
    std::vector<Point2> ue_positions;
    Mat beta_db;                  // K x L
    Mat beta;                     // K x L, linear
    std::vector<int> pilot_index; // pilot used by each UE
    Mat pilot_xcorr;              // K x K, |phi_k^H phi_k'|^2
    std::uint64_t seed = 0;

    int num_ues() const { return static_cast<int>(beta.rows()); }
    int num_aps() const { return static_cast<int>(beta.cols()); }
};

/// Pilot indices into a set of tau_p orthonormal sequences.
inline std::vector<int> assign_pilot_indices(int num_ues, int tau_p, PilotMode mode, std::uint64_t seed)
{
    if (num_ues < 1 || tau_p < 1) throw ConfigError("assign_pilots: num_ues and tau_p must be >= 1");
    std::vector<int> idx(static_cast<std::size_t>(num_ues));
    if (mode == PilotMode::orthogonal) {
        if (num_ues > tau_p)
            throw ConfigError("assign_pilots: " + std::to_string(num_ues) + " UEs cannot share " +
                              std::to_string(tau_p) + " orthogonal pilots");
        for (int k = 0; k < num_ues; ++k) idx[static_cast<std::size_t>(k)] = k;
        return idx;
    }
    auto rng = make_rng(seed, "pilots");
    std::uniform_int_distribution<int> pick(0, tau_p - 1);
    for (auto& i : idx) i = pick(rng);
    return idx;
}

inline Mat pilot_xcorr_from_indices(const std::vector<int>& idx)
{
    const auto k = static_cast<Eigen::Index>(idx.size());
    Mat x(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j)
            x(i, j) = idx[static_cast<std::size_t>(i)] == idx[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
    return x;
}

inline Mat assign_pilots(int num_ues, int tau_p, PilotMode mode, std::uint64_t seed)
{
    return pilot_xcorr_from_indices(assign_pilot_indices(num_ues, tau_p, mode, seed));
}

/// Rebuilds a scenario from stored LSF values (dB) and pilot indices.
inline Scenario scenario_from_lsf(Mat beta_db, std::vector<int> pilot_index, std::uint64_t seed,
                                  std::vector<Point2> aps = {}, std::vector<Point2> ues = {})
{
    if (beta_db.rows() != static_cast<Eigen::Index>(pilot_index.size()))
        throw ConfigError("scenario: pilot_index length does not match number of UEs");
    if (beta_db.size() == 0 || !beta_db.allFinite()) throw ConfigError("scenario: beta_db must be non-empty and finite");
    Scenario s;
    s.beta = beta_db.unaryExpr([](double v) { return db_to_linear(v); });
    if (!(s.beta.array() > 0.0).all() || !s.beta.allFinite())
        throw NumericalError("scenario: beta out of range of double precision");
    s.beta_db = std::move(beta_db);
    s.pilot_xcorr = pilot_xcorr_from_indices(pilot_index);
    s.pilot_index = std::move(pilot_index);
    s.ap_positions = std::move(aps);
    s.ue_positions = std::move(ues);
    s.seed = seed;
    return s;
}

/// Draws one realization. Positions, shadowing and pilots each use their own
/// substream of `seed` ("positions", "shadowing", "pilots").
inline Scenario generate_scenario(const SystemParams& params, std::uint64_t seed)
{
    params.validate();
    const int K = params.num_ues;
    const int L = params.num_aps;
    const double side = params.area_side_km;

    auto pos_rng = make_rng(seed, "positions");
    std::uniform_real_distribution<double> coord(0.0, side);
    auto draw = [&] {
        auto c = [&] {
            double v = coord(pos_rng);
            return v >= side ? v - side : v;
        };
        const double x = c();
        return Point2{x, c()};
    };
    std::vector<Point2> aps(static_cast<std::size_t>(L));
    std::vector<Point2> ues(static_cast<std::size_t>(K));
    for (auto& p : aps) p = draw();
    for (auto& p : ues) p = draw();

    auto sh_rng = make_rng(seed, "shadowing");
    std::normal_distribution<double> z(0.0, 1.0);
    Mat beta_db(K, L);
    for (int k = 0; k < K; ++k) {
        for (int l = 0; l < L; ++l) {
            const double pl = path_loss_db(wrap_distance(ues[static_cast<std::size_t>(k)],
                                                         aps[static_cast<std::size_t>(l)], side),
                                           params.pathloss);
            beta_db(k, l) = pl + params.sigma_sh_db * z(sh_rng);
        }
    }
    return scenario_from_lsf(std::move(beta_db), assign_pilot_indices(K, params.tau_p, params.pilot_mode, seed), seed,
                             std::move(aps), std::move(ues));
}

/// LMMSE scaling c and estimate second moment gamma, both K x L.
struct ChannelStats {
    Mat c;
    Mat gamma;
};

inline ChannelStats channel_stats(const Scenario& s, const SystemParams& params)
{
    const double tr = params.tau_p * params.rho_p;
    const double sqrt_tr = std::sqrt(tr);
    ChannelStats out;
    const Mat denom = (tr * (s.pilot_xcorr * s.beta)).array() + 1.0;
    out.c = (sqrt_tr * s.beta.array() / denom.array()).matrix();
    out.gamma = (sqrt_tr * s.beta.array() * out.c.array()).matrix();
    return out;
}

// JSON replay document. Positions in km, LSF in dB.

inline constexpr int kScenarioFormatVersion = 1;

inline nlohmann::json scenario_to_json(const Scenario& s)
{
    auto pts = [](const std::vector<Point2>& v) {
        auto a = nlohmann::json::array();
        for (const auto& p : v) a.push_back({p.x, p.y});
        return a;
    };
    auto rows = nlohmann::json::array();
    for (Eigen::Index k = 0; k < s.beta_db.rows(); ++k) {
        std::vector<double> r(static_cast<std::size_t>(s.beta_db.cols()));
        for (Eigen::Index l = 0; l < s.beta_db.cols(); ++l) r[static_cast<std::size_t>(l)] = s.beta_db(k, l);
        rows.push_back(r);
    }
    return {
        {"format", "cfpc-scenario"},
        {"version", kScenarioFormatVersion},
        {"seed", s.seed},
        {"num_ues", s.num_ues()},
        {"num_aps", s.num_aps()},
        {"ap_positions", pts(s.ap_positions)},
        {"ue_positions", pts(s.ue_positions)},
        {"beta_db", rows},
        {"pilot_index", s.pilot_index},
    };
}

inline Scenario scenario_from_json(const nlohmann::json& j)
{
    try {
        if (j.at("format") != "cfpc-scenario") throw ConfigError("not a cfpc scenario document");
        if (j.at("version").get<int>() != kScenarioFormatVersion)
            throw ConfigError("unsupported scenario version " + j.at("version").dump());
        const int K = j.at("num_ues").get<int>();
        const int L = j.at("num_aps").get<int>();
        const auto& rows = j.at("beta_db");
        if (static_cast<int>(rows.size()) != K) throw ConfigError("scenario: beta_db row count != num_ues");
        Mat beta_db(K, L);
        for (int k = 0; k < K; ++k) {
            const auto r = rows.at(static_cast<std::size_t>(k)).get<std::vector<double>>();
            if (static_cast<int>(r.size()) != L) throw ConfigError("scenario: beta_db column count != num_aps");
            for (int l = 0; l < L; ++l) beta_db(k, l) = r[static_cast<std::size_t>(l)];
        }
        auto pts = [](const nlohmann::json& a) {
            std::vector<Point2> v;
            for (const auto& p : a) v.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            return v;
        };
        return scenario_from_lsf(std::move(beta_db), j.at("pilot_index").get<std::vector<int>>(),
                                 j.at("seed").get<std::uint64_t>(), pts(j.at("ap_positions")),
                                 pts(j.at("ue_positions")));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed scenario document: ") + e.what());
    }
}

} // namespace cfpc
