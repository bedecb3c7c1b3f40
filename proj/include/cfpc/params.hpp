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
 * @file params.hpp
 * @brief Physical and protocol constants of a cell-free network and their
 * JSON config schema.
 */

#pragma once

#include "cfpc/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace cfpc {

enum class PilotMode { orthogonal, random };

inline std::string to_string(PilotMode m) { return m == PilotMode::orthogonal ? "orthogonal" : "random"; }

inline PilotMode pilot_mode_from_string(const std::string& s)
{
    if (s == "orthogonal") return PilotMode::orthogonal;
    if (s == "random") return PilotMode::random;
    throw ConfigError("pilot_mode must be 'orthogonal' or 'random', got '" + s + "'");
}

/// Three-slope pathloss breakpoints (km) and constant term (dB).
struct PathLossModel {
    double d0_km = 0.01;
    double d1_km = 0.05;
    double l_const_db = 140.7;
};

/// Normalized SNR of a transmitter: power over thermal noise in the band.
inline double normalized_snr(double power_mw, double bandwidth_hz, double noise_figure_db)
{
    const double noise_dbm = -174.0 + 10.0 * std::log10(bandwidth_hz) + noise_figure_db;
    return db_to_linear(10.0 * std::log10(power_mw) - noise_dbm);
}

struct SystemParams {
    double area_side_km = 1.0;
    int num_aps = 20;
    int num_ues = 8;
    int tau_p = 20;
    int tau_c = 200;
    // 100 mW over 20 MHz with a 9 dB noise figure.
    double rho_p = normalized_snr(100.0, 20e6, 9.0);
    double rho = normalized_snr(100.0, 20e6, 9.0);
    double sigma_sh_db = 8.0;
    PathLossModel pathloss{};
    PilotMode pilot_mode = PilotMode::orthogonal;

    /// Throws ConfigError naming the first violated invariant.
    void validate() const
    {
        auto fail = [](const std::string& what) { throw ConfigError("invalid SystemParams: " + what); };
        if (!(area_side_km > 0) || !std::isfinite(area_side_km)) fail("area_side_km must be > 0");
        if (num_aps < 1) fail("num_aps must be >= 1");
        if (num_ues < 1) fail("num_ues must be >= 1");
        if (tau_p < 1) fail("tau_p must be >= 1");
        if (tau_c <= tau_p) fail("tau_c must be > tau_p");
        if (pilot_mode == PilotMode::orthogonal && num_ues > tau_p)
            fail("num_ues <= tau_p required for orthogonal pilots");
        if (!(rho > 0) || !std::isfinite(rho)) fail("rho must be > 0");
        if (!(rho_p > 0) || !std::isfinite(rho_p)) fail("rho_p must be > 0");
        if (!(sigma_sh_db >= 0) || !std::isfinite(sigma_sh_db)) fail("sigma_sh_db must be >= 0");
        if (!(pathloss.d0_km > 0)) fail("pathloss.d0_km must be > 0");
        if (!(pathloss.d0_km < pathloss.d1_km)) fail("pathloss.d0_km < pathloss.d1_km required");
        if (!(pathloss.d1_km < area_side_km)) fail("pathloss.d1_km < area_side_km required");
        if (!std::isfinite(pathloss.l_const_db)) fail("pathloss.l_const_db must be finite");
    }

    /// Fraction of the coherence block carrying uplink data.
    double data_fraction() const { return 1.0 - static_cast<double>(tau_p) / tau_c; }
};

inline void to_json(nlohmann::json& j, const SystemParams& p)
{
    j = nlohmann::json{
        {"area_side_km", p.area_side_km},
        {"num_aps", p.num_aps},
        {"num_ues", p.num_ues},
        {"tau_p", p.tau_p},
        {"tau_c", p.tau_c},
        {"rho_p", p.rho_p},
        {"rho", p.rho},
        {"sigma_sh_db", p.sigma_sh_db},
        {"pathloss", {{"d0_km", p.pathloss.d0_km}, {"d1_km", p.pathloss.d1_km}, {"l_const_db", p.pathloss.l_const_db}}},
        {"pilot_mode", to_string(p.pilot_mode)},
    };
}

/// Reads a SystemParams object. Every key is optional and falls back to the
/// default; the SNRs may be given directly ("rho", "rho_p") or through a
/// "radio" block {pilot_power_mw, uplink_power_mw, bandwidth_hz, noise_figure_db}.
inline void from_json(const nlohmann::json& j, SystemParams& p)
{
    static const char* known[] = {"area_side_km", "num_aps", "num_ues", "tau_p", "tau_c", "rho_p", "rho",
                                  "sigma_sh_db", "pathloss", "pilot_mode", "radio"};
    if (!j.is_object()) throw ConfigError("system params must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known))
            throw ConfigError("unknown system param key '" + key + "'");
    }
    try {
        SystemParams out;
        out.area_side_km = j.value("area_side_km", out.area_side_km);
        out.num_aps = j.value("num_aps", out.num_aps);
        out.num_ues = j.value("num_ues", out.num_ues);
        out.tau_p = j.value("tau_p", out.tau_p);
        out.tau_c = j.value("tau_c", out.tau_c);
        out.sigma_sh_db = j.value("sigma_sh_db", out.sigma_sh_db);
        if (j.contains("radio")) {
            const auto& r = j.at("radio");
            const double bw = r.value("bandwidth_hz", 20e6);
            const double nf = r.value("noise_figure_db", 9.0);
            out.rho_p = normalized_snr(r.value("pilot_power_mw", 100.0), bw, nf);
            out.rho = normalized_snr(r.value("uplink_power_mw", 100.0), bw, nf);
        }
        out.rho_p = j.value("rho_p", out.rho_p);
        out.rho = j.value("rho", out.rho);
        if (j.contains("pathloss")) {
            const auto& pl = j.at("pathloss");
            out.pathloss.d0_km = pl.value("d0_km", out.pathloss.d0_km);
            out.pathloss.d1_km = pl.value("d1_km", out.pathloss.d1_km);
            out.pathloss.l_const_db = pl.value("l_const_db", out.pathloss.l_const_db);
        }
        if (j.contains("pilot_mode")) out.pilot_mode = pilot_mode_from_string(j.at("pilot_mode").get<std::string>());
        p = out;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed system params: ") + e.what());
    }
}

inline SystemParams load_params(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    auto p = (j.contains("system") ? j.at("system") : j).get<SystemParams>();
    p.validate();
    return p;
}

} // namespace cfpc
