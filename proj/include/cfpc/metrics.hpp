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
 * @file metrics.hpp
 * @brief Closed-form uplink SINR and SE as rational functions of the power
 * coefficients, their analytic Jacobian, and the aggregated LSF feature.
 */

#pragma once

#include "cfpc/common.hpp"
#include "cfpc/scenario.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace cfpc {

/// Per-realization constants that make SINR_k a rational function of eta:
///
///   SINR_k = rho eta_k a_k / (rho sum_{k'!=k} eta_k' d_kk' + rho sum_k' eta_k' u_kk' + n_k)
///
/// `interference` caches d with its diagonal zeroed plus u, so the whole
/// denominator is rho * interference * eta + n.
struct SinrCoefficients {
    Vec a;
    Mat d;
    Mat u;
    Vec n;
    double rho = 1.0;
    Mat interference;

    int num_ues() const { return static_cast<int>(a.size()); }
};

inline SinrCoefficients make_sinr_coefficients(Vec a, Mat d, Mat u, Vec n, double rho)
{
    const auto K = a.size();
    if (K == 0 || d.rows() != K || d.cols() != K || u.rows() != K || u.cols() != K || n.size() != K)
        throw ConfigError("sinr coefficients: dimension mismatch");
    if (!a.allFinite() || !d.allFinite() || !u.allFinite() || !n.allFinite() || !std::isfinite(rho))
        throw NumericalError("sinr coefficients: non-finite entry");
    if (!(a.array() > 0).all() || !(n.array() > 0).all() || !(u.array() > 0).all() || !(d.array() >= 0).all() ||
        !(rho > 0))
        throw NumericalError("sinr coefficients: a, u, n, rho must be positive and d non-negative");
    SinrCoefficients c{std::move(a), std::move(d), std::move(u), std::move(n), rho, {}};
    c.interference = c.d;
    c.interference.diagonal().setZero();
    c.interference += c.u;
    return c;
}

inline SinrCoefficients sinr_coefficients(const ChannelStats& stats, const Scenario& s, double rho)
{
    const auto& g = stats.gamma;
    const auto& b = s.beta;
    if (g.rows() != b.rows() || g.cols() != b.cols() || s.pilot_xcorr.rows() != b.rows())
        throw ConfigError("sinr_coefficients: channel stats and scenario dimensions differ");
    Vec n = g.rowwise().sum();
    Vec a = n.array().square();
    Mat u = g * b.transpose();
    const Mat ratio = (g.array() / b.array()).matrix();
    Mat d = ((ratio * b.transpose()).array().square() * s.pilot_xcorr.array()).matrix();
    return make_sinr_coefficients(std::move(a), std::move(d), std::move(u), std::move(n), rho);
}

/// Power coefficients, each in [0, 1].
class PowerAllocation {
public:
    PowerAllocation() = default;
    explicit PowerAllocation(Vec eta) : eta_(std::move(eta))
    {
        if (!eta_.allFinite() || (eta_.array() < 0.0).any() || (eta_.array() > 1.0).any())
            throw ConfigError("power coefficients must lie in [0, 1]");
    }
    static PowerAllocation full(int num_ues) { return PowerAllocation(Vec::Ones(num_ues)); }

    const Vec& eta() const noexcept { return eta_; }
    int size() const noexcept { return static_cast<int>(eta_.size()); }
    double operator[](int k) const { return eta_(k); }

private:
    Vec eta_;
};

namespace detail {

inline void check_dims(const SinrCoefficients& c, const Vec& eta)
{
    if (eta.size() != c.a.size())
        throw ConfigError("power vector has " + std::to_string(eta.size()) + " entries, expected " +
                          std::to_string(c.a.size()));
}

inline Vec sinr_denominator(const SinrCoefficients& c, const Vec& eta)
{
    return c.rho * (c.interference * eta) + c.n;
}

inline Vec sinr_raw(const SinrCoefficients& c, const Vec& eta)
{
    return (c.rho * eta.array() * c.a.array() / sinr_denominator(c, eta).array()).matrix();
}

} // namespace detail

inline Vec sinr(const SinrCoefficients& c, const PowerAllocation& p)
{
    detail::check_dims(c, p.eta());
    return detail::sinr_raw(c, p.eta());
}

/// Spectral efficiency in bit/s/Hz.
inline Vec se(const Vec& sinr_values, int tau_p, int tau_c)
{
    if (tau_c <= tau_p) throw ConfigError("se: tau_c must exceed tau_p");
    if ((sinr_values.array() < 0.0).any()) throw ConfigError("se: negative SINR");
    const double frac = 1.0 - static_cast<double>(tau_p) / tau_c;
    return (frac * sinr_values.array().log1p() / std::log(2.0)).matrix();
}

/// J(k, j) = dSINR_k / deta_j.
inline Mat sinr_jacobian(const SinrCoefficients& c, const PowerAllocation& p)
{
    detail::check_dims(c, p.eta());
    const Vec& eta = p.eta();
    const Vec den = detail::sinr_denominator(c, eta);
    const Vec s = (c.rho * eta.array() * c.a.array() / den.array()).matrix();
    // J = diag(rho a / D) - diag(rho SINR / D) * interference
    const Vec row_scale = (-c.rho * s.array() / den.array()).matrix();
    Mat j = row_scale.asDiagonal() * c.interference;
    j.diagonal().array() += c.rho * c.a.array() / den.array();
    return j;
}

/// Vector-Jacobian product J^T w without forming J; O(K^2).
inline Vec sinr_vjp(const SinrCoefficients& c, const Vec& eta, const Vec& w)
{
    const Vec den = detail::sinr_denominator(c, eta);
    const Vec s = (c.rho * eta.array() * c.a.array() / den.array()).matrix();
    const Vec scaled = (w.array() * s.array() / den.array()).matrix();
    return (c.rho * c.a.array() * w.array() / den.array()).matrix() - c.rho * (c.interference.transpose() * scaled);
}

/// B_k = sum_l beta_kl.
inline Vec aggregate_lsf(const Mat& beta) { return beta.rowwise().sum(); }

} // namespace cfpc
