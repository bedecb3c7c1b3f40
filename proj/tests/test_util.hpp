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

// Seeded random instances shared by the test suites.

#pragma once

#include "cfpc/cfpc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>
#include <random>

namespace cfpc::testkit {

/// Small system with random pilot reuse so every SINR term is active.
inline SystemParams small_params(int K, int L, PilotMode mode = PilotMode::random)
{
    SystemParams p;
    p.num_ues = K;
    p.num_aps = L;
    p.pilot_mode = mode;
    p.tau_p = mode == PilotMode::orthogonal ? std::max(K, 1) : std::max(1, K / 2);
    p.tau_c = 200;
    return p;
}

struct Instance {
    SystemParams params;
    Scenario scenario;
    ChannelStats stats;
    SinrCoefficients coeffs;
};

inline Instance random_instance(int K, int L, std::uint64_t seed, PilotMode mode = PilotMode::random)
{
    Instance in;
    in.params = small_params(K, L, mode);
    in.scenario = generate_scenario(in.params, seed);
    in.stats = channel_stats(in.scenario, in.params);
    in.coeffs = sinr_coefficients(in.stats, in.scenario, in.params.rho);
    return in;
}

/// Interior power vector in [0.05, 1]^K.
inline Vec random_eta(int K, std::uint64_t seed)
{
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Vec eta(K);
    for (int k = 0; k < K; ++k) eta(k) = u(rng);
    return eta;
}

/// Coefficients of K statistically identical users with weak coupling.
inline SinrCoefficients symmetric_coeffs(int K, double rho = 1.0, double a = 4.0, double self = 1.0,
                                         double cross = 0.05, double noise = 2.0)
{
    Mat u = Mat::Constant(K, K, cross);
    u.diagonal().setConstant(self);
    Mat d = Mat::Zero(K, K);
    d.diagonal().setConstant(a);
    return make_sinr_coefficients(Vec::Constant(K, a), d, u, Vec::Constant(K, noise), rho);
}

inline double rel_err(double a, double b, double floor = 1e-300)
{
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Second implementation of the SINR straight from beta, gamma and the pilot
// cross-correlations, with explicit loops over users and APs.
inline Vec naive_sinr(const Mat& beta, const Mat& gamma, const Mat& xcorr, double rho, const Vec& eta)
{
    const auto K = beta.rows();
    const auto L = beta.cols();
    Vec out(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        double coherent = 0.0;
        for (Eigen::Index l = 0; l < L; ++l) coherent += gamma(k, l);
        double contamination = 0.0;
        double noncoherent = 0.0;
        for (Eigen::Index j = 0; j < K; ++j) {
            double ratio_sum = 0.0;
            double cross = 0.0;
            for (Eigen::Index l = 0; l < L; ++l) {
                ratio_sum += gamma(k, l) * beta(j, l) / beta(k, l);
                cross += gamma(k, l) * beta(j, l);
            }
            if (j != k) contamination += eta(j) * ratio_sum * ratio_sum * xcorr(k, j);
            noncoherent += eta(j) * cross;
        }
        out(k) = rho * eta(k) * coherent * coherent / (rho * contamination + rho * noncoherent + coherent);
    }
    return out;
}

/// Mean per-sample loss of a batch, one SINR coefficient set per column of `b`.
inline double batch_loss(const MlpModel& m, const LossSpec& spec, const std::vector<SinrCoefficients>& cs, const Mat& b)
{
    const Mat y = forward_batch(m, b);
    double acc = 0.0;
    for (std::size_t j = 0; j < cs.size(); ++j)
        acc += loss_value(spec, sinr(cs[j], PowerAllocation(Vec(y.col(static_cast<Eigen::Index>(j))))));
    return acc / static_cast<double>(cs.size());
}

inline Gradients batch_grad(const MlpModel& m, const LossSpec& spec, const std::vector<SinrCoefficients>& cs,
                            const Mat& b)
{
    ForwardCache cache;
    const Mat y = forward_batch(m, b, &cache);
    Mat dy(y.rows(), y.cols());
    for (Eigen::Index j = 0; j < y.cols(); ++j)
        dy.col(j) = loss_grad_wrt_eta(spec, cs[static_cast<std::size_t>(j)], PowerAllocation(Vec(y.col(j)))) /
                    static_cast<double>(y.cols());
    return backward(m, cache, dy);
}

/// Mutable view of parameter `idx` in the order: per layer, weights (column-major) then bias.
inline double& param_at(MlpModel& m, std::size_t idx)
{
    for (int i = 0; i < kNumLayers; ++i) {
        const auto nw = static_cast<std::size_t>(m.weights[i].size());
        if (idx < nw) return m.weights[i].data()[idx];
        idx -= nw;
        const auto nb = static_cast<std::size_t>(m.biases[i].size());
        if (idx < nb) return m.biases[i].data()[idx];
        idx -= nb;
    }
    throw std::out_of_range("param_at");
}

inline double grad_at(const Gradients& g, std::size_t idx)
{
    for (int i = 0; i < kNumLayers; ++i) {
        const auto nw = static_cast<std::size_t>(g.weights[i].size());
        if (idx < nw) return g.weights[i].data()[idx];
        idx -= nw;
        const auto nb = static_cast<std::size_t>(g.biases[i].size());
        if (idx < nb) return g.biases[i].data()[idx];
        idx -= nb;
    }
    throw std::out_of_range("grad_at");
}

/// Central finite differences against backprop on `num_checked` parameters
/// (all of them when 0). Returns max |fd - analytic| / max |analytic| over the
/// checked set.
inline double param_grad_rel_err(const MlpModel& m, const LossSpec& spec, const std::vector<SinrCoefficients>& cs,
                                 const Mat& b, std::size_t num_checked, std::uint64_t seed, double h = 1e-6)
{
    const Gradients g = batch_grad(m, spec, cs, b);
    const std::size_t total = m.parameter_count();
    std::vector<std::size_t> idx(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = i;
    if (num_checked > 0 && num_checked < total) {
        Rng rng(seed);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(num_checked);
    }
    MlpModel probe = m;
    double worst = 0.0;
    double scale = 0.0;
    for (std::size_t i : idx) {
        double& p = param_at(probe, i);
        const double orig = p;
        const double step = h * std::max(1.0, std::abs(orig));
        p = orig + step;
        const double up = batch_loss(probe, spec, cs, b);
        p = orig - step;
        const double down = batch_loss(probe, spec, cs, b);
        p = orig;
        const double an = grad_at(g, i);
        worst = std::max(worst, std::abs((up - down) / (2.0 * step) - an));
        scale = std::max(scale, std::abs(an));
    }
    return scale > 0.0 ? worst / scale : worst;
}

/// Standardization fitted to the aggregate inputs of `b` pooled over users.
inline void fit_pooled_normalization(MlpModel& m, const Mat& b)
{
    const Mat logb = b.array().log10().matrix();
    const double mean = logb.mean();
    const double sd = std::sqrt((logb.array() - mean).square().mean());
    m.norm_mean = Vec::Constant(m.dims.inputs, mean);
    m.norm_std = Vec::Constant(m.dims.inputs, sd > 0.0 ? sd : 1.0);
}

} // namespace cfpc::testkit
