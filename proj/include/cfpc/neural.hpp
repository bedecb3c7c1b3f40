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
 * @file neural.hpp
 * @brief Two-hidden-layer ReLU network with sigmoid outputs mapping aggregated
 * LSF coefficients to power coefficients, the unsupervised SINR-based losses,
 * and hand-written reverse-mode gradients.
 */

#pragma once

#include "cfpc/common.hpp"
#include "cfpc/metrics.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace cfpc {

inline constexpr int kNumLayers = 3;

struct MlpDims {
    int inputs = 8;
    int hidden1 = 128;
    int hidden2 = 64;
    int outputs = 8;

    std::array<int, kNumLayers + 1> widths() const { return {inputs, hidden1, hidden2, outputs}; }
    bool operator==(const MlpDims&) const = default;
};

/// Layer i maps widths[i] -> widths[i + 1]; weights are (out x in).
/// Inputs are standardized log10(B): (log10(B) - norm_mean) / norm_std.
struct MlpModel {
    MlpDims dims;
    std::array<Mat, kNumLayers> weights;
    std::array<Vec, kNumLayers> biases;
    Vec norm_mean;
    Vec norm_std;
    /// Bumped by every parameter update so a stale ForwardCache is detectable.
    std::uint64_t generation = 0;

    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (int i = 0; i < kNumLayers; ++i) n += static_cast<std::size_t>(weights[i].size() + biases[i].size());
        return n;
    }
};

namespace detail {

inline void check_dims(const MlpDims& d)
{
    if (d.inputs < 1 || d.hidden1 < 1 || d.hidden2 < 1 || d.outputs < 1)
        throw ConfigError("mlp: every layer width must be >= 1");
}

inline MlpModel empty_model(const MlpDims& dims)
{
    check_dims(dims);
    MlpModel m;
    m.dims = dims;
    const auto w = dims.widths();
    for (int i = 0; i < kNumLayers; ++i) {
        m.weights[i] = Mat::Zero(w[i + 1], w[i]);
        m.biases[i] = Vec::Zero(w[i + 1]);
    }
    m.norm_mean = Vec::Zero(dims.inputs);
    m.norm_std = Vec::Ones(dims.inputs);
    return m;
}

} // namespace detail

/// He-uniform weights U(-sqrt(6 / fan_in), sqrt(6 / fan_in)), zero biases.
inline MlpModel init_mlp(const MlpDims& dims, std::uint64_t seed)
{
    MlpModel m = detail::empty_model(dims);
    auto rng = make_rng(seed, "init");
    for (int i = 0; i < kNumLayers; ++i) {
        const double bound = std::sqrt(6.0 / static_cast<double>(m.weights[i].cols()));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index r = 0; r < m.weights[i].rows(); ++r)
            for (Eigen::Index c = 0; c < m.weights[i].cols(); ++c) m.weights[i](r, c) = u(rng);
    }
    return m;
}

/// All parameters zero; forward() then returns 0.5 everywhere.
inline MlpModel zero_mlp(const MlpDims& dims) { return detail::empty_model(dims); }

/// Freezes input standardization statistics from training inputs (one column per sample).
inline void set_normalization(MlpModel& m, const Mat& b_columns)
{
    if (b_columns.rows() != m.dims.inputs || b_columns.cols() < 1)
        throw ConfigError("set_normalization: expected " + std::to_string(m.dims.inputs) + " x N inputs");
    if (!(b_columns.array() > 0).all()) throw ConfigError("set_normalization: inputs must be positive");
    const Mat logb = b_columns.array().log10().matrix();
    m.norm_mean = logb.rowwise().mean();
    const Mat centered = logb.colwise() - m.norm_mean;
    m.norm_std = (centered.array().square().rowwise().sum() / static_cast<double>(logb.cols())).sqrt().matrix();
    for (Eigen::Index i = 0; i < m.norm_std.size(); ++i)
        if (!(m.norm_std(i) > 0.0)) m.norm_std(i) = 1.0;
}

struct ForwardCache {
    Mat x; // standardized inputs
    Mat z1, a1, z2, a2, y;
    std::uint64_t generation = 0;
};

/// Batched forward pass, one sample per column of `b`.
inline Mat forward_batch(const MlpModel& m, const Mat& b, ForwardCache* cache = nullptr)
{
    if (b.rows() != m.dims.inputs)
        throw ConfigError("forward: expected " + std::to_string(m.dims.inputs) + " inputs, got " +
                          std::to_string(b.rows()));
    if (!b.allFinite() || !(b.array() > 0).all()) throw NumericalError("forward: inputs must be finite and positive");
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.x = ((b.array().log10().colwise() - m.norm_mean.array()).colwise() / m.norm_std.array()).matrix();
    c.z1 = (m.weights[0] * c.x).colwise() + m.biases[0];
    c.a1 = c.z1.cwiseMax(0.0);
    c.z2 = (m.weights[1] * c.a1).colwise() + m.biases[1];
    c.a2 = c.z2.cwiseMax(0.0);
    Mat z3 = (m.weights[2] * c.a2).colwise() + m.biases[2];
    c.y = z3.unaryExpr([](double v) { return sigmoid(v); });
    c.generation = m.generation;
    return c.y;
}

inline std::pair<PowerAllocation, ForwardCache> forward(const MlpModel& m, const Vec& b)
{
    ForwardCache cache;
    Mat y = forward_batch(m, b, &cache);
    return {PowerAllocation(Vec(y.col(0))), std::move(cache)};
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

enum class LossKind { maxmin, maxmin_prior, sum_rate, product };

inline std::string to_string(LossKind k)
{
    switch (k) {
    case LossKind::maxmin: return "maxmin";
    case LossKind::maxmin_prior: return "maxmin-prior";
    case LossKind::sum_rate: return "sumrate";
    case LossKind::product: return "product";
    }
    return "?";
}

inline LossKind loss_kind_from_string(const std::string& s)
{
    if (s == "maxmin") return LossKind::maxmin;
    if (s == "maxmin-prior") return LossKind::maxmin_prior;
    if (s == "sumrate") return LossKind::sum_rate;
    if (s == "product") return LossKind::product;
    throw ConfigError("unknown loss '" + s + "' (expected maxmin|maxmin-prior|sumrate|product)");
}

struct LossSpec {
    LossKind kind = LossKind::maxmin;
    double alpha = 1.0;
    Vec mu;      // per-UE sum-rate weights 1 / mu_k
    Vec gamma_w; // per-UE product weights
    double clamp_eps = 1e-9;
    double maxmin_numerator = 0.3;

    static LossSpec defaults(LossKind kind, int num_ues)
    {
        LossSpec s;
        s.kind = kind;
        s.mu = Vec::Constant(num_ues, 5.0);
        s.gamma_w = Vec::Ones(num_ues);
        return s;
    }

    void validate(Eigen::Index num_ues) const
    {
        if (!(alpha >= 0.0)) throw ConfigError("loss: alpha must be >= 0");
        if (!(clamp_eps > 0.0)) throw ConfigError("loss: clamp_eps must be > 0");
        if (!(maxmin_numerator > 0.0)) throw ConfigError("loss: maxmin_numerator must be > 0");
        if (mu.size() != num_ues || gamma_w.size() != num_ues) throw ConfigError("loss: weight vectors must have K entries");
        if (!(mu.array() > 0).all() || !(gamma_w.array() > 0).all()) throw ConfigError("loss: mu and gamma must be > 0");
    }
};

namespace detail {

/// Smallest index among minimal entries.
inline Eigen::Index argmin_first(const Vec& v)
{
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v(i) < v(best)) best = i;
    return best;
}

inline void check_sinr(const LossSpec& spec, const Vec& s)
{
    spec.validate(s.size());
    if (s.size() == 0 || !s.allFinite()) throw NumericalError("loss: SINR must be finite");
    if ((s.array() < 0.0).any()) throw ConfigError("loss: negative SINR");
}

} // namespace detail

inline double loss_value(const LossSpec& spec, const Vec& s)
{
    detail::check_sinr(spec, s);
    const double ln2 = std::log(2.0);
    switch (spec.kind) {
    case LossKind::maxmin: {
        double acc = 0.0;
        for (Eigen::Index k = 0; k < s.size(); ++k) acc += sigmoid(spec.maxmin_numerator / s(k)); // 1/0 -> +inf -> 1
        return acc - spec.alpha * s.minCoeff();
    }
    case LossKind::maxmin_prior: return -spec.alpha * s.minCoeff();
    case LossKind::sum_rate: return -(spec.mu.array().inverse() * s.array().log1p() / ln2).sum();
    case LossKind::product: {
        double acc = 0.0;
        for (Eigen::Index k = 0; k < s.size(); ++k)
            acc += spec.gamma_w(k) * std::log2(std::max(std::log1p(s(k)) / ln2, spec.clamp_eps));
        return -acc;
    }
    }
    return 0.0;
}

/// dLoss / dSINR_k. The min term routes through the first argmin only;
/// clamped product terms contribute zero.
inline Vec loss_grad_wrt_sinr(const LossSpec& spec, const Vec& s)
{
    detail::check_sinr(spec, s);
    const double ln2 = std::log(2.0);
    Vec g = Vec::Zero(s.size());
    switch (spec.kind) {
    case LossKind::maxmin:
        for (Eigen::Index k = 0; k < s.size(); ++k) {
            const double x = spec.maxmin_numerator / s(k);
            if (s(k) == 0.0 || x > 700.0) continue;
            // d/ds sigmoid(c / s) = -sigmoid'(x) x^2 / c
            const double sx = sigmoid(x);
            g(k) = -sx * (1.0 - sx) * x * x / spec.maxmin_numerator;
        }
        [[fallthrough]];
    case LossKind::maxmin_prior: g(detail::argmin_first(s)) -= spec.alpha; break;
    case LossKind::sum_rate: g = -(spec.mu.array().inverse() / ((1.0 + s.array()) * ln2)).matrix(); break;
    case LossKind::product:
        for (Eigen::Index k = 0; k < s.size(); ++k) {
            const double se = std::log1p(s(k)) / ln2;
            if (se <= spec.clamp_eps) continue;
            g(k) = -spec.gamma_w(k) / (ln2 * se) / ((1.0 + s(k)) * ln2);
        }
        break;
    }
    return g;
}

inline Vec loss_grad_wrt_eta(const LossSpec& spec, const SinrCoefficients& c, const PowerAllocation& p)
{
    const Vec s = sinr(c, p);
    return sinr_jacobian(c, p).transpose() * loss_grad_wrt_sinr(spec, s);
}

// ---------------------------------------------------------------------------
// Backward pass and SGD
// ---------------------------------------------------------------------------

struct Gradients {
    std::array<Mat, kNumLayers> weights;
    std::array<Vec, kNumLayers> biases;
};

/// Reverse pass for a batch; column j of `dloss_deta` is dLoss/deta for
/// sample j of the cached forward pass.
inline Gradients backward(const MlpModel& m, const ForwardCache& cache, const Mat& dloss_deta)
{
    if (cache.generation != m.generation || cache.y.rows() != m.dims.outputs)
        throw ConfigError("backward: cache does not belong to this model state");
    if (dloss_deta.rows() != cache.y.rows() || dloss_deta.cols() != cache.y.cols())
        throw ConfigError("backward: gradient shape does not match cached outputs");
    Gradients g;
    const Mat dz3 = (dloss_deta.array() * cache.y.array() * (1.0 - cache.y.array())).matrix();
    g.weights[2] = dz3 * cache.a2.transpose();
    g.biases[2] = dz3.rowwise().sum();
    const Mat dz2 = ((m.weights[2].transpose() * dz3).array() * (cache.z2.array() > 0.0).cast<double>()).matrix();
    g.weights[1] = dz2 * cache.a1.transpose();
    g.biases[1] = dz2.rowwise().sum();
    const Mat dz1 = ((m.weights[1].transpose() * dz2).array() * (cache.z1.array() > 0.0).cast<double>()).matrix();
    g.weights[0] = dz1 * cache.x.transpose();
    g.biases[0] = dz1.rowwise().sum();
    return g;
}

inline MlpModel sgd_step(const MlpModel& m, const Gradients& g, double lr)
{
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("sgd_step: learning rate must be finite and >= 0");
    for (int i = 0; i < kNumLayers; ++i) {
        if (g.weights[i].rows() != m.weights[i].rows() || g.weights[i].cols() != m.weights[i].cols() ||
            g.biases[i].size() != m.biases[i].size())
            throw ConfigError("sgd_step: gradient shape mismatch in layer " + std::to_string(i));
        if (!g.weights[i].allFinite() || !g.biases[i].allFinite())
            throw NumericalError("sgd_step: non-finite gradient in layer " + std::to_string(i));
    }
    MlpModel out = m;
    for (int i = 0; i < kNumLayers; ++i) {
        out.weights[i] -= lr * g.weights[i];
        out.biases[i] -= lr * g.biases[i];
    }
    ++out.generation;
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// JSON document "cfpc-mlp" v1. Layer i stores its weight matrix flattened
// row-major (out x in) followed by its bias; layers run input -> output.
// ---------------------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json loss_to_json(const LossSpec& s)
{
    return {{"kind", to_string(s.kind)},
            {"alpha", s.alpha},
            {"mu", std::vector<double>(s.mu.data(), s.mu.data() + s.mu.size())},
            {"gamma", std::vector<double>(s.gamma_w.data(), s.gamma_w.data() + s.gamma_w.size())},
            {"clamp_eps", s.clamp_eps},
            {"maxmin_numerator", s.maxmin_numerator}};
}

inline LossSpec loss_from_json(const nlohmann::json& j)
{
    LossSpec s;
    s.kind = loss_kind_from_string(j.at("kind").get<std::string>());
    s.alpha = j.at("alpha").get<double>();
    const auto mu = j.at("mu").get<std::vector<double>>();
    const auto ga = j.at("gamma").get<std::vector<double>>();
    s.mu = Eigen::Map<const Vec>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    s.gamma_w = Eigen::Map<const Vec>(ga.data(), static_cast<Eigen::Index>(ga.size()));
    s.clamp_eps = j.at("clamp_eps").get<double>();
    s.maxmin_numerator = j.value("maxmin_numerator", 0.3);
    return s;
}

inline nlohmann::json checkpoint_to_json(const MlpModel& m, const LossSpec& loss, std::uint64_t training_seed)
{
    auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    auto layers = nlohmann::json::array();
    for (int i = 0; i < kNumLayers; ++i) {
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m.weights[i];
        layers.push_back({{"rows", rm.rows()},
                          {"cols", rm.cols()},
                          {"weights", std::vector<double>(rm.data(), rm.data() + rm.size())},
                          {"bias", vec(m.biases[i])}});
    }
    return {{"format", "cfpc-mlp"},
            {"version", kCheckpointVersion},
            {"dims", {m.dims.inputs, m.dims.hidden1, m.dims.hidden2, m.dims.outputs}},
            {"norm_mean", vec(m.norm_mean)},
            {"norm_std", vec(m.norm_std)},
            {"layers", layers},
            {"loss", loss_to_json(loss)},
            {"training_seed", training_seed}};
}

struct Checkpoint {
    MlpModel model;
    LossSpec loss;
    std::uint64_t training_seed = 0;
};

inline Checkpoint checkpoint_from_json(const nlohmann::json& j)
{
    try {
        if (j.at("format") != "cfpc-mlp") throw ConfigError("not a cfpc-mlp checkpoint");
        if (j.at("version").get<int>() != kCheckpointVersion)
            throw ConfigError("unsupported checkpoint version " + j.at("version").dump());
        const auto d = j.at("dims").get<std::vector<int>>();
        if (d.size() != kNumLayers + 1) throw ConfigError("checkpoint: dims must have 4 entries");
        Checkpoint cp;
        cp.model = detail::empty_model({d[0], d[1], d[2], d[3]});
        const auto& layers = j.at("layers");
        if (layers.size() != kNumLayers) throw ConfigError("checkpoint: expected 3 layers");
        for (int i = 0; i < kNumLayers; ++i) {
            const auto& L = layers.at(static_cast<std::size_t>(i));
            const auto w = L.at("weights").get<std::vector<double>>();
            const auto b = L.at("bias").get<std::vector<double>>();
            auto& W = cp.model.weights[i];
            if (L.at("rows").get<Eigen::Index>() != W.rows() || L.at("cols").get<Eigen::Index>() != W.cols() ||
                static_cast<Eigen::Index>(w.size()) != W.size() || static_cast<Eigen::Index>(b.size()) != W.rows())
                throw ConfigError("checkpoint: layer " + std::to_string(i) + " shape inconsistent with dims");
            W = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                w.data(), W.rows(), W.cols());
            cp.model.biases[i] = Eigen::Map<const Vec>(b.data(), W.rows());
        }
        const auto mean = j.at("norm_mean").get<std::vector<double>>();
        const auto sd = j.at("norm_std").get<std::vector<double>>();
        if (static_cast<int>(mean.size()) != d[0] || static_cast<int>(sd.size()) != d[0])
            throw ConfigError("checkpoint: normalization stats must have one entry per input");
        cp.model.norm_mean = Eigen::Map<const Vec>(mean.data(), d[0]);
        cp.model.norm_std = Eigen::Map<const Vec>(sd.data(), d[0]);
        cp.loss = loss_from_json(j.at("loss"));
        cp.training_seed = j.at("training_seed").get<std::uint64_t>();
        return cp;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed checkpoint: ") + e.what());
    }
}

} // namespace cfpc
