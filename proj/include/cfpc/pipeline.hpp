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
 * @file pipeline.hpp
 * @brief Dataset construction and caching, the unsupervised training loop and
 * inference.
 */

#pragma once

#include "cfpc/common.hpp"
#include "cfpc/metrics.hpp"
#include "cfpc/neural.hpp"
#include "cfpc/params.hpp"
#include "cfpc/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace cfpc {

struct Sample {
    Vec b; // aggregated LSF per UE
    SinrCoefficients coeffs;
    std::uint64_t scenario_seed = 0;
    Mat beta_db;
    std::vector<int> pilot_index;
};

struct Dataset {
    SystemParams params;
    std::uint64_t seed = 0;
    std::vector<Sample> samples;

    int num_ues() const { return params.num_ues; }
    int num_aps() const { return params.num_aps; }
    std::size_t size() const { return samples.size(); }

    /// K x N matrix of aggregated LSF inputs.
    Mat inputs() const
    {
        Mat b(num_ues(), static_cast<Eigen::Index>(samples.size()));
        for (std::size_t i = 0; i < samples.size(); ++i) b.col(static_cast<Eigen::Index>(i)) = samples[i].b;
        return b;
    }

    /// Content digest over params, seed and every sample's stored LSF and pilots.
    std::string digest() const
    {
        Digest d;
        const std::string p = nlohmann::json(params).dump();
        d.update(p.data(), p.size());
        d.update_value(seed);
        for (const auto& s : samples) {
            d.update_value(s.scenario_seed);
            d.update(s.pilot_index.data(), s.pilot_index.size() * sizeof(int));
            d.update(s.beta_db.data(), static_cast<std::size_t>(s.beta_db.size()) * sizeof(double));
        }
        return d.hex();
    }
};

inline Sample make_sample(const Scenario& s, const SystemParams& params)
{
    Sample out;
    out.coeffs = sinr_coefficients(channel_stats(s, params), s, params.rho);
    out.b = aggregate_lsf(s.beta);
    out.scenario_seed = s.seed;
    out.beta_db = s.beta_db;
    out.pilot_index = s.pilot_index;
    return out;
}

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index writes
/// only its own slot, so results do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn)
{
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace detail

/// Sample i is generate_scenario(params, derive_seed(seed, i)).
inline Dataset build_dataset(const SystemParams& params, std::size_t n, std::uint64_t seed, int threads = 1)
{
    if (n < 1) throw ConfigError("build_dataset: need at least one sample");
    params.validate();
    Dataset ds;
    ds.params = params;
    ds.seed = seed;
    ds.samples.resize(n);
    detail::parallel_for(n, threads, [&](std::size_t i) {
        ds.samples[i] = make_sample(generate_scenario(params, derive_seed(seed, static_cast<std::uint64_t>(i))), params);
    });
    return ds;
}

// ---------------------------------------------------------------------------
// Dataset cache file
//
//   magic   "CFPCDSET"               8 bytes
//   version uint32                   (1)
//   hlen    uint64                   length of the JSON header
//   header  JSON {params, seed, num_samples, num_ues, num_aps, digest}
//   per sample:
//     scenario_seed uint64
//     pilot_index   int32[K]
//     beta_db       float64[K*L]     row-major (UE-major)
//
// Integers and doubles are stored in host byte order (little-endian on all
// supported targets).
// ---------------------------------------------------------------------------

inline constexpr char kDatasetMagic[8] = {'C', 'F', 'P', 'C', 'D', 'S', 'E', 'T'};
inline constexpr std::uint32_t kDatasetVersion = 1;

inline void save_dataset(const Dataset& ds, const std::string& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write dataset '" + path + "'");
    const std::string header = nlohmann::json{{"params", ds.params},
                                              {"seed", ds.seed},
                                              {"num_samples", ds.size()},
                                              {"num_ues", ds.num_ues()},
                                              {"num_aps", ds.num_aps()},
                                              {"digest", ds.digest()}}
                                   .dump();
    const std::uint64_t hlen = header.size();
    out.write(kDatasetMagic, sizeof(kDatasetMagic));
    out.write(reinterpret_cast<const char*>(&kDatasetVersion), sizeof(kDatasetVersion));
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& s : ds.samples) {
        out.write(reinterpret_cast<const char*>(&s.scenario_seed), sizeof(s.scenario_seed));
        for (int p : s.pilot_index) {
            const auto v = static_cast<std::int32_t>(p);
            out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = s.beta_db;
        out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
    }
    if (!out) throw IoError("write failed for dataset '" + path + "'");
}

inline Dataset load_dataset(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset '" + path + "'");
    auto read = [&](void* dst, std::size_t n) {
        in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (!in) throw IoError("dataset '" + path + "' is truncated");
    };
    char magic[8];
    read(magic, sizeof(magic));
    if (std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0) throw IoError("'" + path + "' is not a cfpc dataset");
    std::uint32_t version = 0;
    read(&version, sizeof(version));
    if (version != kDatasetVersion) throw IoError("unsupported dataset version " + std::to_string(version));
    std::uint64_t hlen = 0;
    read(&hlen, sizeof(hlen));
    if (hlen > (1u << 24)) throw IoError("dataset header too large");
    std::string header(hlen, '\0');
    read(header.data(), header.size());

    Dataset ds;
    std::size_t n = 0;
    std::string digest;
    try {
        const auto j = nlohmann::json::parse(header);
        ds.params = j.at("params").get<SystemParams>();
        ds.seed = j.at("seed").get<std::uint64_t>();
        n = j.at("num_samples").get<std::size_t>();
        digest = j.at("digest").get<std::string>();
        if (j.at("num_ues").get<int>() != ds.params.num_ues || j.at("num_aps").get<int>() != ds.params.num_aps)
            throw IoError("dataset header dimensions disagree with params");
    } catch (const nlohmann::json::exception& e) {
        throw IoError("dataset '" + path + "' has a malformed header: " + e.what());
    }
    ds.params.validate();
    const int K = ds.params.num_ues;
    const int L = ds.params.num_aps;
    ds.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t seed = 0;
        read(&seed, sizeof(seed));
        std::vector<std::int32_t> pilots(static_cast<std::size_t>(K));
        read(pilots.data(), pilots.size() * sizeof(std::int32_t));
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(K, L);
        read(rm.data(), static_cast<std::size_t>(rm.size()) * sizeof(double));
        const auto s = scenario_from_lsf(Mat(rm), std::vector<int>(pilots.begin(), pilots.end()), seed);
        ds.samples.push_back(make_sample(s, ds.params));
    }
    if (ds.digest() != digest) throw IoError("dataset '" + path + "' digest mismatch");
    return ds;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    int epochs = 300;
    int batch_size = 256;
    double lr0 = 0.3;
    int lr_drop_epoch = 150; // 0-based epoch index at which the drop applies
    double lr_drop_factor = 0.1;
    double momentum = 0.0;
    int hidden1 = 128;
    int hidden2 = 64;
    LossSpec loss;
    std::uint64_t seed = 0;

    /// Learning rate of 0-based epoch `e`.
    double lr_at(int e) const { return e < lr_drop_epoch ? lr0 : lr0 * lr_drop_factor; }

    void validate(std::size_t dataset_size) const
    {
        if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
        if (batch_size < 1 || static_cast<std::size_t>(batch_size) > dataset_size)
            throw ConfigError("train: batch_size must be in [1, dataset size]");
        if (!(lr0 >= 0.0) || !std::isfinite(lr0)) throw ConfigError("train: lr0 must be finite and >= 0");
        if (!(lr_drop_factor > 0.0)) throw ConfigError("train: lr_drop_factor must be > 0");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0, 1)");
        if (hidden1 < 1 || hidden2 < 1) throw ConfigError("train: hidden widths must be >= 1");
    }
};

inline nlohmann::json train_config_to_json(const TrainConfig& c)
{
    return {{"epochs", c.epochs},     {"batch_size", c.batch_size},         {"lr0", c.lr0},
            {"lr_drop_epoch", c.lr_drop_epoch}, {"lr_drop_factor", c.lr_drop_factor}, {"momentum", c.momentum},
            {"hidden1", c.hidden1},   {"hidden2", c.hidden2},               {"loss", loss_to_json(c.loss)},
            {"seed", c.seed}};
}

struct EpochRecord {
    int epoch = 0; // 1-based
    double mean_loss = 0.0;
    double lr = 0.0;
};

struct LearningCurve {
    std::vector<EpochRecord> epochs;

    void write_csv(const std::string& path) const
    {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw IoError("cannot write learning curve '" + path + "'");
        out << "epoch,loss,lr\n";
        out.precision(17);
        for (const auto& e : epochs) out << e.epoch << ',' << e.mean_loss << ',' << e.lr << '\n';
        if (!out) throw IoError("write failed for '" + path + "'");
    }
};

/// First 1-based epoch from which every `window`-epoch span changes the loss
/// by less than `rel_tol` relative to its start. Returns -1 if the curve
/// never settles (or is shorter than one window).
inline int plateau_epoch(const LearningCurve& curve, int window = 20, double rel_tol = 0.01)
{
    const auto& e = curve.epochs;
    const int n = static_cast<int>(e.size());
    int start = -1;
    for (int i = n - 1 - window; i >= 0; --i) {
        const double a = e[static_cast<std::size_t>(i)].mean_loss;
        const double b = e[static_cast<std::size_t>(i + window)].mean_loss;
        if (std::abs(b - a) < rel_tol * std::abs(a))
            start = i;
        else
            break;
    }
    return start < 0 ? -1 : e[static_cast<std::size_t>(start)].epoch;
}

struct TrainResult {
    MlpModel model;
    LearningCurve curve;
};

/// Raised on a non-finite loss; carries the curve recorded so far.
class TrainingDiverged : public NumericalError {
public:
    TrainingDiverged(const std::string& what, LearningCurve partial)
        : NumericalError(what), curve(std::move(partial))
    {
    }
    LearningCurve curve;
};

namespace detail {

/// Mean loss of a batch and dLoss/deta per column, already divided by the
/// batch size.
inline double batch_loss_grad(const Dataset& ds, const std::vector<std::size_t>& idx, const Mat& eta,
                              const LossSpec& spec, Mat& grad)
{
    const auto nb = static_cast<double>(idx.size());
    grad.resize(eta.rows(), eta.cols());
    double total = 0.0;
    for (Eigen::Index j = 0; j < eta.cols(); ++j) {
        const auto& c = ds.samples[idx[static_cast<std::size_t>(j)]].coeffs;
        const PowerAllocation p{Vec(eta.col(j))};
        const Vec s = sinr(c, p);
        total += loss_value(spec, s);
        grad.col(j) = sinr_jacobian(c, p).transpose() * loss_grad_wrt_sinr(spec, s) / nb;
    }
    return total;
}

} // namespace detail

/// Minibatch SGD over seeded shuffles. Normalization statistics are frozen
/// from the whole dataset before the first update. The curve records the
/// mean per-sample loss seen during each epoch.
inline TrainResult train(const Dataset& ds, const TrainConfig& cfg)
{
    cfg.validate(ds.size());
    cfg.loss.validate(ds.num_ues());
    const int K = ds.num_ues();
    const std::size_t n = ds.size();

    TrainResult out;
    out.model = init_mlp({K, cfg.hidden1, cfg.hidden2, K}, cfg.seed);
    set_normalization(out.model, ds.inputs());

    auto rng = make_rng(cfg.seed, "shuffle");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    Gradients velocity;
    for (int i = 0; i < kNumLayers; ++i) {
        velocity.weights[i] = Mat::Zero(out.model.weights[i].rows(), out.model.weights[i].cols());
        velocity.biases[i] = Vec::Zero(out.model.biases[i].size());
    }

    ForwardCache cache;
    Mat grad;
    std::vector<std::size_t> idx;
    for (int e = 0; e < cfg.epochs; ++e) {
        const double lr = cfg.lr_at(e);
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0, batch = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size), ++batch) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(stop));
            Mat b(K, static_cast<Eigen::Index>(idx.size()));
            for (std::size_t j = 0; j < idx.size(); ++j) b.col(static_cast<Eigen::Index>(j)) = ds.samples[idx[j]].b;

            const Mat eta = forward_batch(out.model, b, &cache);
            if (!eta.allFinite())
                throw TrainingDiverged("training diverged at epoch " + std::to_string(e + 1) + ", batch " +
                                           std::to_string(batch) + ": non-finite network output",
                                       out.curve);
            double batch_total = 0.0;
            try {
                batch_total = detail::batch_loss_grad(ds, idx, eta, cfg.loss, grad);
            } catch (const NumericalError& err) {
                throw TrainingDiverged("training diverged at epoch " + std::to_string(e + 1) + ", batch " +
                                           std::to_string(batch) + ": " + err.what(),
                                       out.curve);
            }
            if (!std::isfinite(batch_total) || !grad.allFinite())
                throw TrainingDiverged("training diverged at epoch " + std::to_string(e + 1) + ", batch " +
                                           std::to_string(batch) + ": non-finite loss",
                                       out.curve);
            total += batch_total;

            Gradients g = backward(out.model, cache, grad);
            if (cfg.momentum > 0.0) {
                for (int i = 0; i < kNumLayers; ++i) {
                    velocity.weights[i] = cfg.momentum * velocity.weights[i] + g.weights[i];
                    velocity.biases[i] = cfg.momentum * velocity.biases[i] + g.biases[i];
                }
                g = velocity;
            }
            try {
                out.model = sgd_step(out.model, g, lr);
            } catch (const NumericalError& err) {
                throw TrainingDiverged("training diverged at epoch " + std::to_string(e + 1) + ", batch " +
                                           std::to_string(batch) + ": " + err.what(),
                                       out.curve);
            }
        }
        out.curve.epochs.push_back({e + 1, total / static_cast<double>(n), lr});
    }
    return out;
}

inline PowerAllocation infer(const MlpModel& m, const Vec& b)
{
    if (b.size() != m.dims.inputs)
        throw ConfigError("infer: model expects " + std::to_string(m.dims.inputs) + " inputs, got " +
                          std::to_string(b.size()));
    return PowerAllocation(Vec(forward_batch(m, b).col(0)));
}

/// One column of power coefficients per column of `b`.
inline Mat infer_batch(const MlpModel& m, const Mat& b) { return forward_batch(m, b); }

} // namespace cfpc
