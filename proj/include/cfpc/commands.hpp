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
 * @file commands.hpp
 * @brief The generate / train / eval / bench commands behind the cfpc tool.
 *
 * Config file (JSON, every key optional):
 *
 *   {
 *     "seed": 1,                 master seed
 *     "samples": 10000,          training dataset size
 *     "threads": 1,
 *     "system": { ...SystemParams keys, see params.hpp... },
 *     "train": { "epochs", "batch_size", "lr0", "lr_drop_epoch", "lr_drop_factor",
 *                "momentum", "hidden1", "hidden2", "alpha", "mu", "gamma",
 *                "clamp_eps", "maxmin_numerator" },
 *     "eval":  { "test_samples", "bisection_tol", "multistarts", "pga_max_iter",
 *                "bench_samples", "bench_batch", "bench_repeats" }
 *   }
 *
 * Stage seeds are derive_seed(master, "dataset" | "train" | "test" | "solver").
 */

#pragma once

#include "cfpc/common.hpp"
#include "cfpc/neural.hpp"
#include "cfpc/params.hpp"
#include "cfpc/pipeline.hpp"
#include "cfpc/report.hpp"
#include "cfpc/solvers.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cfpc {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitConfig = 2, kExitNumerical = 3, kExitIo = 4 };

struct EvalSettings {
    std::size_t test_samples = 500;
    double bisection_tol = 1e-4;
    int multistarts = 8;
    int pga_max_iter = 1000;
    std::size_t bench_samples = 200;
    std::size_t bench_batch = 200;
    int bench_repeats = 5;
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::size_t samples = 10000;
    int threads = 1;
    SystemParams system;
    TrainConfig train;
    std::optional<double> lr0; // unset: per-loss default
    EvalSettings eval;
};

/// Learning rate used when none is configured.
inline double default_learning_rate(LossKind k)
{
    switch (k) {
    case LossKind::maxmin:
    case LossKind::maxmin_prior: return 0.3;
    case LossKind::sum_rate: return 1.0;
    case LossKind::product: return 0.03;
    }
    return 0.3;
}

inline std::uint64_t stage_seed(const RunConfig& c, std::string_view stage) { return derive_seed(c.seed, stage); }

inline nlohmann::json run_config_to_json(const RunConfig& c)
{
    auto train = train_config_to_json(c.train);
    train.erase("loss");
    train.erase("seed");
    if (c.lr0) train["lr0"] = *c.lr0;
    else train.erase("lr0");
    train["alpha"] = c.train.loss.alpha;
    train["clamp_eps"] = c.train.loss.clamp_eps;
    train["maxmin_numerator"] = c.train.loss.maxmin_numerator;
    if (c.train.loss.mu.size()) train["mu"] = std::vector<double>(c.train.loss.mu.data(), c.train.loss.mu.data() + c.train.loss.mu.size());
    if (c.train.loss.gamma_w.size())
        train["gamma"] = std::vector<double>(c.train.loss.gamma_w.data(), c.train.loss.gamma_w.data() + c.train.loss.gamma_w.size());
    return {{"seed", c.seed},
            {"samples", c.samples},
            {"threads", c.threads},
            {"system", c.system},
            {"train", train},
            {"eval",
             {{"test_samples", c.eval.test_samples},
              {"bisection_tol", c.eval.bisection_tol},
              {"multistarts", c.eval.multistarts},
              {"pga_max_iter", c.eval.pga_max_iter},
              {"bench_samples", c.eval.bench_samples},
              {"bench_batch", c.eval.bench_batch},
              {"bench_repeats", c.eval.bench_repeats}}}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j)
{
    RunConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        c.samples = j.value("samples", c.samples);
        c.threads = j.value("threads", c.threads);
        if (j.contains("system")) c.system = j.at("system").get<SystemParams>();
        if (j.contains("train")) {
            const auto& t = j.at("train");
            auto& tc = c.train;
            tc.epochs = t.value("epochs", tc.epochs);
            tc.batch_size = t.value("batch_size", tc.batch_size);
            if (t.contains("lr0")) c.lr0 = t.at("lr0").get<double>();
            tc.lr_drop_epoch = t.value("lr_drop_epoch", tc.lr_drop_epoch);
            tc.lr_drop_factor = t.value("lr_drop_factor", tc.lr_drop_factor);
            tc.momentum = t.value("momentum", tc.momentum);
            tc.hidden1 = t.value("hidden1", tc.hidden1);
            tc.hidden2 = t.value("hidden2", tc.hidden2);
            tc.loss.alpha = t.value("alpha", tc.loss.alpha);
            tc.loss.clamp_eps = t.value("clamp_eps", tc.loss.clamp_eps);
            tc.loss.maxmin_numerator = t.value("maxmin_numerator", tc.loss.maxmin_numerator);
            auto vec = [&](const char* key, Vec& dst) {
                if (!t.contains(key)) return;
                const auto v = t.at(key).get<std::vector<double>>();
                dst = Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
            };
            vec("mu", tc.loss.mu);
            vec("gamma", tc.loss.gamma_w);
        }
        if (j.contains("eval")) {
            const auto& e = j.at("eval");
            auto& ev = c.eval;
            ev.test_samples = e.value("test_samples", ev.test_samples);
            ev.bisection_tol = e.value("bisection_tol", ev.bisection_tol);
            ev.multistarts = e.value("multistarts", ev.multistarts);
            ev.pga_max_iter = e.value("pga_max_iter", ev.pga_max_iter);
            ev.bench_samples = e.value("bench_samples", ev.bench_samples);
            ev.bench_batch = e.value("bench_batch", ev.bench_batch);
            ev.bench_repeats = e.value("bench_repeats", ev.bench_repeats);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed run config: ") + e.what());
    }
    c.system.validate();
    return c;
}

inline RunConfig load_run_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

/// Resolves the loss spec and learning rate for `kind`; per-UE weights left
/// empty in the config take their defaults (mu = 5, gamma = 1).
inline TrainConfig resolve_train_config(const RunConfig& c, LossKind kind)
{
    TrainConfig t = c.train;
    const int K = c.system.num_ues;
    const auto defaults = LossSpec::defaults(kind, K);
    t.loss.kind = kind;
    if (t.loss.mu.size() == 0) t.loss.mu = defaults.mu;
    if (t.loss.gamma_w.size() == 0) t.loss.gamma_w = defaults.gamma_w;
    t.lr0 = c.lr0.value_or(default_learning_rate(kind));
    t.seed = stage_seed(c, "train");
    return t;
}

/// Output paths: relative paths are placed under $CFPC_OUT_ROOT when set.
inline std::filesystem::path resolve_out(const std::string& out)
{
    std::filesystem::path p(out);
    if (p.is_relative()) {
        if (const char* root = std::getenv("CFPC_OUT_ROOT"); root && *root) p = std::filesystem::path(root) / p;
    }
    return p;
}

inline std::string file_digest(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read '" + p.string() + "'");
    Digest d;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        d.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return d.hex();
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command, const RunConfig& cfg,
                           const nlohmann::json& details, const std::vector<std::filesystem::path>& outputs)
{
    auto files = nlohmann::json::object();
    for (const auto& f : outputs) files[f.filename().string()] = file_digest(f);
    const nlohmann::json m{{"format", "cfpc-manifest"},
                           {"version", 1},
                           {"generator", std::string(kVersion)},
                           {"command", command},
                           {"config", run_config_to_json(cfg)},
                           {"details", details},
                           {"outputs", files}};
    const auto p = dir / ("manifest_" + command + ".json");
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    out << m.dump(2) << '\n';
    if (!out) throw IoError("write failed for '" + p.string() + "'");
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Writes dataset.bin and manifest_generate.json; returns the dataset digest.
inline std::string cmd_generate(const RunConfig& cfg, const std::filesystem::path& out_dir)
{
    detail::ensure_dir(out_dir);
    const auto ds = build_dataset(cfg.system, cfg.samples, stage_seed(cfg, "dataset"), cfg.threads);
    const auto path = out_dir / "dataset.bin";
    save_dataset(ds, path.string());
    const auto digest = ds.digest();
    write_manifest(out_dir, "generate", cfg,
                   {{"dataset_seed", ds.seed}, {"dataset_digest", digest}, {"num_samples", ds.size()}}, {path});
    return digest;
}

struct TrainOutputs {
    std::filesystem::path checkpoint;
    std::filesystem::path curve;
};

/// Writes model.json, curve.csv and manifest_train.json. On divergence the
/// partial curve is still written before TrainingDiverged propagates.
inline TrainOutputs cmd_train(const RunConfig& cfg, LossKind loss, const std::string& dataset_path,
                              const std::filesystem::path& out_dir)
{
    detail::ensure_dir(out_dir);
    const auto ds = load_dataset(dataset_path);
    if (ds.num_ues() != cfg.system.num_ues || ds.num_aps() != cfg.system.num_aps)
        throw ConfigError("dataset has K=" + std::to_string(ds.num_ues()) + ", L=" + std::to_string(ds.num_aps()) +
                          " but config has K=" + std::to_string(cfg.system.num_ues) +
                          ", L=" + std::to_string(cfg.system.num_aps));
    const auto tc = resolve_train_config(cfg, loss);
    TrainOutputs outs{out_dir / "model.json", out_dir / "curve.csv"};
    TrainResult res;
    try {
        res = train(ds, tc);
    } catch (const TrainingDiverged& e) {
        e.curve.write_csv(outs.curve.string());
        throw;
    }
    res.curve.write_csv(outs.curve.string());
    {
        std::ofstream out(outs.checkpoint, std::ios::trunc);
        if (!out) throw IoError("cannot write '" + outs.checkpoint.string() + "'");
        out << checkpoint_to_json(res.model, tc.loss, tc.seed).dump(1) << '\n';
        if (!out) throw IoError("write failed for '" + outs.checkpoint.string() + "'");
    }
    write_manifest(out_dir, "train", cfg,
                   {{"loss", to_string(loss)},
                    {"dataset", dataset_path},
                    {"dataset_digest", ds.digest()},
                    {"train_config", train_config_to_json(tc)},
                    {"plateau_epoch", plateau_epoch(res.curve)}},
                   {outs.checkpoint, outs.curve});
    return outs;
}

inline Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("checkpoint '" + path + "' is not valid JSON: " + e.what());
    }
    return checkpoint_from_json(j);
}

/// The optimization baseline matching a loss kind.
inline MethodSpec solver_method(LossKind loss, const RunConfig& cfg)
{
    const double tol = cfg.eval.bisection_tol;
    WeightedConfig wc;
    wc.multistarts = cfg.eval.multistarts;
    wc.max_iter = cfg.eval.pga_max_iter;
    wc.seed = stage_seed(cfg, "solver");
    switch (loss) {
    case LossKind::maxmin:
    case LossKind::maxmin_prior:
        return {"solver", [tol](const Sample& s) { return solve_maxmin(s.coeffs, tol).eta; }};
    case LossKind::sum_rate:
        return {"solver", [wc](const Sample& s) { return solve_weighted(s.coeffs, Objective::sum_rate, wc).eta; }};
    case LossKind::product:
        return {"solver", [wc](const Sample& s) { return solve_weighted(s.coeffs, Objective::product, wc).eta; }};
    }
    throw ConfigError("no solver for loss");
}

inline MethodSpec dl_method(const MlpModel& m)
{
    return {"dl", [&m](const Sample& s) { return infer(m, s.b); }};
}

inline MethodSpec equal_power_method()
{
    return {"equal", [](const Sample& s) { return PowerAllocation::full(s.coeffs.num_ues()); }};
}

inline void check_model_matches(const MlpModel& m, const RunConfig& cfg)
{
    if (m.dims.inputs != cfg.system.num_ues || m.dims.outputs != cfg.system.num_ues)
        throw ConfigError("checkpoint was trained for K=" + std::to_string(m.dims.inputs) + " but config has K=" +
                          std::to_string(cfg.system.num_ues));
}

/// Compares the checkpoint against the requested baselines ("solver",
/// "equal") on a fresh test set and writes CSV + JSON reports.
inline ComparisonReport cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path,
                                 const std::vector<std::string>& baselines, const std::filesystem::path& out_dir)
{
    const auto cp = load_checkpoint(checkpoint_path);
    check_model_matches(cp.model, cfg);
    std::vector<MethodSpec> methods{dl_method(cp.model)};
    for (const auto& b : baselines) {
        if (b == "solver") methods.push_back(solver_method(cp.loss.kind, cfg));
        else if (b == "equal") methods.push_back(equal_power_method());
        else throw ConfigError("unknown baseline '" + b + "' (expected solver|equal)");
    }
    const auto test = build_dataset(cfg.system, cfg.eval.test_samples, stage_seed(cfg, "test"), cfg.threads);
    auto rep = compare_methods(test, methods, cfg.system.tau_p, cfg.system.tau_c, cfg.threads);
    rep.metadata["loss"] = to_string(cp.loss.kind);
    rep.metadata["checkpoint"] = checkpoint_path;
    rep.metadata["checkpoint_digest"] = file_digest(checkpoint_path);
    rep.metadata["config"] = run_config_to_json(cfg);
    detail::ensure_dir(out_dir);
    export_report(rep, ExportFormat::csv, out_dir);
    export_report(rep, ExportFormat::json, out_dir);
    write_manifest(out_dir, "eval", cfg, {{"checkpoint", checkpoint_path}, {"baselines", baselines}},
                   {out_dir / "cdf.csv", out_dir / "summary.csv", out_dir / "per_sample_se.csv", out_dir / "report.json"});
    return rep;
}

/// Times DL inference (batched) against the matching solver (per sample).
inline TimingReport cmd_bench(const RunConfig& cfg, const std::string& checkpoint_path,
                              const std::filesystem::path& out_dir)
{
    const auto cp = load_checkpoint(checkpoint_path);
    check_model_matches(cp.model, cfg);
    const auto test = build_dataset(cfg.system, std::max(cfg.eval.bench_samples, cfg.eval.bench_batch),
                                    stage_seed(cfg, "bench"), cfg.threads);
    const auto solver = solver_method(cp.loss.kind, cfg);
    const MlpModel& model = cp.model;
    std::vector<TimedMethod> methods{
        {"dl", true,
         [&model](std::span<const Sample> batch) {
             Mat b(model.dims.inputs, static_cast<Eigen::Index>(batch.size()));
             for (std::size_t i = 0; i < batch.size(); ++i) b.col(static_cast<Eigen::Index>(i)) = batch[i].b;
             const Mat eta = infer_batch(model, b);
             if (!eta.allFinite()) throw NumericalError("bench: non-finite inference output");
         }},
        {"solver", false,
         [&solver](std::span<const Sample> one) {
             for (const auto& s : one) (void)solver.allocate(s);
         }},
    };
    const auto rep = bench_timing(test, methods, cfg.eval.bench_batch, cfg.eval.bench_repeats, cfg.eval.bench_samples);
    export_timing(rep, ExportFormat::csv, out_dir);
    export_timing(rep, ExportFormat::json, out_dir);
    write_manifest(out_dir, "bench", cfg,
                   {{"checkpoint", checkpoint_path},
                    {"loss", to_string(cp.loss.kind)},
                    {"speedup", rep.at("solver").sec_per_sample / rep.at("dl").sec_per_sample}},
                   {out_dir / "timing.csv", out_dir / "timing.json"});
    return rep;
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

inline std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

/// Entry point of the cfpc tool; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"cfpc: uplink power control for cell-free massive MIMO"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads, ues, aps;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--seed", seed, "Master seed");
        sub->add_option("--threads", threads, "Worker threads for dataset building and evaluation");
        sub->add_option("--ues", ues, "Override system.num_ues");
        sub->add_option("--aps", aps, "Override system.num_aps");
    };

    std::string out_dir = "out";
    std::optional<std::size_t> samples;
    auto* gen = app.add_subcommand("generate", "Build a training dataset");
    common(gen);
    gen->add_option("--samples", samples, "Number of samples (default 10000)");
    gen->add_option("--out", out_dir, "Output directory");

    std::string loss_name = "maxmin";
    std::string dataset_path;
    std::optional<int> epochs, batch_size;
    std::optional<double> lr;
    auto* tr = app.add_subcommand("train", "Train a power-control network");
    common(tr);
    tr->add_option("--loss", loss_name, "maxmin|maxmin-prior|sumrate|product")
        ->check(CLI::IsMember({"maxmin", "maxmin-prior", "sumrate", "product"}));
    tr->add_option("--dataset", dataset_path, "Dataset file from 'generate'")->required();
    tr->add_option("--epochs", epochs, "Training epochs (default 300)");
    tr->add_option("--batch-size", batch_size, "Minibatch size (default 256)");
    tr->add_option("--lr", lr, "Initial learning rate (default per loss: 0.3 / 0.3 / 1.0 / 0.03)");
    tr->add_option("--out", out_dir, "Output directory");

    std::string checkpoint;
    std::string baselines = "solver,equal";
    std::optional<std::size_t> test_samples;
    auto* ev = app.add_subcommand("eval", "Compare a trained network with baselines");
    common(ev);
    ev->add_option("--checkpoint", checkpoint, "model.json from 'train'")->required();
    ev->add_option("--baselines", baselines, "Comma-separated subset of solver,equal");
    ev->add_option("--test-samples", test_samples, "Fresh test samples (default 500)");
    ev->add_option("--out", out_dir, "Output directory");

    auto* be = app.add_subcommand("bench", "Time network inference against the solver");
    common(be);
    be->add_option("--checkpoint", checkpoint, "model.json from 'train'")->required();
    be->add_option("--out", out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (seed) cfg.seed = *seed;
        if (threads) cfg.threads = *threads;
        if (ues) cfg.system.num_ues = *ues;
        if (aps) cfg.system.num_aps = *aps;
        if (samples) cfg.samples = *samples;
        if (epochs) cfg.train.epochs = *epochs;
        if (batch_size) cfg.train.batch_size = *batch_size;
        if (lr) cfg.lr0 = *lr;
        if (test_samples) cfg.eval.test_samples = *test_samples;
        cfg.system.validate();
        const auto dir = resolve_out(out_dir);

        if (gen->parsed()) {
            const auto digest = cmd_generate(cfg, dir);
            out << "dataset " << (dir / "dataset.bin").string() << " digest " << digest << '\n';
        } else if (tr->parsed()) {
            const auto o = cmd_train(cfg, loss_kind_from_string(loss_name), dataset_path, dir);
            out << "checkpoint " << o.checkpoint.string() << " curve " << o.curve.string() << '\n';
        } else if (ev->parsed()) {
            const auto rep = cmd_eval(cfg, checkpoint, split_list(baselines), dir);
            for (std::size_t j = 0; j < rep.methods.size(); ++j) {
                const auto& s = rep.summaries[j];
                out << rep.methods[j] << ": median min-SE " << s.median_min_se << ", median sum-SE "
                    << s.median_sum_se << ", median geo-mean SE " << s.median_geo_mean_se << ", 5% SE "
                    << s.p5_user_se << '\n';
            }
        } else if (be->parsed()) {
            const auto rep = cmd_bench(cfg, checkpoint, dir);
            for (const auto& e : rep.entries) out << e.method << ": " << e.sec_per_sample << " s/sample\n";
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

} // namespace cfpc
