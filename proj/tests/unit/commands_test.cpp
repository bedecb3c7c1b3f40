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

#include "cfpc/commands.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cfpc;

namespace {

std::filesystem::path fresh_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "cfpc_commands_test" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args)
{
    args.insert(args.begin(), "cfpc");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::vector<std::string> kSmall{"--ues", "4", "--aps", "10", "--seed", "3"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail = kSmall)
{
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
}

} // namespace

TEST(Config, DefaultLearningRates)
{
    EXPECT_EQ(default_learning_rate(LossKind::maxmin), 0.3);
    EXPECT_EQ(default_learning_rate(LossKind::sum_rate), 1.0);
    EXPECT_EQ(default_learning_rate(LossKind::product), 0.03);
    RunConfig c;
    EXPECT_EQ(resolve_train_config(c, LossKind::product).lr0, 0.03);
    c.lr0 = 0.5;
    EXPECT_EQ(resolve_train_config(c, LossKind::product).lr0, 0.5);
}

TEST(Config, DefaultsFollowTrainingRecipe)
{
    const RunConfig c;
    EXPECT_EQ(c.samples, 10000u);
    EXPECT_EQ(c.train.epochs, 300);
    EXPECT_EQ(c.train.lr_drop_epoch, 150);
    const auto t = resolve_train_config(c, LossKind::sum_rate);
    EXPECT_EQ(t.loss.mu, Vec::Constant(8, 5.0));
    EXPECT_EQ(t.loss.gamma_w, Vec::Ones(8));
    EXPECT_EQ(t.loss.alpha, 1.0);
}

TEST(Config, JsonRoundTrip)
{
    RunConfig c;
    c.seed = 42;
    c.samples = 123;
    c.system.num_ues = 5;
    c.train.epochs = 7;
    c.lr0 = 0.25;
    c.eval.test_samples = 9;
    const auto back = run_config_from_json(run_config_to_json(c));
    EXPECT_EQ(run_config_to_json(back), run_config_to_json(c));
    EXPECT_THROW(run_config_from_json({{"system", {{"num_ues", 0}}}}), ConfigError);
}

TEST(Config, StageSeedsAreDistinct)
{
    RunConfig c;
    EXPECT_NE(stage_seed(c, "dataset"), stage_seed(c, "test"));
    EXPECT_NE(stage_seed(c, "train"), stage_seed(c, "solver"));
    EXPECT_EQ(stage_seed(c, "dataset"), derive_seed(1, "dataset"));
}

TEST(Cli, UsageErrors)
{
    EXPECT_EQ(run({}).code, kExitUsage);
    EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
    EXPECT_EQ(run({"train", "--loss", "maxsum", "--dataset", "x"}).code, kExitUsage);
    EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST(Cli, InvalidConfigExitsWithConfigCode)
{
    const auto dir = fresh_dir("badcfg");
    const auto r = run({"generate", "--ues", "0", "--out", dir.string()});
    EXPECT_EQ(r.code, kExitConfig);
    EXPECT_NE(r.err.find("num_ues"), std::string::npos);
    {
        std::ofstream(dir / "cfg.json") << "{ not json";
    }
    EXPECT_EQ(run({"generate", "--config", (dir / "cfg.json").string(), "--out", dir.string()}).code, kExitConfig);
    EXPECT_EQ(run({"generate", "--config", (dir / "none.json").string()}).code, kExitIo);
}

TEST(Cli, GenerateIsDeterministic)
{
    const auto a = fresh_dir("gen_a");
    const auto b = fresh_dir("gen_b");
    ASSERT_EQ(run(with({"generate", "--samples", "10", "--out", a.string()})).code, kExitOk);
    ASSERT_EQ(run(with({"generate", "--samples", "10", "--out", b.string()})).code, kExitOk);
    EXPECT_EQ(slurp(a / "dataset.bin"), slurp(b / "dataset.bin"));
    EXPECT_TRUE(std::filesystem::exists(a / "manifest_generate.json"));
    const auto ds = load_dataset((a / "dataset.bin").string());
    EXPECT_EQ(ds.size(), 10u);
    EXPECT_EQ(ds.num_ues(), 4);
}

TEST(Cli, TrainEvalBenchSmoke)
{
    const auto dir = fresh_dir("smoke");
    const auto ds = (dir / "dataset.bin").string();
    ASSERT_EQ(run(with({"generate", "--samples", "64", "--out", dir.string()})).code, kExitOk);
    const auto tr = run(with({"train", "--loss", "product", "--dataset", ds, "--epochs", "5", "--batch-size", "16",
                              "--out", dir.string()}));
    ASSERT_EQ(tr.code, kExitOk) << tr.err;
    const auto cp = load_checkpoint((dir / "model.json").string());
    EXPECT_EQ(cp.loss.kind, LossKind::product);
    std::ifstream manifest(dir / "manifest_train.json");
    const auto m = nlohmann::json::parse(manifest);
    EXPECT_EQ(m.at("details").at("train_config").at("lr0"), 0.03);

    const auto ev = run(with({"eval", "--checkpoint", (dir / "model.json").string(), "--test-samples", "6", "--out",
                              dir.string()}));
    ASSERT_EQ(ev.code, kExitOk) << ev.err;
    for (const char* f : {"cdf.csv", "summary.csv", "per_sample_se.csv", "report.json", "manifest_eval.json"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    EXPECT_NE(ev.out.find("dl:"), std::string::npos);
    EXPECT_NE(ev.out.find("solver:"), std::string::npos);
    EXPECT_NE(ev.out.find("equal:"), std::string::npos);

    {
        std::ofstream cfg(dir / "bench.json");
        cfg << R"({"eval": {"bench_samples": 3, "bench_batch": 8, "bench_repeats": 2}})";
    }
    const auto be = run(with({"bench", "--config", (dir / "bench.json").string(), "--checkpoint",
                              (dir / "model.json").string(), "--out", dir.string()}));
    ASSERT_EQ(be.code, kExitOk) << be.err;
    EXPECT_TRUE(std::filesystem::exists(dir / "timing.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "manifest_bench.json"));
}

TEST(Cli, MissingInputsAreCleanErrors)
{
    const auto dir = fresh_dir("missing");
    EXPECT_EQ(run({"eval", "--checkpoint", (dir / "nope.json").string(), "--out", dir.string()}).code, kExitIo);
    EXPECT_EQ(run({"train", "--dataset", (dir / "nope.bin").string(), "--out", dir.string()}).code, kExitIo);
}

TEST(Cli, CheckpointSizeMismatchIsConfigError)
{
    const auto dir = fresh_dir("mismatch");
    ASSERT_EQ(run(with({"generate", "--samples", "16", "--out", dir.string()})).code, kExitOk);
    ASSERT_EQ(run(with({"train", "--dataset", (dir / "dataset.bin").string(), "--epochs", "1", "--batch-size", "8",
                        "--out", dir.string()}))
                  .code,
              kExitOk);
    const auto r = run({"eval", "--ues", "6", "--aps", "10", "--checkpoint", (dir / "model.json").string(),
                        "--test-samples", "2", "--out", dir.string()});
    EXPECT_EQ(r.code, kExitConfig);
    EXPECT_NE(r.err.find("K=4"), std::string::npos);
    // training on a dataset of another size is refused too
    EXPECT_EQ(run({"train", "--ues", "6", "--aps", "10", "--dataset", (dir / "dataset.bin").string(), "--out",
                   dir.string()})
                  .code,
              kExitConfig);
}

TEST(Cli, OutputRootFromEnvironment)
{
    const auto root = fresh_dir("envroot");
    ::setenv("CFPC_OUT_ROOT", root.string().c_str(), 1);
    EXPECT_EQ(resolve_out("run1"), root / "run1");
    EXPECT_EQ(resolve_out("/abs/x"), std::filesystem::path("/abs/x"));
    ::unsetenv("CFPC_OUT_ROOT");
    EXPECT_EQ(resolve_out("run1"), std::filesystem::path("run1"));
}

TEST(Cli, DivergedTrainingKeepsPartialCurve)
{
    const auto dir = fresh_dir("diverge");
    ASSERT_EQ(run(with({"generate", "--samples", "16", "--out", dir.string()})).code, kExitOk);
    const auto r = run(with({"train", "--loss", "sumrate", "--dataset", (dir / "dataset.bin").string(), "--epochs", "3",
                             "--batch-size", "8", "--lr", "1e308", "--out", dir.string()}));
    EXPECT_EQ(r.code, kExitNumerical) << r.err;
    EXPECT_NE(r.err.find("epoch"), std::string::npos);
    EXPECT_TRUE(std::filesystem::exists(dir / "curve.csv"));
}
