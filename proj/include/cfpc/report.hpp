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
 * @file report.hpp
 * @brief Empirical CDFs, paired per-method SE comparisons, timing benchmarks
 * and their CSV/JSON exports.
 */

#pragma once

#include "cfpc/common.hpp"
#include "cfpc/metrics.hpp"
#include "cfpc/pipeline.hpp"
#include "cfpc/solvers.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace cfpc {

struct CdfPoint {
    double x = 0.0;
    double f = 0.0;
};

/// Right-continuous step function: one point per distinct value, F(x) the
/// fraction of values <= x.
inline std::vector<CdfPoint> empirical_cdf(std::span<const double> values)
{
    if (values.empty()) throw ConfigError("empirical_cdf: empty input");
    std::vector<double> v(values.begin(), values.end());
    for (double x : v)
        if (!std::isfinite(x)) throw NumericalError("empirical_cdf: non-finite value");
    std::sort(v.begin(), v.end());
    std::vector<CdfPoint> out;
    const double n = static_cast<double>(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
        out.push_back({v[i], static_cast<double>(i + 1) / n});
    }
    out.back().f = 1.0;
    return out;
}

/// F(x) from a step function produced by empirical_cdf.
inline double cdf_at(const std::vector<CdfPoint>& cdf, double x)
{
    auto it = std::upper_bound(cdf.begin(), cdf.end(), x, [](double v, const CdfPoint& p) { return v < p.x; });
    return it == cdf.begin() ? 0.0 : std::prev(it)->f;
}

/// Nearest-rank percentile, p in (0, 100].
inline double percentile(std::span<const double> values, double p)
{
    if (values.empty()) throw ConfigError("percentile: empty input");
    if (!(p > 0.0 && p <= 100.0)) throw ConfigError("percentile: p must be in (0, 100]");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
    return v[std::max<std::size_t>(rank, 1) - 1];
}

inline double median(std::span<const double> values)
{
    if (values.empty()) throw ConfigError("median: empty input");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// First-order stochastic dominance of `a` over `b`: F_a(x) <= F_b(x) + slack
/// at every point of either sample.
inline bool stochastically_dominates(std::span<const double> a, std::span<const double> b, double slack = 0.0)
{
    const auto fa = empirical_cdf(a);
    const auto fb = empirical_cdf(b);
    for (const auto* cdf : {&fa, &fb})
        for (const auto& pt : *cdf)
            if (cdf_at(fa, pt.x) > cdf_at(fb, pt.x) + slack) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Method comparison
// ---------------------------------------------------------------------------

/// A power-control method evaluated per sample. Throwing marks the sample as
/// failed for this method.
struct MethodSpec {
    std::string name;
    std::function<PowerAllocation(const Sample&)> allocate;
};

struct MethodSummary {
    double median_min_se = 0.0;
    double median_sum_se = 0.0;
    double median_geo_mean_se = 0.0;
    double p5_user_se = 0.0; // 95%-likely per-user SE
};

/// Statistics of an N x K matrix of per-user SE (one row per sample).
inline MethodSummary summarize(const Mat& se_rows)
{
    if (se_rows.size() == 0) throw ConfigError("summarize: empty SE matrix");
    const auto n = static_cast<std::size_t>(se_rows.rows());
    std::vector<double> mins(n), sums(n), geos(n);
    for (Eigen::Index i = 0; i < se_rows.rows(); ++i) {
        const auto row = se_rows.row(i).array();
        mins[static_cast<std::size_t>(i)] = row.minCoeff();
        sums[static_cast<std::size_t>(i)] = row.sum();
        geos[static_cast<std::size_t>(i)] = row.minCoeff() > 0.0 ? std::exp(row.log().mean()) : 0.0;
    }
    std::vector<double> pooled(se_rows.data(), se_rows.data() + se_rows.size());
    return {median(mins), median(sums), median(geos), percentile(pooled, 5.0)};
}

inline nlohmann::json summary_to_json(const MethodSummary& s)
{
    return {{"median_min_se", s.median_min_se},
            {"median_sum_se", s.median_sum_se},
            {"median_geo_mean_se", s.median_geo_mean_se},
            {"p5_user_se", s.p5_user_se}};
}

inline MethodSummary summary_from_json(const nlohmann::json& j)
{
    return {j.at("median_min_se").get<double>(), j.at("median_sum_se").get<double>(),
            j.at("median_geo_mean_se").get<double>(), j.at("p5_user_se").get<double>()};
}

struct ComparisonReport {
    std::vector<std::string> methods;
    std::vector<Mat> se;                     // per method, N_valid x K
    std::vector<std::size_t> sample_ids;     // dataset indices of the valid rows
    std::vector<std::size_t> failed_samples; // excluded from every method
    std::vector<MethodSummary> summaries;
    nlohmann::json metadata = nlohmann::json::object();

    std::size_t index_of(const std::string& method) const
    {
        auto it = std::find(methods.begin(), methods.end(), method);
        if (it == methods.end()) throw ConfigError("report has no method '" + method + "'");
        return static_cast<std::size_t>(it - methods.begin());
    }
    /// Per-user SE pooled across samples.
    std::vector<double> pooled(const std::string& method) const
    {
        const Mat& m = se[index_of(method)];
        return {m.data(), m.data() + m.size()};
    }
    /// Per-sample minimum SE.
    std::vector<double> per_sample_min(const std::string& method) const
    {
        const Mat& m = se[index_of(method)];
        std::vector<double> v(static_cast<std::size_t>(m.rows()));
        for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m.row(i).minCoeff();
        return v;
    }
};

/// Evaluates every method on every sample. A sample on which any method fails
/// is dropped for all of them so the comparison stays paired.
inline ComparisonReport compare_methods(const Dataset& test, const std::vector<MethodSpec>& methods, int tau_p,
                                        int tau_c, int threads = 1)
{
    if (methods.empty()) throw ConfigError("compare_methods: no methods");
    if (test.size() == 0) throw ConfigError("compare_methods: empty test set");
    const auto n = test.size();
    const auto m = methods.size();
    const int K = test.num_ues();

    std::vector<std::vector<std::optional<Vec>>> rows(m, std::vector<std::optional<Vec>>(n));
    detail::parallel_for(n, threads, [&](std::size_t i) {
        for (std::size_t j = 0; j < m; ++j) {
            try {
                const auto& s = test.samples[i];
                rows[j][i] = se(sinr(s.coeffs, methods[j].allocate(s)), tau_p, tau_c);
                if (!rows[j][i]->allFinite()) rows[j][i].reset();
            } catch (const std::exception&) {
                rows[j][i].reset();
            }
        }
    });

    ComparisonReport rep;
    for (std::size_t i = 0; i < n; ++i) {
        bool ok = true;
        for (std::size_t j = 0; j < m; ++j) ok = ok && rows[j][i].has_value();
        (ok ? rep.sample_ids : rep.failed_samples).push_back(i);
    }
    if (rep.sample_ids.empty()) throw NumericalError("compare_methods: every sample failed for some method");
    for (std::size_t j = 0; j < m; ++j) {
        rep.methods.push_back(methods[j].name);
        Mat se_rows(static_cast<Eigen::Index>(rep.sample_ids.size()), K);
        for (std::size_t r = 0; r < rep.sample_ids.size(); ++r)
            se_rows.row(static_cast<Eigen::Index>(r)) = rows[j][rep.sample_ids[r]]->transpose();
        rep.summaries.push_back(summarize(se_rows));
        rep.se.push_back(std::move(se_rows));
    }
    rep.metadata = {{"num_ues", K},
                    {"num_aps", test.num_aps()},
                    {"tau_p", tau_p},
                    {"tau_c", tau_c},
                    {"test_seed", test.seed},
                    {"test_samples", n},
                    {"dataset_digest", test.digest()}};
    return rep;
}

// ---------------------------------------------------------------------------
// Timing
// ---------------------------------------------------------------------------

/// `run` processes the given samples. Per-sample methods are timed one call
/// per sample; batched methods get one call over a whole batch.
struct TimedMethod {
    std::string name;
    bool batched = false;
    std::function<void(std::span<const Sample>)> run;
};

struct TimingEntry {
    std::string method;
    double sec_per_sample = 0.0;
    std::size_t samples = 0;
};

struct TimingReport {
    std::vector<TimingEntry> entries;
    std::string hardware_note;

    const TimingEntry& at(const std::string& method) const
    {
        for (const auto& e : entries)
            if (e.method == method) return e;
        throw ConfigError("timing report has no method '" + method + "'");
    }
};

inline std::string hardware_note()
{
    std::string cpu = "unknown cpu";
    std::ifstream info("/proc/cpuinfo");
    for (std::string line; std::getline(info, line);) {
        if (line.rfind("model name", 0) == 0) {
            cpu = line.substr(line.find(':') + 2);
            break;
        }
    }
    return cpu + "; hardware threads: " + std::to_string(std::thread::hardware_concurrency()) +
           "; compiler: " + __VERSION__ + "; single-threaded timing";
}

/// Per-sample solvers: one untimed warm-up call, then one timed call per
/// sample for the first `per_sample_limit` samples. Batched methods: one
/// untimed warm-up batch, then `repeats` timed calls over the first `batch`
/// samples, divided by batch * repeats.
inline TimingReport bench_timing(const Dataset& test, const std::vector<TimedMethod>& methods, std::size_t batch = 200,
                                 int repeats = 5, std::size_t per_sample_limit = std::numeric_limits<std::size_t>::max())
{
    if (batch < 1 || repeats < 1 || per_sample_limit < 1) throw ConfigError("bench_timing: batch, repeats and limit must be >= 1");
    if (test.size() == 0 || methods.empty()) throw ConfigError("bench_timing: need samples and methods");
    using clock = std::chrono::steady_clock;
    const std::span<const Sample> all(test.samples);
    TimingReport rep;
    rep.hardware_note = hardware_note();
    for (const auto& m : methods) {
        TimingEntry e;
        e.method = m.name;
        if (m.batched) {
            const auto nb = std::min(batch, all.size());
            const auto chunk = all.first(nb);
            m.run(chunk);
            const auto t0 = clock::now();
            for (int r = 0; r < repeats; ++r) m.run(chunk);
            const double total = std::chrono::duration<double>(clock::now() - t0).count();
            e.samples = nb;
            e.sec_per_sample = total / static_cast<double>(nb * static_cast<std::size_t>(repeats));
        } else {
            m.run(all.first(1));
            const auto n = std::min(per_sample_limit, all.size());
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto t0 = clock::now();
                m.run(all.subspan(i, 1));
                total += std::chrono::duration<double>(clock::now() - t0).count();
            }
            e.samples = n;
            e.sec_per_sample = total / static_cast<double>(n);
        }
        if (!(e.sec_per_sample > 0.0)) e.sec_per_sample = std::numeric_limits<double>::denorm_min();
        rep.entries.push_back(e);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Export
//
// CSV schemas (headers are fixed):
//   cdf.csv            method,x_se,F
//   summary.csv        method,median_min_se,median_sum_se,median_geo_mean_se,p5_user_se
//   per_sample_se.csv  method,sample,user,se
//   timing.csv         method,sec_per_sample
// JSON: report.json / timing.json with the same content plus metadata.
// ---------------------------------------------------------------------------

enum class ExportFormat { csv, json };

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p)
{
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    out.precision(17);
    return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& p)
{
    out.flush();
    if (!out) throw IoError("write failed for '" + p.string() + "'");
}

inline void ensure_dir(const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

} // namespace detail

inline nlohmann::json comparison_to_json(const ComparisonReport& r)
{
    auto methods = nlohmann::json::array();
    for (std::size_t j = 0; j < r.methods.size(); ++j) {
        auto rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < r.se[j].rows(); ++i) {
            std::vector<double> row(static_cast<std::size_t>(r.se[j].cols()));
            for (Eigen::Index k = 0; k < r.se[j].cols(); ++k) row[static_cast<std::size_t>(k)] = r.se[j](i, k);
            rows.push_back(row);
        }
        methods.push_back({{"name", r.methods[j]}, {"summary", summary_to_json(r.summaries[j])}, {"se", rows}});
    }
    return {{"format", "cfpc-report"},
            {"version", 1},
            {"generator", std::string(kVersion)},
            {"metadata", r.metadata},
            {"sample_ids", r.sample_ids},
            {"failed_samples", r.failed_samples},
            {"methods", methods}};
}

inline ComparisonReport comparison_from_json(const nlohmann::json& j)
{
    try {
        if (j.at("format") != "cfpc-report") throw ConfigError("not a cfpc report");
        ComparisonReport r;
        r.metadata = j.at("metadata");
        r.sample_ids = j.at("sample_ids").get<std::vector<std::size_t>>();
        r.failed_samples = j.at("failed_samples").get<std::vector<std::size_t>>();
        for (const auto& m : j.at("methods")) {
            r.methods.push_back(m.at("name").get<std::string>());
            r.summaries.push_back(summary_from_json(m.at("summary")));
            const auto rows = m.at("se").get<std::vector<std::vector<double>>>();
            Mat se_rows(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (std::size_t k = 0; k < rows[i].size(); ++k)
                    se_rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
            r.se.push_back(std::move(se_rows));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed report: ") + e.what());
    }
}

/// Writes the comparison into `dir`; CSV writes cdf/summary/per_sample_se,
/// JSON writes report.json (with `extra` merged into its metadata).
inline void export_report(const ComparisonReport& r, ExportFormat fmt, const std::filesystem::path& dir,
                          const nlohmann::json& extra = nlohmann::json::object())
{
    if (r.methods.empty() || r.se.empty() || r.sample_ids.empty()) throw ConfigError("export: refusing empty report");
    detail::ensure_dir(dir);
    if (fmt == ExportFormat::json) {
        auto j = comparison_to_json(r);
        for (const auto& [k, v] : extra.items()) j["metadata"][k] = v;
        const auto p = dir / "report.json";
        auto out = detail::open_out(p);
        out << j.dump(2) << '\n';
        detail::finish(out, p);
        return;
    }
    {
        const auto p = dir / "cdf.csv";
        auto out = detail::open_out(p);
        out << "method,x_se,F\n";
        for (const auto& m : r.methods) {
            const auto pooled = r.pooled(m);
            for (const auto& pt : empirical_cdf(pooled)) out << m << ',' << pt.x << ',' << pt.f << '\n';
        }
        detail::finish(out, p);
    }
    {
        const auto p = dir / "summary.csv";
        auto out = detail::open_out(p);
        out << "method,median_min_se,median_sum_se,median_geo_mean_se,p5_user_se\n";
        for (std::size_t j = 0; j < r.methods.size(); ++j) {
            const auto& s = r.summaries[j];
            out << r.methods[j] << ',' << s.median_min_se << ',' << s.median_sum_se << ',' << s.median_geo_mean_se
                << ',' << s.p5_user_se << '\n';
        }
        detail::finish(out, p);
    }
    {
        const auto p = dir / "per_sample_se.csv";
        auto out = detail::open_out(p);
        out << "method,sample,user,se\n";
        for (std::size_t j = 0; j < r.methods.size(); ++j)
            for (Eigen::Index i = 0; i < r.se[j].rows(); ++i)
                for (Eigen::Index k = 0; k < r.se[j].cols(); ++k)
                    out << r.methods[j] << ',' << r.sample_ids[static_cast<std::size_t>(i)] << ',' << k << ','
                        << r.se[j](i, k) << '\n';
        detail::finish(out, p);
    }
}

inline nlohmann::json timing_to_json(const TimingReport& t)
{
    auto entries = nlohmann::json::array();
    for (const auto& e : t.entries)
        entries.push_back({{"method", e.method}, {"sec_per_sample", e.sec_per_sample}, {"samples", e.samples}});
    return {{"format", "cfpc-timing"}, {"version", 1}, {"hardware", t.hardware_note}, {"entries", entries}};
}

inline void export_timing(const TimingReport& t, ExportFormat fmt, const std::filesystem::path& dir)
{
    if (t.entries.empty()) throw ConfigError("export: refusing empty timing report");
    detail::ensure_dir(dir);
    if (fmt == ExportFormat::json) {
        const auto p = dir / "timing.json";
        auto out = detail::open_out(p);
        out << timing_to_json(t).dump(2) << '\n';
        detail::finish(out, p);
        return;
    }
    const auto p = dir / "timing.csv";
    auto out = detail::open_out(p);
    out << "method,sec_per_sample\n";
    for (const auto& e : t.entries) out << e.method << ',' << e.sec_per_sample << '\n';
    detail::finish(out, p);
}

} // namespace cfpc
