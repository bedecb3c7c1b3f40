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
 * @file common.hpp
 * @brief Error types, seed derivation and small numeric helpers shared by
 * every cfpc module.
 */

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cfpc {

inline constexpr std::string_view kVersion = "cfpc 1.0.0";

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Invalid configuration or violated precondition on user-supplied input.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// NaN/Inf or a numerical procedure that could not complete.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be read, written or parsed.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Seeding
//
// Every random stage draws from its own std::mt19937_64 whose seed is derived
// from a parent seed and a stream label:
//
//     child = splitmix64(parent ^ splitmix64(fnv1a64(label)))
//
// Integer stream ids (per-sample seeds) use the same mixing with the id in
// place of the label hash. Adding draws to one stream never shifts another.
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) noexcept
{
    return splitmix64(parent ^ splitmix64(stream));
}

inline constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) noexcept
{
    return derive_seed(parent, fnv1a64(label));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t parent, std::string_view label)
{
    return Rng{derive_seed(parent, label)};
}

/// Streaming FNV-1a digest over raw bytes.
class Digest {
public:
    void update(const void* data, std::size_t len) noexcept
    {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001B3ULL;
        }
    }
    template <typename T>
    void update_value(const T& v) noexcept { update(&v, sizeof(T)); }

    std::uint64_t value() const noexcept { return h_; }
    std::string hex() const
    {
        static constexpr char digits[] = "0123456789abcdef";
        std::string out(16, '0');
        for (int i = 0; i < 16; ++i) out[15 - i] = digits[(h_ >> (4 * i)) & 0xF];
        return out;
    }

private:
    std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

inline bool all_finite(const Eigen::Ref<const Mat>& m) { return m.allFinite(); }

inline double sigmoid(double x) noexcept
{
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double db_to_linear(double db) noexcept { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) noexcept { return 10.0 * std::log10(lin); }

} // namespace cfpc
