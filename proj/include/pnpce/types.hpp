// SPDX-License-Identifier: Apache-2.0
//
// pnpce - plug-and-play diffusion channel estimation laboratory
// Copyright (C) 2026 The pnpce authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
// ------------------------------------------------------------------------

#ifndef pnpce_types_H
#define pnpce_types_H

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pnpce
{
    using Index = Eigen::Index;

    template <typename T>
    using Complex = std::complex<T>;

    template <typename T>
    using CMatrix = Eigen::Matrix<std::complex<T>, Eigen::Dynamic, Eigen::Dynamic>;

    template <typename T>
    using CVector = Eigen::Matrix<std::complex<T>, Eigen::Dynamic, 1>;

    template <typename T>
    using RMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

    template <typename T>
    using RVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

    // Double precision shorthands used by the channel, measurement and solver modules
    using cd = std::complex<double>;
    using CMat = CMatrix<double>;
    using CVec = CVector<double>;
    using RMat = RMatrix<double>;
    using RVec = RVector<double>;

    using Rng = std::mt19937_64;

    // Raised when an iterate, loss or score becomes non-finite
    class numerical_error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // SplitMix64 finalizer
    constexpr std::uint64_t mix64(std::uint64_t z)
    {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // FNV-1a over a purpose tag
    constexpr std::uint64_t tag_hash(std::string_view tag)
    {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        for (char c : tag)
        {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001B3ULL;
        }
        return h;
    }

    // Child seed for (parent, purpose, index). All random streams in the library hang off this.
    constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view purpose, std::uint64_t index = 0)
    {
        return mix64(mix64(parent ^ tag_hash(purpose)) + index);
    }

    inline Rng make_rng(std::uint64_t parent, std::string_view purpose, std::uint64_t index = 0)
    {
        return Rng(derive_seed(parent, purpose, index));
    }

    // Circular complex Gaussian with E|z|^2 = 1
    inline cd complex_normal(Rng &rng)
    {
        std::normal_distribution<double> n(0.0, 0.7071067811865476);
        const double re = n(rng);
        const double im = n(rng);
        return {re, im};
    }

    inline CVec complex_normal_vector(Rng &rng, Index n)
    {
        CVec v(n);
        for (Index i = 0; i < n; ++i)
            v(i) = complex_normal(rng);
        return v;
    }

    inline double uniform(Rng &rng, double lo, double hi)
    {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    }

    inline std::uint64_t uniform_index(Rng &rng, std::uint64_t n)
    {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng);
    }
}

#endif
