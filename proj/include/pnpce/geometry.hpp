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

#ifndef pnpce_geometry_H
#define pnpce_geometry_H

#include "pnpce/types.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnpce
{
    // Antenna grid of one uniform planar subarray, half-wavelength spacing
    struct SubarrayShape
    {
        Index n_x = 1;
        Index n_z = 1;

        Index size() const { return n_x * n_z; }
        bool operator==(const SubarrayShape &) const = default;
    };

    struct ArrayConfig
    {
        Index n_t = 32; // Tx antennas
        Index n_r = 16; // Rx antennas
        Index k_t = 2;  // Tx subarrays
        Index k_r = 2;  // Rx subarrays
        Index l_t = 2;  // Tx RF chains
        Index l_r = 4;  // Rx RF chains
        SubarrayShape tx_subarray{4, 4};
        SubarrayShape rx_subarray{4, 2};

        Index tx_per_subarray() const { return n_t / k_t; }
        Index rx_per_subarray() const { return n_r / k_r; }
        Index unknowns() const { return n_t * n_r; }

        // Throws std::invalid_argument naming the violated invariant
        void validate() const;

        bool operator==(const ArrayConfig &) const = default;
    };

    enum class CodebookKind
    {
        full_dft,
        block_diagonal
    };

    template <typename T>
    struct Codebook
    {
        CMatrix<T> matrix;
        CodebookKind kind = CodebookKind::full_dft;
        Index blocks = 1;

        Index dim() const { return matrix.rows(); }
    };

    // Rx and Tx angular-domain codebooks of an array
    struct CodebookPair
    {
        Codebook<double> rx;
        Codebook<double> tx;
    };

    // max |A^H A - I| relative to the largest diagonal entry
    template <typename Derived>
    typename Derived::RealScalar unitarity_error(const Eigen::MatrixBase<Derived> &a)
    {
        using R = typename Derived::RealScalar;
        if (a.rows() != a.cols() || a.rows() == 0)
            return std::numeric_limits<R>::infinity();
        const auto gram = (a.adjoint() * a).eval();
        const R scale = std::max(R(1), gram.diagonal().cwiseAbs().maxCoeff());
        return (gram - decltype(gram)::Identity(a.rows(), a.cols())).cwiseAbs().maxCoeff() / scale;
    }

    template <typename Derived>
    bool is_unitary(const Eigen::MatrixBase<Derived> &a, typename Derived::RealScalar tol = 1e-10)
    {
        return unitarity_error(a) <= tol;
    }

    // Phase ramp e^{-j pi u m}, m = 0..n-1
    template <typename T>
    CVector<T> phase_ramp(T u, Index n)
    {
        CVector<T> v(n);
        for (Index m = 0; m < n; ++m)
            v(m) = std::polar(T(1), -std::numbers::pi_v<T> * u * T(m));
        return v;
    }

    // UPA steering vector, x index outer and z index inner, unit norm
    template <typename T>
    CVector<T> upa_steering(T theta, T phi, Index n_x, Index n_z)
    {
        if (!std::isfinite(theta) || !std::isfinite(phi))
            throw std::invalid_argument("upa_steering: angles must be finite");
        if (n_x < 1 || n_z < 1)
            throw std::invalid_argument("upa_steering: array dimensions must be at least 1");

        const CVector<T> ax = phase_ramp<T>(std::sin(theta) * std::cos(phi), n_x);
        const CVector<T> az = phase_ramp<T>(std::sin(phi), n_z);
        const T norm = T(1) / std::sqrt(T(n_x * n_z));

        CVector<T> a(n_x * n_z);
        for (Index ix = 0; ix < n_x; ++ix)
            a.segment(ix * n_z, n_z) = ax(ix) * norm * az;
        return a;
    }

    // Unitary DFT matrix with F[m, k] = e^{-j 2 pi m k / n} / sqrt(n)
    template <typename T>
    CMatrix<T> dft_matrix(Index n)
    {
        CMatrix<T> f(n, n);
        const T scale = T(1) / std::sqrt(T(n));
        for (Index m = 0; m < n; ++m)
            for (Index k = 0; k < n; ++k)
            {
                // Reduce the exponent modulo n before scaling to keep the phase exact for large n
                const Index e = (m * k) % n;
                f(m, k) = std::polar(scale, -T(2) * std::numbers::pi_v<T> * T(e) / T(n));
            }
        return f;
    }

    // 2D DFT codebook F_x (x) F_z; column (kx, kz) is the steering vector on the spatial-frequency grid
    template <typename T>
    Codebook<T> dft_codebook(Index n_x, Index n_z)
    {
        if (n_x < 1 || n_z < 1)
            throw std::invalid_argument("dft_codebook: array dimensions must be at least 1");
        Codebook<T> cb;
        cb.matrix = Eigen::kroneckerProduct(dft_matrix<T>(n_x), dft_matrix<T>(n_z)).eval();
        cb.kind = CodebookKind::full_dft;
        cb.blocks = 1;
        return cb;
    }

    template <typename T>
    Codebook<T> blkdiag_codebook(std::span<const Codebook<T>> blocks)
    {
        if (blocks.empty())
            throw std::invalid_argument("blkdiag_codebook: at least one block required");

        Index total = 0;
        for (std::size_t b = 0; b < blocks.size(); ++b)
        {
            const auto &m = blocks[b].matrix;
            if (m.rows() != m.cols() || m.rows() == 0)
                throw std::invalid_argument("blkdiag_codebook: block " + std::to_string(b) + " is not square");
            if (!is_unitary(m, T(1e-10)))
                throw std::invalid_argument("blkdiag_codebook: block " + std::to_string(b) + " is not unitary");
            total += m.rows();
        }

        Codebook<T> cb;
        cb.matrix = CMatrix<T>::Zero(total, total);
        Index offset = 0;
        for (const auto &b : blocks)
        {
            cb.matrix.block(offset, offset, b.dim(), b.dim()) = b.matrix;
            offset += b.dim();
        }
        cb.kind = CodebookKind::block_diagonal;
        cb.blocks = static_cast<Index>(blocks.size());
        return cb;
    }

    // Block-diagonal codebook of k identical n_x x n_z subarray DFT blocks
    template <typename T>
    Codebook<T> subarray_codebook(Index k, const SubarrayShape &shape)
    {
        if (k < 1)
            throw std::invalid_argument("subarray_codebook: subarray count must be at least 1");
        const std::vector<Codebook<T>> blocks(static_cast<std::size_t>(k), dft_codebook<T>(shape.n_x, shape.n_z));
        return blkdiag_codebook<T>(std::span<const Codebook<T>>(blocks));
    }

    CodebookPair make_codebooks(const ArrayConfig &cfg);

    // Named presets: "desk", "mmwave", "thz"
    ArrayConfig array_preset(const std::string &name);
}

#endif
