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

#ifndef pnpce_network_H
#define pnpce_network_H

#include "pnpce/types.hpp"

#include <array>

namespace pnpce
{
    // Convolutional denoiser: 4 FiLM-modulated encoder convolutions, 4 decoder convolutions, residual output
    struct DenoiserArch
    {
        Index rows = 16;        // grid height, n_r
        Index cols = 32;        // grid width, n_t
        Index width = 32;       // hidden channels
        Index kernel = 3;       // odd square kernel
        Index embed_freqs = 8;  // sinusoid frequencies; the encoding has 2x this many entries
        Index embed_width = 64; // hidden width of the noise-embedding MLP
        bool positional_bias = true;

        static constexpr Index in_channels = 2;
        static constexpr Index encoder_layers = 4;
        static constexpr Index decoder_layers = 4;

        Index pixels() const { return rows * cols; }
        void validate() const;

        bool operator==(const DenoiserArch &) const = default;
    };

    // Offsets of every tensor inside the flat parameter vector
    struct ParamLayout
    {
        struct Slot
        {
            Index offset = 0;
            Index size = 0;
        };

        Slot embed1_w; // (2F) x E
        Slot embed1_b;
        Slot embed2_w; // E x (8 C)
        Slot embed2_b;
        std::array<Slot, 4> enc_w; // (C_in k^2) x C
        std::array<Slot, 4> enc_b;
        std::array<Slot, 4> dec_w;
        std::array<Slot, 4> dec_b;
        Slot pos; // P x C, empty when the arch has no positional bias
        Index total = 0;

        static ParamLayout of(const DenoiserArch &arch);
    };

    Index parameter_count(const DenoiserArch &arch);

    // He-style random init with the final decoder layer zeroed, so D(x, sigma) = x at start
    template <typename T>
    RVector<T> init_parameters(const DenoiserArch &arch, Rng &rng);

    // A batch lives in a (B * P) x 2 matrix; sample b occupies rows [b P, (b + 1) P), pixel p = col * rows + row.
    // Column 0 holds real parts, column 1 imaginary parts, so a vec(H_b) maps onto it without reordering.
    template <typename T>
    RMatrix<T> to_grid(const CMatrix<T> &columns);

    template <typename T>
    CMatrix<T> from_grid(const RMatrix<T> &grid, Index pixels);

    template <typename T>
    RMatrix<T> denoiser_forward(const DenoiserArch &arch, const RVector<T> &theta, const RMatrix<T> &x,
                                const RVector<T> &sigma);

    // Loss (1/B) sum_b |D(x_b, sigma_b) - target_b|^2 and its gradient with respect to theta
    template <typename T>
    T denoiser_loss_and_gradient(const DenoiserArch &arch, const RVector<T> &theta, const RMatrix<T> &x,
                                 const RVector<T> &sigma, const RMatrix<T> &target, RVector<T> &gradient);

    // Sinusoidal encoding of ln(sigma), one row per sample
    template <typename T>
    RMatrix<T> noise_encoding(const DenoiserArch &arch, const RVector<T> &sigma);
}

#endif
