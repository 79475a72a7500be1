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

#include "pnpce/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pnpce
{
    void DenoiserArch::validate() const
    {
        if (rows < 1 || cols < 1)
            throw std::invalid_argument("DenoiserArch: grid must be at least 1x1");
        if (width < 1)
            throw std::invalid_argument("DenoiserArch: width must be positive");
        if (kernel < 1 || kernel % 2 == 0)
            throw std::invalid_argument("DenoiserArch: kernel must be a positive odd number");
        if (embed_freqs < 2 || embed_width < 1)
            throw std::invalid_argument("DenoiserArch: embedding needs at least 2 frequencies and a positive width");
    }

    ParamLayout ParamLayout::of(const DenoiserArch &arch)
    {
        arch.validate();
        ParamLayout l;
        Index off = 0;
        auto take = [&off](Index n)
        {
            Slot s{off, n};
            off += n;
            return s;
        };
        const Index c = arch.width;
        const Index k2 = arch.kernel * arch.kernel;
        l.embed1_w = take(2 * arch.embed_freqs * arch.embed_width);
        l.embed1_b = take(arch.embed_width);
        l.embed2_w = take(arch.embed_width * 2 * DenoiserArch::encoder_layers * c);
        l.embed2_b = take(2 * DenoiserArch::encoder_layers * c);
        for (Index i = 0; i < 4; ++i)
        {
            const Index cin = i == 0 ? DenoiserArch::in_channels : c;
            l.enc_w[i] = take(cin * k2 * c);
            l.enc_b[i] = take(c);
        }
        for (Index i = 0; i < 4; ++i)
        {
            const Index cout = i == 3 ? DenoiserArch::in_channels : c;
            l.dec_w[i] = take(c * k2 * cout);
            l.dec_b[i] = take(cout);
        }
        l.pos = take(arch.positional_bias ? arch.pixels() * c : 0);
        l.total = off;
        return l;
    }

    Index parameter_count(const DenoiserArch &arch)
    {
        return ParamLayout::of(arch).total;
    }

    namespace
    {
        template <typename T>
        using Mat = RMatrix<T>;

        template <typename T>
        Eigen::Map<const Mat<T>> view(const RVector<T> &theta, const ParamLayout::Slot &s, Index r, Index c)
        {
            return Eigen::Map<const Mat<T>>(theta.data() + s.offset, r, c);
        }

        template <typename T>
        Eigen::Map<Mat<T>> view(RVector<T> &g, const ParamLayout::Slot &s, Index r, Index c)
        {
            return Eigen::Map<Mat<T>>(g.data() + s.offset, r, c);
        }

        template <typename T>
        Eigen::Map<const RVector<T>> vview(const RVector<T> &theta, const ParamLayout::Slot &s)
        {
            return Eigen::Map<const RVector<T>>(theta.data() + s.offset, s.size);
        }

        template <typename T>
        Eigen::Map<RVector<T>> vview(RVector<T> &g, const ParamLayout::Slot &s)
        {
            return Eigen::Map<RVector<T>>(g.data() + s.offset, s.size);
        }

        template <typename T>
        Mat<T> silu(const Mat<T> &x)
        {
            return x.array() / (T(1) + (-x.array()).exp());
        }

        template <typename T>
        Mat<T> silu_grad(const Mat<T> &x, const Mat<T> &upstream)
        {
            const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic> s = (T(1) + (-x.array()).exp()).inverse();
            return upstream.array() * s * (T(1) + x.array() * (T(1) - s));
        }

        struct GridShape
        {
            Index rows;
            Index cols;
            Index batch;
            Index kernel;

            Index pixels() const { return rows * cols; }
        };

        // One kernel tap as a flat row shift over the whole batch. Rows [lo, hi) read row q + shift;
        // `edge` lists the rows inside that range whose source lies across a grid edge or in another
        // sample. Rows outside [lo, hi) have no valid source either.
        struct Tap
        {
            Index shift = 0;
            Index lo = 0;
            Index hi = 0;
            std::vector<Index> edge;
            std::vector<Index> edge_source; // edge[i] + shift
        };

        std::vector<Tap> make_taps(const GridShape &g)
        {
            const Index h = g.kernel / 2;
            const Index p = g.pixels();
            const Index n = g.batch * p;
            std::vector<Tap> taps;
            taps.reserve(static_cast<std::size_t>(g.kernel * g.kernel));
            for (Index di = -h; di <= h; ++di)
                for (Index dj = -h; dj <= h; ++dj)
                {
                    Tap t;
                    t.shift = dj * g.rows + di;
                    t.lo = std::max<Index>(0, -t.shift);
                    t.hi = std::min(n, n - t.shift);
                    for (Index q = t.lo; q < t.hi; ++q)
                    {
                        const Index r = (q % p) % g.rows + di;
                        const Index c = (q % p) / g.rows + dj;
                        if (r < 0 || r >= g.rows || c < 0 || c >= g.cols)
                        {
                            t.edge.push_back(q);
                            t.edge_source.push_back(q + t.shift);
                        }
                    }
                    taps.push_back(std::move(t));
                }
            return taps;
        }

        // Weights of tap `tap`, C_in x C_out, out of the (C_in k^2) x C_out layer matrix
        template <typename W>
        auto tap_weights(W &&w, Index tap, Index k2)
        {
            return w(Eigen::seqN(tap, w.rows() / k2, k2), Eigen::all);
        }

        template <typename T>
        Mat<T> conv(const Mat<T> &a, const std::vector<Tap> &taps, const RVector<T> &theta,
                    const ParamLayout::Slot &w, const ParamLayout::Slot &bias)
        {
            const Index k2 = static_cast<Index>(taps.size());
            const Index cout = bias.size;
            const auto wm = view(theta, w, a.cols() * k2, cout);
            Mat<T> out(a.rows(), cout);
            out.rowwise() = vview(theta, bias).transpose();
            for (Index k = 0; k < k2; ++k)
            {
                const Tap &t = taps[static_cast<std::size_t>(k)];
                const Mat<T> wt = tap_weights(wm, k, k2);
                out.middleRows(t.lo, t.hi - t.lo).noalias() += a.middleRows(t.lo + t.shift, t.hi - t.lo) * wt;
                if (!t.edge.empty())
                {
                    const Mat<T> wrong = a(t.edge_source, Eigen::all) * wt;
                    out(t.edge, Eigen::all) -= wrong;
                }
            }
            return out;
        }

        // Accumulates weight and bias gradients; returns the gradient with respect to the conv input a
        template <typename T>
        Mat<T> conv_backward(const Mat<T> &a, const Mat<T> &d_out, const std::vector<Tap> &taps,
                             const RVector<T> &theta, const ParamLayout::Slot &w, const ParamLayout::Slot &bias,
                             RVector<T> &grad, bool need_input)
        {
            const Index k2 = static_cast<Index>(taps.size());
            const Index cout = bias.size;
            const auto wm = view(theta, w, a.cols() * k2, cout);
            auto gw = view(grad, w, a.cols() * k2, cout);
            vview(grad, bias).noalias() += d_out.colwise().sum().transpose();
            Mat<T> d_in;
            if (need_input)
                d_in = Mat<T>::Zero(a.rows(), a.cols());
            for (Index k = 0; k < k2; ++k)
            {
                const Tap &t = taps[static_cast<std::size_t>(k)];
                const Index len = t.hi - t.lo;
                Mat<T> gt(a.cols(), cout);
                gt.noalias() = a.middleRows(t.lo + t.shift, len).transpose() * d_out.middleRows(t.lo, len);
                Mat<T> d_edge;
                if (!t.edge.empty())
                {
                    d_edge = d_out(t.edge, Eigen::all);
                    gt.noalias() -= a(t.edge_source, Eigen::all).transpose() * d_edge;
                }
                tap_weights(gw, k, k2) += gt;
                if (!need_input)
                    continue;
                const Mat<T> wt = tap_weights(wm, k, k2);
                d_in.middleRows(t.lo + t.shift, len).noalias() += d_out.middleRows(t.lo, len) * wt.transpose();
                if (!t.edge.empty())
                {
                    const Mat<T> wrong = d_edge * wt.transpose();
                    d_in(t.edge_source, Eigen::all) -= wrong;
                }
            }
            return d_in;
        }

        template <typename T>
        struct Cache
        {
            Mat<T> enc;   // B x 2F
            Mat<T> z1;    // B x E
            Mat<T> a1;    // B x E
            Mat<T> embed; // B x 8C
            std::array<Mat<T>, 4> enc_in;
            std::array<Mat<T>, 4> enc_u; // conv output (plus positional bias on layer 0)
            std::array<Mat<T>, 4> enc_v; // after FiLM, before SiLU
            std::array<Mat<T>, 4> dec_in;
            std::array<Mat<T>, 3> dec_pre;
        };

        template <typename T>
        void check_inputs(const DenoiserArch &arch, const ParamLayout &layout, const RVector<T> &theta,
                          const Mat<T> &x, const RVector<T> &sigma)
        {
            if (theta.size() != layout.total)
                throw std::invalid_argument("denoiser: parameter vector has " + std::to_string(theta.size()) +
                                            " entries, arch needs " + std::to_string(layout.total));
            if (x.cols() != DenoiserArch::in_channels || sigma.size() < 1 || x.rows() != sigma.size() * arch.pixels())
                throw std::invalid_argument("denoiser: input must be (batch * " + std::to_string(arch.pixels()) +
                                            ") x 2 with one sigma per sample");
        }

        template <typename T>
        Mat<T> run(const DenoiserArch &arch, const ParamLayout &layout, const RVector<T> &theta, const Mat<T> &x,
                   const RVector<T> &sigma, Cache<T> *cache)
        {
            const Index batch = sigma.size();
            const Index p = arch.pixels();
            const Index c = arch.width;
            const Index e_w = arch.embed_width;
            const std::vector<Tap> taps = make_taps(GridShape{arch.rows, arch.cols, batch, arch.kernel});

            const Mat<T> enc = noise_encoding(arch, sigma);
            Mat<T> z1 = enc * view(theta, layout.embed1_w, 2 * arch.embed_freqs, e_w);
            z1.rowwise() += vview(theta, layout.embed1_b).transpose();
            const Mat<T> a1 = silu(z1);
            Mat<T> embed = a1 * view(theta, layout.embed2_w, e_w, 8 * c);
            embed.rowwise() += vview(theta, layout.embed2_b).transpose();

            Mat<T> h = x;
            for (Index i = 0; i < 4; ++i)
            {
                Mat<T> u = conv(h, taps, theta, layout.enc_w[i], layout.enc_b[i]);
                if (i == 0 && arch.positional_bias)
                {
                    const auto pos = view(theta, layout.pos, p, c);
                    for (Index b = 0; b < batch; ++b)
                        u.middleRows(b * p, p) += pos;
                }
                Mat<T> v(u.rows(), c);
                for (Index b = 0; b < batch; ++b)
                {
                    const auto scale = embed.row(b).segment(2 * i * c, c).array() + T(1);
                    const auto shift = embed.row(b).segment(2 * i * c + c, c).array();
                    v.middleRows(b * p, p) = (u.middleRows(b * p, p).array().rowwise() * scale).rowwise() + shift;
                }
                if (cache)
                {
                    cache->enc_in[i] = std::move(h);
                    cache->enc_u[i] = std::move(u);
                }
                h = silu(v);
                if (cache)
                    cache->enc_v[i] = std::move(v);
            }
            for (Index i = 0; i < 4; ++i)
            {
                Mat<T> pre = conv(h, taps, theta, layout.dec_w[i], layout.dec_b[i]);
                if (cache)
                    cache->dec_in[i] = std::move(h);
                if (i < 3)
                {
                    h = silu(pre);
                    if (cache)
                        cache->dec_pre[i] = std::move(pre);
                }
                else
                {
                    h = std::move(pre);
                }
            }
            if (cache)
            {
                cache->enc = enc;
                cache->z1 = std::move(z1);
                cache->a1 = a1;
                cache->embed = std::move(embed);
            }
            return x + h;
        }
    }

    template <typename T>
    RMatrix<T> noise_encoding(const DenoiserArch &arch, const RVector<T> &sigma)
    {
        const Index f = arch.embed_freqs;
        Mat<T> enc(sigma.size(), 2 * f);
        for (Index b = 0; b < sigma.size(); ++b)
        {
            const T c = std::log(std::max(sigma(b), T(1e-6)));
            for (Index k = 0; k < f; ++k)
            {
                const T freq = T(0.1) * std::pow(T(100), T(k) / T(f - 1));
                enc(b, k) = std::sin(freq * c);
                enc(b, f + k) = std::cos(freq * c);
            }
        }
        return enc;
    }

    template <typename T>
    RVector<T> init_parameters(const DenoiserArch &arch, Rng &rng)
    {
        const ParamLayout l = ParamLayout::of(arch);
        RVector<T> theta = RVector<T>::Zero(l.total);
        auto fill = [&](const ParamLayout::Slot &s, Index fan_in)
        {
            std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
            for (Index i = 0; i < s.size; ++i)
                theta(s.offset + i) = static_cast<T>(n(rng));
        };
        const Index k2 = arch.kernel * arch.kernel;
        fill(l.embed1_w, 2 * arch.embed_freqs);
        fill(l.embed2_w, arch.embed_width);
        for (Index i = 0; i < 4; ++i)
            fill(l.enc_w[i], (i == 0 ? DenoiserArch::in_channels : arch.width) * k2);
        for (Index i = 0; i < 3; ++i)
            fill(l.dec_w[i], arch.width * k2);
        return theta;
    }

    template <typename T>
    RMatrix<T> to_grid(const CMatrix<T> &columns)
    {
        const Index n = columns.size();
        Mat<T> g(n, 2);
        const Eigen::Map<const CVector<T>> flat(columns.data(), n);
        g.col(0) = flat.real();
        g.col(1) = flat.imag();
        return g;
    }

    template <typename T>
    CMatrix<T> from_grid(const RMatrix<T> &grid, Index pixels)
    {
        if (grid.cols() != 2 || pixels < 1 || grid.rows() % pixels != 0)
            throw std::invalid_argument("from_grid: grid must be (batch * pixels) x 2");
        CMatrix<T> out(pixels, grid.rows() / pixels);
        Eigen::Map<CVector<T>> flat(out.data(), out.size());
        flat.real() = grid.col(0);
        flat.imag() = grid.col(1);
        return out;
    }

    template <typename T>
    RMatrix<T> denoiser_forward(const DenoiserArch &arch, const RVector<T> &theta, const RMatrix<T> &x,
                                const RVector<T> &sigma)
    {
        const ParamLayout layout = ParamLayout::of(arch);
        check_inputs(arch, layout, theta, x, sigma);
        return run<T>(arch, layout, theta, x, sigma, nullptr);
    }

    template <typename T>
    T denoiser_loss_and_gradient(const DenoiserArch &arch, const RVector<T> &theta, const RMatrix<T> &x,
                                 const RVector<T> &sigma, const RMatrix<T> &target, RVector<T> &gradient)
    {
        const ParamLayout layout = ParamLayout::of(arch);
        check_inputs(arch, layout, theta, x, sigma);
        if (target.rows() != x.rows() || target.cols() != x.cols())
            throw std::invalid_argument("denoiser: target shape differs from input shape");

        const Index batch = sigma.size();
        const Index p = arch.pixels();
        const Index c = arch.width;
        const Index e_w = arch.embed_width;
        const std::vector<Tap> taps = make_taps(GridShape{arch.rows, arch.cols, batch, arch.kernel});

        Cache<T> cache;
        const Mat<T> out = run<T>(arch, layout, theta, x, sigma, &cache);
        const Mat<T> diff = out - target;
        const T loss = diff.squaredNorm() / T(batch);

        gradient = RVector<T>::Zero(layout.total);
        Mat<T> d = (T(2) / T(batch)) * diff;

        for (Index i = 3; i >= 0; --i)
        {
            if (i < 3)
                d = silu_grad(cache.dec_pre[i], d);
            d = conv_backward(cache.dec_in[i], d, taps, theta, layout.dec_w[i], layout.dec_b[i], gradient, true);
        }

        Mat<T> d_embed = Mat<T>::Zero(batch, 8 * c);
        for (Index i = 3; i >= 0; --i)
        {
            const Mat<T> dv = silu_grad(cache.enc_v[i], d);
            Mat<T> du(dv.rows(), c);
            for (Index b = 0; b < batch; ++b)
            {
                const auto scale = cache.embed.row(b).segment(2 * i * c, c).array() + T(1);
                const auto dv_b = dv.middleRows(b * p, p);
                du.middleRows(b * p, p) = dv_b.array().rowwise() * scale;
                d_embed.row(b).segment(2 * i * c, c) =
                    (dv_b.array() * cache.enc_u[i].middleRows(b * p, p).array()).colwise().sum();
                d_embed.row(b).segment(2 * i * c + c, c) = dv_b.colwise().sum();
            }
            if (i == 0 && arch.positional_bias)
            {
                auto d_pos = view(gradient, layout.pos, p, c);
                for (Index b = 0; b < batch; ++b)
                    d_pos += du.middleRows(b * p, p);
            }
            d = conv_backward(cache.enc_in[i], du, taps, theta, layout.enc_w[i], layout.enc_b[i], gradient, i > 0);
        }

        view(gradient, layout.embed2_w, e_w, 8 * c).noalias() += cache.a1.transpose() * d_embed;
        vview(gradient, layout.embed2_b).noalias() += d_embed.colwise().sum().transpose();
        const Mat<T> d_a1 = d_embed * view(theta, layout.embed2_w, e_w, 8 * c).transpose();
        const Mat<T> d_z1 = silu_grad(cache.z1, d_a1);
        view(gradient, layout.embed1_w, 2 * arch.embed_freqs, e_w).noalias() += cache.enc.transpose() * d_z1;
        vview(gradient, layout.embed1_b).noalias() += d_z1.colwise().sum().transpose();
        return loss;
    }

#define PNPCE_INSTANTIATE(T)                                                                                     \
    template RVector<T> init_parameters<T>(const DenoiserArch &, Rng &);                                         \
    template RMatrix<T> to_grid<T>(const CMatrix<T> &);                                                          \
    template CMatrix<T> from_grid<T>(const RMatrix<T> &, Index);                                                 \
    template RMatrix<T> denoiser_forward<T>(const DenoiserArch &, const RVector<T> &, const RMatrix<T> &,         \
                                            const RVector<T> &);                                                 \
    template T denoiser_loss_and_gradient<T>(const DenoiserArch &, const RVector<T> &, const RMatrix<T> &,       \
                                             const RVector<T> &, const RMatrix<T> &, RVector<T> &);              \
    template RMatrix<T> noise_encoding<T>(const DenoiserArch &, const RVector<T> &);

    PNPCE_INSTANTIATE(float)
    PNPCE_INSTANTIATE(double)

#undef PNPCE_INSTANTIATE
}
