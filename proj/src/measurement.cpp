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

#include "pnpce/measurement.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pnpce
{
    cd quantize_phase(cd x, int n_b)
    {
        if (x == cd(0.0, 0.0))
            throw std::invalid_argument("quantize_phase: input must be non-zero");
        if (n_b < 1 || n_b > 30)
            throw std::invalid_argument("quantize_phase: n_b must lie in [1, 30]");

        const double levels = std::ldexp(1.0, n_b);
        const double step = 2.0 * std::numbers::pi / levels;
        double angle = std::arg(x);
        if (angle < 0.0)
            angle += 2.0 * std::numbers::pi;

        // Both neighbours are compared by angular distance so ties resolve to the smaller index
        const auto below = static_cast<long long>(std::floor(angle / step));
        const long long n = static_cast<long long>(levels);
        long long best = below % n;
        double best_dist = std::numeric_limits<double>::infinity();
        for (long long q : {below, below + 1})
        {
            const long long qm = q % n;
            double d = std::abs(angle - static_cast<double>(q) * step);
            d = std::min(d, 2.0 * std::numbers::pi - d);
            if (d < best_dist || (d == best_dist && qm < best))
            {
                best = qm;
                best_dist = d;
            }
        }
        return std::polar(1.0, static_cast<double>(best) * step);
    }

    double pilot_ratio(const ArrayConfig &cfg, Index m_t, Index m_r)
    {
        return static_cast<double>(m_t * m_r * cfg.l_r) / static_cast<double>(cfg.n_t * cfg.n_r);
    }

    std::pair<Index, Index> pilot_dims_for_ratio(const ArrayConfig &cfg, double alpha)
    {
        cfg.validate();
        if (!(alpha > 0.0) || alpha > 1.0)
            throw std::invalid_argument("pilot_dims_for_ratio: alpha must lie in (0, 1]");
        const Index max_mr = cfg.n_r / cfg.l_r;
        if (max_mr < 1)
            throw std::invalid_argument("pilot_dims_for_ratio: l_r exceeds n_r");

        std::pair<Index, Index> best{1, 1};
        double best_err = std::numeric_limits<double>::infinity();
        for (Index m_r = 1; m_r <= max_mr; ++m_r)
            for (Index m_t = 1; m_t <= cfg.n_t; ++m_t)
            {
                const double err = std::abs(pilot_ratio(cfg, m_t, m_r) - alpha);
                if (err < best_err - 1e-12 || (std::abs(err - best_err) <= 1e-12 && m_r > best.second))
                {
                    best = {m_t, m_r};
                    best_err = err;
                }
            }
        return best;
    }

    namespace
    {
        cd random_phase(Rng &rng, int n_b, double scale)
        {
            const auto q = uniform_index(rng, std::uint64_t{1} << n_b);
            return std::polar(scale, 2.0 * std::numbers::pi * static_cast<double>(q) / std::ldexp(1.0, n_b));
        }
    }

    PilotPlan sample_pilot_plan(Rng &rng, const ArrayConfig &cfg, Index m_t, Index m_r, int n_b, double power)
    {
        cfg.validate();
        if (m_t < 1 || m_r < 1)
            throw std::invalid_argument("sample_pilot_plan: m_t and m_r must be at least 1");
        if (n_b < 1 || n_b > 30)
            throw std::invalid_argument("sample_pilot_plan: n_b must lie in [1, 30]");
        if (!(power > 0.0))
            throw std::invalid_argument("sample_pilot_plan: power must be positive");

        PilotPlan plan;
        plan.m_t = m_t;
        plan.m_r = m_r;
        plan.l_t = cfg.l_t;
        plan.l_r = cfg.l_r;
        plan.n_b = n_b;
        plan.power = power;

        const double w_scale = 1.0 / std::sqrt(static_cast<double>(cfg.n_r));
        const double f_scale = 1.0 / std::sqrt(static_cast<double>(cfg.n_t));
        const double s_scale = std::sqrt(power / static_cast<double>(cfg.l_t)) / std::numbers::sqrt2;

        plan.w.resize(cfg.n_r, cfg.l_r * m_r);
        for (Index j = 0; j < plan.w.cols(); ++j)
            for (Index i = 0; i < cfg.n_r; ++i)
                plan.w(i, j) = random_phase(rng, n_b, w_scale);

        plan.precoders.resize(static_cast<std::size_t>(m_t));
        plan.symbols.resize(cfg.l_t, m_t);
        plan.p.resize(cfg.n_t, m_t);
        for (Index t = 0; t < m_t; ++t)
        {
            CMat &f = plan.precoders[static_cast<std::size_t>(t)];
            f.resize(cfg.n_t, cfg.l_t);
            for (Index j = 0; j < cfg.l_t; ++j)
                for (Index i = 0; i < cfg.n_t; ++i)
                    f(i, j) = random_phase(rng, n_b, f_scale);
            for (Index s = 0; s < cfg.l_t; ++s)
            {
                const auto q = uniform_index(rng, 4);
                plan.symbols(s, t) = cd((q & 1) ? -s_scale : s_scale, (q & 2) ? -s_scale : s_scale);
            }
            plan.p.col(t) = f * plan.symbols.col(t);
        }
        return plan;
    }

    CMat build_measurement_matrix(const PilotPlan &plan, const CodebookPair &cb)
    {
        if (plan.w.rows() != cb.rx.dim() || plan.p.rows() != cb.tx.dim())
            throw std::invalid_argument("build_measurement_matrix: pilot plan and codebooks disagree on array size");
        const CMat left = (cb.tx.matrix.adjoint() * plan.p).transpose(); // m_t x n_t
        const CMat right = plan.w.adjoint() * cb.rx.matrix;             // l_r m_r x n_r
        return Eigen::kroneckerProduct(left, right).eval();
    }

    CVec apply_measurement(const PilotPlan &plan, const CodebookPair &cb, const CMat &h_b)
    {
        if (h_b.rows() != cb.rx.dim() || h_b.cols() != cb.tx.dim() || plan.w.rows() != cb.rx.dim() ||
            plan.p.rows() != cb.tx.dim())
            throw std::invalid_argument("apply_measurement: dimension mismatch");
        const CMat y = plan.w.adjoint() * cb.rx.matrix * h_b * cb.tx.matrix.adjoint() * plan.p;
        return Eigen::Map<const CVec>(y.data(), y.size());
    }

    CVec combined_noise(Rng &rng, const PilotPlan &plan, double sigma_n)
    {
        const Index n_r = plan.w.rows();
        const Index block = plan.l_r * plan.m_r;
        CVec n(plan.rows());
        CVec antenna(n_r);
        for (Index t = 0; t < plan.m_t; ++t)
            for (Index r = 0; r < plan.m_r; ++r)
            {
                for (Index i = 0; i < n_r; ++i)
                    antenna(i) = sigma_n * complex_normal(rng);
                n.segment(t * block + r * plan.l_r, plan.l_r).noalias() =
                    plan.w.middleCols(r * plan.l_r, plan.l_r).adjoint() * antenna;
            }
        return n;
    }

    CMat combined_noise_covariance(const PilotPlan &plan)
    {
        const Index block = plan.l_r * plan.m_r;
        CMat wb = CMat::Zero(block, block);
        for (Index r = 0; r < plan.m_r; ++r)
        {
            const auto wr = plan.w.middleCols(r * plan.l_r, plan.l_r);
            wb.block(r * plan.l_r, r * plan.l_r, plan.l_r, plan.l_r) = wr.adjoint() * wr;
        }
        return Eigen::kroneckerProduct(CMat::Identity(plan.m_t, plan.m_t), wb).eval();
    }

    double noise_std_for_snr(double snr_db, double signal_power)
    {
        if (!std::isfinite(snr_db))
            throw std::invalid_argument("noise_std_for_snr: SNR must be finite");
        if (!(signal_power > 0.0))
            throw std::invalid_argument("noise_std_for_snr: signal power must be positive");
        return std::sqrt(signal_power / std::pow(10.0, snr_db / 10.0));
    }

    MeasurementSet measure(const CMat &h_b, const PilotPlan &plan, const CMat &phi, double sigma_n, Rng &rng)
    {
        if (phi.rows() != plan.rows() || phi.cols() != h_b.size())
            throw std::invalid_argument("measure: measurement matrix does not match the plan or channel");
        if (!(sigma_n >= 0.0) || !std::isfinite(sigma_n))
            throw std::invalid_argument("measure: sigma_n must be finite and non-negative");
        MeasurementSet m;
        m.phi = phi;
        m.sigma_n = sigma_n;
        m.snr_db = std::numeric_limits<double>::infinity();
        m.y = phi * Eigen::Map<const CVec>(h_b.data(), h_b.size());
        if (sigma_n > 0.0)
            m.y += combined_noise(rng, plan, sigma_n);
        return m;
    }

    MeasurementSet measure_at_snr(const CMat &h_b, const PilotPlan &plan, const CMat &phi, double snr_db,
                                  double signal_power, Rng &rng)
    {
        MeasurementSet m = measure(h_b, plan, phi, noise_std_for_snr(snr_db, signal_power), rng);
        m.snr_db = snr_db;
        return m;
    }

    double calibrate_signal_power(const CMat &samples, const ArrayConfig &cfg, const CodebookPair &cb, Index m_t,
                                  Index m_r, int n_b, std::uint64_t seed, Index draws)
    {
        if (samples.cols() < 1 || draws < 1)
            throw std::invalid_argument("calibrate_signal_power: need at least one sample and one draw");
        if (samples.rows() != cfg.unknowns())
            throw std::invalid_argument("calibrate_signal_power: sample length does not match the array");
        double total = 0.0;
        Index rows = 0;
        for (Index d = 0; d < draws; ++d)
        {
            Rng rng = make_rng(seed, "calibration", static_cast<std::uint64_t>(d));
            const PilotPlan plan = sample_pilot_plan(rng, cfg, m_t, m_r, n_b);
            const CVec h = samples.col(d % samples.cols());
            const CMat hb = Eigen::Map<const CMat>(h.data(), cfg.n_r, cfg.n_t);
            total += apply_measurement(plan, cb, hb).squaredNorm();
            rows += plan.rows();
        }
        return total / static_cast<double>(rows);
    }

    double nmse_db(const CVec &h_true, const CVec &h_est)
    {
        if (h_true.size() != h_est.size())
            throw std::invalid_argument("nmse_db: vector lengths differ");
        const double ref = h_true.squaredNorm();
        if (!(ref > 0.0))
            throw std::invalid_argument("nmse_db: reference vector is zero");
        const double err = (h_true - h_est).squaredNorm();
        if (!std::isfinite(err))
            return std::numeric_limits<double>::infinity();
        if (err == 0.0)
            return nmse_floor_db;
        return std::max(nmse_floor_db, 10.0 * std::log10(err / ref));
    }
}
