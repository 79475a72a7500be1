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

#include "pnpce/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pnpce
{
    double NoiseSchedule::at(Index i) const
    {
        if (i < 0 || i > steps())
            throw std::invalid_argument("NoiseSchedule::at: index " + std::to_string(i) + " outside [0, " +
                                        std::to_string(steps()) + "]");
        return sigmas[static_cast<std::size_t>(steps() - i)];
    }

    void NoiseSchedule::validate() const
    {
        if (sigmas.size() < 2)
            throw std::invalid_argument("NoiseSchedule: needs at least one step");
        if (sigmas.back() != 0.0)
            throw std::invalid_argument("NoiseSchedule: last entry must be exactly 0");
        for (std::size_t i = 0; i + 1 < sigmas.size(); ++i)
            if (!std::isfinite(sigmas[i]) || !(sigmas[i] > sigmas[i + 1]))
                throw std::invalid_argument("NoiseSchedule: entries must be finite and strictly decreasing");
    }

    NoiseSchedule make_schedule(Index steps, double sigma_min, double sigma_max)
    {
        if (steps < 1)
            throw std::invalid_argument("make_schedule: K must be at least 1");
        if (!(sigma_min > 0.0) || !(sigma_max > sigma_min) || !std::isfinite(sigma_max))
            throw std::invalid_argument("make_schedule: need 0 < sigma_min < sigma_max");
        NoiseSchedule s;
        s.sigmas.reserve(static_cast<std::size_t>(steps + 1));
        if (steps == 1)
        {
            s.sigmas = {sigma_max, 0.0};
            return s;
        }
        const double ratio = sigma_min / sigma_max;
        for (Index i = steps; i >= 1; --i)
        {
            // Endpoints are assigned exactly rather than through pow
            if (i == steps)
                s.sigmas.push_back(sigma_max);
            else if (i == 1)
                s.sigmas.push_back(sigma_min);
            else
                s.sigmas.push_back(sigma_max * std::pow(ratio, static_cast<double>(steps - i) / static_cast<double>(steps - 1)));
        }
        s.sigmas.push_back(0.0);
        return s;
    }

    std::vector<double> training_levels(Index count, double sigma_min, double sigma_max)
    {
        if (count < 1)
            throw std::invalid_argument("training_levels: count must be positive");
        if (count == 1)
            return {sigma_max};
        const NoiseSchedule s = make_schedule(count, sigma_min, sigma_max);
        return std::vector<double>(s.sigmas.rbegin() + 1, s.sigmas.rend());
    }

    CVec perturb(const CVec &h, double sigma, Rng &rng)
    {
        if (!(sigma >= 0.0) || !std::isfinite(sigma))
            throw std::invalid_argument("perturb: sigma must be finite and non-negative");
        CVec out = h;
        if (sigma == 0.0)
            return out;
        for (Index i = 0; i < h.size(); ++i)
            out(i) += sigma * complex_normal(rng);
        return out;
    }

    DenoiserModel DenoiserModel::initialize(const DenoiserArch &arch, std::uint64_t seed)
    {
        DenoiserModel m;
        m.arch = arch;
        Rng rng = make_rng(seed, "init");
        m.theta = init_parameters<double>(arch, rng);
        m.theta_ema = m.theta;
        m.seed = seed;
        return m;
    }

    CMat denoise(const DenoiserModel &model, const CMat &h_t, const RVec &sigma, Precision precision)
    {
        const Index p = model.arch.pixels();
        if (h_t.rows() != p || h_t.cols() != sigma.size())
            throw std::invalid_argument("denoise: expected " + std::to_string(p) + "-row columns, one sigma each");
        for (Index b = 0; b < sigma.size(); ++b)
            if (!(sigma(b) >= 0.0) || sigma(b) > 1.1 * model.sigma_max)
                throw std::invalid_argument("denoise: sigma outside [0, 1.1 sigma_max]");

        const double c = model.data_scale;
        if (precision == Precision::f32)
        {
            const CMatrix<float> x = (h_t / c).cast<std::complex<float>>();
            const RVector<float> s = (sigma / c).cast<float>();
            const RVector<float> th = model.theta_ema.cast<float>();
            const RMatrix<float> out = denoiser_forward<float>(model.arch, th, to_grid<float>(x), s);
            return c * from_grid<float>(out, p).cast<cd>();
        }
        const CMat x = h_t / c;
        const RMat out = denoiser_forward<double>(model.arch, model.theta_ema, to_grid<double>(x), sigma / c);
        return c * from_grid<double>(out, p);
    }

    CVec denoise(const DenoiserModel &model, const CVec &h_t, double sigma, Precision precision)
    {
        RVec s(1);
        s(0) = sigma;
        return denoise(model, CMat(h_t), s, precision).col(0);
    }

    CVec score_from_denoiser(const DenoiserModel &model, const CVec &h_t, double sigma, Precision precision)
    {
        if (!(sigma > 0.0))
            throw std::invalid_argument("score_from_denoiser: sigma must be positive");
        return (denoise(model, h_t, sigma, precision) - h_t) / (sigma * sigma);
    }

    void AdamOptimizer::apply(RVec &theta, const RVec &gradient)
    {
        if (theta.size() != gradient.size())
            throw std::invalid_argument("AdamOptimizer: gradient length differs from parameters");
        if (m.size() != theta.size())
        {
            m = RVec::Zero(theta.size());
            v = RVec::Zero(theta.size());
            step = 0;
        }
        ++step;
        m = beta1 * m + (1.0 - beta1) * gradient;
        v = beta2 * v + (1.0 - beta2) * gradient.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        theta.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon);
    }

    CVec gaussian_exact_score(const CVec &mu, const CMat &sigma_cov, const CVec &h_t, double sigma)
    {
        const Index n = mu.size();
        if (sigma_cov.rows() != n || sigma_cov.cols() != n || h_t.size() != n)
            throw std::invalid_argument("gaussian_exact_score: dimension mismatch");
        if (!(sigma >= 0.0))
            throw std::invalid_argument("gaussian_exact_score: sigma must be non-negative");
        CMat a = sigma_cov;
        a.diagonal().array() += sigma * sigma;
        const CVec r = h_t - mu;

        Eigen::LLT<CMat> llt(a);
        if (llt.info() == Eigen::Success)
        {
            CVec s = -llt.solve(r);
            if (s.allFinite())
                return s;
        }
        a.diagonal().array() += 1e-12;
        llt.compute(a);
        if (llt.info() != Eigen::Success)
            throw numerical_error("gaussian_exact_score: covariance is not positive semidefinite");
        return -llt.solve(r);
    }

    DenoiserScore::DenoiserScore(DenoiserModel model, Precision precision)
        : model_(std::move(model)), precision_(precision)
    {
    }

    Index DenoiserScore::dim() const
    {
        return model_.arch.pixels();
    }

    CVec DenoiserScore::score(const CVec &h_t, double sigma) const
    {
        return score_from_denoiser(model_, h_t, sigma, precision_);
    }

    GaussianScore::GaussianScore(CVec mu, const CMat &sigma_cov) : mu_(std::move(mu))
    {
        if (sigma_cov.rows() != mu_.size() || sigma_cov.cols() != mu_.size())
            throw std::invalid_argument("GaussianScore: covariance does not match the mean");
        const Eigen::SelfAdjointEigenSolver<CMat> es(sigma_cov);
        if (es.info() != Eigen::Success)
            throw numerical_error("GaussianScore: eigendecomposition failed");
        u_ = es.eigenvectors();
        ev_ = es.eigenvalues().cwiseMax(0.0);
    }

    CVec GaussianScore::score(const CVec &h_t, double sigma) const
    {
        if (!(sigma > 0.0))
            throw std::invalid_argument("GaussianScore: sigma must be positive");
        const CVec c = u_.adjoint() * (h_t - mu_);
        const RVec w = (ev_.array() + sigma * sigma).inverse();
        return -(u_ * (w.asDiagonal() * c));
    }

    CVec GaussianScore::posterior_mean(const CVec &h_t, double sigma) const
    {
        const CVec c = u_.adjoint() * (h_t - mu_);
        RVec w(ev_.size());
        for (Index i = 0; i < ev_.size(); ++i)
            w(i) = ev_(i) > 0.0 ? ev_(i) / (ev_(i) + sigma * sigma) : 0.0;
        return mu_ + u_ * (w.asDiagonal() * c);
    }

    CVec PointMassScore::score(const CVec &h_t, double sigma) const
    {
        if (!(sigma > 0.0))
            throw std::invalid_argument("PointMassScore: sigma must be positive");
        return -(h_t - h0_) / (sigma * sigma);
    }
}
