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

#ifndef pnpce_diffusion_H
#define pnpce_diffusion_H

#include "pnpce/network.hpp"
#include "pnpce/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace pnpce
{
    // Descending noise levels sigma_{t_K} > ... > sigma_{t_1} > sigma_{t_0} = 0
    struct NoiseSchedule
    {
        std::vector<double> sigmas;

        Index steps() const { return static_cast<Index>(sigmas.size()) - 1; }
        double sigma_max() const { return sigmas.front(); }

        // sigma_{t_i}, i = 0..K
        double at(Index i) const;

        void validate() const;
    };

    // Geometric spacing between sigma_max and sigma_min, then a trailing zero
    NoiseSchedule make_schedule(Index steps, double sigma_min, double sigma_max);

    // count geometric training levels, ascending from sigma_min to sigma_max
    std::vector<double> training_levels(Index count, double sigma_min, double sigma_max);

    // h + sigma n with n ~ CN(0, I)
    CVec perturb(const CVec &h, double sigma, Rng &rng);

    struct DenoiserModel
    {
        DenoiserArch arch;
        RVec theta;
        RVec theta_ema;
        double ema_rate = 0.999;
        double data_scale = 1.0; // RMS of the training data per real component
        double sigma_min = 0.01; // training range, data units
        double sigma_max = 3.0;
        std::uint64_t seed = 0;
        Index epoch = 0;

        static DenoiserModel initialize(const DenoiserArch &arch, std::uint64_t seed);
    };

    enum class Precision
    {
        f64,
        f32
    };

    // Denoised complex vectors (columns) in data units, using the EMA parameters:
    // D(h, sigma) = c D_net(h / c, sigma / c)
    CMat denoise(const DenoiserModel &model, const CMat &h_t, const RVec &sigma, Precision precision = Precision::f64);

    CVec denoise(const DenoiserModel &model, const CVec &h_t, double sigma, Precision precision = Precision::f64);

    // (D(h_t, sigma) - h_t) / sigma^2
    CVec score_from_denoiser(const DenoiserModel &model, const CVec &h_t, double sigma,
                             Precision precision = Precision::f64);

    // theta_ema <- m theta_ema + (1 - m) theta
    template <typename DerivedA, typename DerivedB>
    void ema_update(Eigen::MatrixBase<DerivedA> &theta_ema, const Eigen::MatrixBase<DerivedB> &theta, double m)
    {
        if (!(m >= 0.0 && m < 1.0))
            throw std::invalid_argument("ema_update: rate must lie in [0, 1)");
        if (theta_ema.size() != theta.size())
            throw std::invalid_argument("ema_update: parameter vectors differ in length");
        using S = typename DerivedA::Scalar;
        theta_ema = S(m) * theta_ema + S(1.0 - m) * theta;
    }

    struct AdamOptimizer
    {
        double learning_rate = 1e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
        RVec m;
        RVec v;
        Index step = 0;

        void apply(RVec &theta, const RVec &gradient);
    };

    struct TrainConfig
    {
        Index epochs = 100;
        Index batch_size = 32;
        double learning_rate = 1e-4;
        double ema_rate = 0.999;
        Index noise_levels = 1000;
        double sigma_min = 0.0; // normalized units; 0 selects 1% of the complex RMS
        double sigma_max = 0.0; // normalized units; 0 selects twice the largest per-sample RMS
        std::uint64_t seed = 0;

        void validate() const;
    };

    // One Adam step on a batch of normalized clean samples (columns); returns the loss before the update
    double train_step(const DenoiserArch &arch, RVec &theta, const CMat &batch, const std::vector<double> &levels,
                      Rng &rng, AdamOptimizer &adam);

    struct EpochLog
    {
        Index epoch = 0;
        double train_loss = 0.0;
        double test_loss = 0.0;
        bool best = false;
    };

    struct TrainResult
    {
        DenoiserModel model; // theta_ema holds the best EMA snapshot
        std::vector<EpochLog> history;
    };

    // Samples are columns of vec(H_b); the test loss uses the EMA parameters and fixed noise draws
    TrainResult train(const CMat &train_samples, const CMat &test_samples, const DenoiserArch &arch,
                      const TrainConfig &cfg, const std::function<void(const EpochLog &)> &on_epoch = {});

    // Mean per-sample |D(h + sigma n) - h|^2 over samples with noise from the given seed, normalized units
    double evaluate_loss(const DenoiserArch &arch, const RVec &theta, const CMat &samples,
                         const std::vector<double> &levels, std::uint64_t seed);

    inline constexpr std::uint32_t checkpoint_format_version = 1;

    void write_checkpoint(std::ostream &os, const DenoiserModel &model);
    DenoiserModel read_checkpoint(std::istream &is, const std::optional<DenoiserArch> &expected = std::nullopt);
    void write_checkpoint(const std::filesystem::path &path, const DenoiserModel &model);
    DenoiserModel read_checkpoint(const std::filesystem::path &path,
                                  const std::optional<DenoiserArch> &expected = std::nullopt);

    // -(Sigma + sigma^2 I)^{-1} (h_t - mu)
    CVec gaussian_exact_score(const CVec &mu, const CMat &sigma_cov, const CVec &h_t, double sigma);

    class ScoreSource
    {
    public:
        virtual ~ScoreSource() = default;

        virtual Index dim() const = 0;

        // Must be safe to call concurrently
        virtual CVec score(const CVec &h_t, double sigma) const = 0;
    };

    class DenoiserScore final : public ScoreSource
    {
    public:
        explicit DenoiserScore(DenoiserModel model, Precision precision = Precision::f64);

        Index dim() const override;
        CVec score(const CVec &h_t, double sigma) const override;
        const DenoiserModel &model() const { return model_; }

    private:
        DenoiserModel model_;
        Precision precision_;
    };

    // Exact score of CN(mu, Sigma) smoothed by sigma, via a cached eigendecomposition of Sigma
    class GaussianScore final : public ScoreSource
    {
    public:
        GaussianScore(CVec mu, const CMat &sigma_cov);

        Index dim() const override { return mu_.size(); }
        CVec score(const CVec &h_t, double sigma) const override;

        // E[h | h_t] = mu + Sigma (Sigma + sigma^2 I)^{-1} (h_t - mu)
        CVec posterior_mean(const CVec &h_t, double sigma) const;

        const CVec &mean() const { return mu_; }
        const CMat &eigenvectors() const { return u_; }
        const RVec &eigenvalues() const { return ev_; }

    private:
        CVec mu_;
        CMat u_;
        RVec ev_;
    };

    // Score of a point mass at h0: -(h_t - h0) / sigma^2
    class PointMassScore final : public ScoreSource
    {
    public:
        explicit PointMassScore(CVec h0) : h0_(std::move(h0)) {}

        Index dim() const override { return h0_.size(); }
        CVec score(const CVec &h_t, double sigma) const override;

    private:
        CVec h0_;
    };
}

#endif
