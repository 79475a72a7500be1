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
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace pnpce
{
    void TrainConfig::validate() const
    {
        if (epochs < 0)
            throw std::invalid_argument("TrainConfig: epochs must be non-negative");
        if (batch_size < 1)
            throw std::invalid_argument("TrainConfig: batch_size must be positive");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw std::invalid_argument("TrainConfig: learning_rate must be positive");
        if (!(ema_rate >= 0.0 && ema_rate < 1.0))
            throw std::invalid_argument("TrainConfig: ema_rate must lie in [0, 1)");
        if (noise_levels < 1)
            throw std::invalid_argument("TrainConfig: noise_levels must be positive");
        if (sigma_min < 0.0 || sigma_max < 0.0 || (sigma_min > 0.0 && sigma_max > 0.0 && sigma_max <= sigma_min))
            throw std::invalid_argument("TrainConfig: need 0 < sigma_min < sigma_max when both are given");
    }

    namespace
    {
        void add_noise(CMat &x, const RVec &sigma, Rng &rng)
        {
            for (Index b = 0; b < x.cols(); ++b)
                for (Index i = 0; i < x.rows(); ++i)
                    x(i, b) += sigma(b) * complex_normal(rng);
        }
    }

    double train_step(const DenoiserArch &arch, RVec &theta, const CMat &batch, const std::vector<double> &levels,
                      Rng &rng, AdamOptimizer &adam)
    {
        if (batch.cols() < 1)
            throw std::invalid_argument("train_step: empty batch");
        if (levels.empty())
            throw std::invalid_argument("train_step: no noise levels");

        RVec sigma(batch.cols());
        for (Index b = 0; b < batch.cols(); ++b)
            sigma(b) = levels[uniform_index(rng, levels.size())];
        CMat noisy = batch;
        add_noise(noisy, sigma, rng);

        RVec grad;
        const double loss = denoiser_loss_and_gradient<double>(arch, theta, to_grid<double>(noisy), sigma,
                                                               to_grid<double>(batch), grad);
        if (!std::isfinite(loss) || !grad.allFinite())
        {
            std::ostringstream msg;
            msg << "train_step: non-finite loss " << loss << " (batch " << batch.cols() << ", sigma range ["
                << sigma.minCoeff() << ", " << sigma.maxCoeff() << "], |theta|_max " << theta.cwiseAbs().maxCoeff()
                << ")";
            throw numerical_error(msg.str());
        }
        adam.apply(theta, grad);
        return loss;
    }

    double evaluate_loss(const DenoiserArch &arch, const RVec &theta, const CMat &samples,
                         const std::vector<double> &levels, std::uint64_t seed)
    {
        if (samples.cols() == 0)
            return std::numeric_limits<double>::quiet_NaN();
        Rng rng = make_rng(seed, "evaluate");
        constexpr Index chunk = 64;
        double total = 0.0;
        for (Index start = 0; start < samples.cols(); start += chunk)
        {
            const Index n = std::min(chunk, samples.cols() - start);
            const CMat clean = samples.middleCols(start, n);
            RVec sigma(n);
            for (Index b = 0; b < n; ++b)
                sigma(b) = levels[uniform_index(rng, levels.size())];
            CMat noisy = clean;
            add_noise(noisy, sigma, rng);
            const RMat out = denoiser_forward<double>(arch, theta, to_grid<double>(noisy), sigma);
            total += (out - to_grid<double>(clean)).squaredNorm();
        }
        return total / static_cast<double>(samples.cols());
    }

    TrainResult train(const CMat &train_samples, const CMat &test_samples, const DenoiserArch &arch,
                      const TrainConfig &cfg, const std::function<void(const EpochLog &)> &on_epoch)
    {
        cfg.validate();
        arch.validate();
        if (train_samples.rows() != arch.pixels() || (test_samples.cols() > 0 && test_samples.rows() != arch.pixels()))
            throw std::invalid_argument("train: sample length does not match the architecture grid");
        if (train_samples.cols() < cfg.batch_size)
            throw std::invalid_argument("train: fewer training samples than one batch");

        const Index count = train_samples.cols();
        const Index dim = train_samples.rows();
        const double scale = std::sqrt(train_samples.squaredNorm() / (2.0 * static_cast<double>(count * dim)));
        if (!(scale > 0.0))
            throw std::invalid_argument("train: training data is identically zero");

        const CMat train_n = train_samples / scale;
        const CMat test_n = test_samples / scale;
        // Defaults: 1% of the complex RMS (sqrt 2 after normalization) and twice the largest per-sample RMS
        const double sigma_min = cfg.sigma_min > 0.0 ? cfg.sigma_min : 0.01 * std::numbers::sqrt2;
        double sigma_max = cfg.sigma_max;
        if (!(sigma_max > 0.0))
        {
            const double max_rms = (train_n.colwise().norm() / std::sqrt(static_cast<double>(dim))).maxCoeff();
            sigma_max = 2.0 * max_rms;
        }
        if (!(sigma_max > sigma_min))
            throw std::invalid_argument("train: sigma_max must exceed sigma_min");

        TrainResult result;
        DenoiserModel &model = result.model;
        model = DenoiserModel::initialize(arch, cfg.seed);
        model.ema_rate = cfg.ema_rate;
        model.data_scale = scale;
        model.sigma_min = sigma_min * scale;
        model.sigma_max = sigma_max * scale;

        const std::vector<double> levels = training_levels(cfg.noise_levels, sigma_min, sigma_max);
        AdamOptimizer adam;
        adam.learning_rate = cfg.learning_rate;
        Rng rng = make_rng(cfg.seed, "train");
        const std::uint64_t test_seed = derive_seed(cfg.seed, "test-noise");

        std::vector<Index> order(static_cast<std::size_t>(count));
        for (Index i = 0; i < count; ++i)
            order[static_cast<std::size_t>(i)] = i;

        double best_loss = std::numeric_limits<double>::infinity();
        RVec best = model.theta_ema;
        for (Index epoch = 1; epoch <= cfg.epochs; ++epoch)
        {
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[uniform_index(rng, i)]);

            double epoch_loss = 0.0;
            Index seen = 0;
            for (Index start = 0; start < count; start += cfg.batch_size)
            {
                const Index n = std::min(cfg.batch_size, count - start);
                CMat batch(dim, n);
                for (Index b = 0; b < n; ++b)
                    batch.col(b) = train_n.col(order[static_cast<std::size_t>(start + b)]);
                double loss = 0.0;
                try
                {
                    loss = train_step(arch, model.theta, batch, levels, rng, adam);
                }
                catch (const numerical_error &e)
                {
                    throw numerical_error("epoch " + std::to_string(epoch) + ", batch starting at " +
                                          std::to_string(start) + ": " + e.what());
                }
                ema_update(model.theta_ema, model.theta, cfg.ema_rate);
                epoch_loss += loss * static_cast<double>(n);
                seen += n;
            }

            EpochLog log;
            log.epoch = epoch;
            log.train_loss = epoch_loss / static_cast<double>(seen);
            log.test_loss = evaluate_loss(arch, model.theta_ema, test_n, levels, test_seed);
            const double criterion = std::isnan(log.test_loss) ? log.train_loss : log.test_loss;
            if (criterion < best_loss)
            {
                best_loss = criterion;
                best = model.theta_ema;
                model.epoch = epoch;
                log.best = true;
            }
            result.history.push_back(log);
            if (on_epoch)
                on_epoch(log);
        }
        model.theta_ema = best;
        return result;
    }
}
