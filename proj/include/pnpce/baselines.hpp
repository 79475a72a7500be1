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

#ifndef pnpce_baselines_H
#define pnpce_baselines_H

#include "pnpce/types.hpp"

#include <optional>
#include <vector>

namespace pnpce
{
    // Minimum-norm least squares, pinv(Phi) y
    CVec ls_estimate(const CVec &y, const CMat &phi);

    struct OmpOptions
    {
        Index max_atoms = 0;          // sparsity s
        double residual_tol = 0.0;    // stop once |r|^2 <= residual_tol
    };

    struct OmpResult
    {
        CVec estimate;
        std::vector<Index> support; // selection order
    };

    OmpResult omp(const CVec &y, const CMat &phi, const OmpOptions &opt);

    struct AmpOptions
    {
        Index iterations = 30;
        double damping = 0.0;         // in [0, 1)
        double threshold_scale = 1.4; // tau
    };

    enum class AmpStatus
    {
        ok,
        diverged
    };

    struct AmpResult
    {
        CVec estimate;
        AmpStatus status = AmpStatus::ok;
        Index iterations = 0;
    };

    // Complex soft-threshold AMP; columns of Phi are normalized internally and undone on return
    AmpResult amp(const CVec &y, const CMat &phi, const AmpOptions &opt);

    // Complex soft threshold x (|x| - t)_+ / |x|
    CVec soft_threshold(const CVec &x, double t);

    struct SecondOrderPrior
    {
        CVec mean;
        CMat covariance;

        Index dim() const { return mean.size(); }

        // Hermitian within 1e-10 and eigenvalues >= -1e-10, both relative to the largest entry
        void validate() const;

        // Sample mean and covariance of the columns plus diagonal loading
        static SecondOrderPrior from_samples(const CMat &columns, double loading = 1e-6);
    };

    struct MmseResult
    {
        CVec estimate;
        bool rank_deficient = false;
    };

    // mu + Sigma Phi^H (Phi Sigma Phi^H + C_n)^{-1} (y - Phi mu); C_n = sigma_n^2 I unless given
    MmseResult mmse(const CVec &y, const CMat &phi, const SecondOrderPrior &prior, double sigma_n,
                    const std::optional<CMat> &noise_covariance = std::nullopt);

    // Trace of the posterior error covariance, the Bayes MSE of mmse() under its own prior
    double mmse_trace(const CMat &phi, const CMat &sigma, double sigma_n);
}

#endif
