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

#ifndef pnpce_solver_H
#define pnpce_solver_H

#include "pnpce/diffusion.hpp"
#include "pnpce/measurement.hpp"
#include "pnpce/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace pnpce
{
    enum class ProjectionMode
    {
        pseudo_inverse, // z + rho Phi^H (Phi Phi^H)^{-1} (y - Phi z)
        proximal        // argmin_h |y - Phi h|^2 + |h - z|^2 / rho
    };

    struct SolverConfig
    {
        double lambda = 0.006;
        double beta = 0.05;
        NoiseSchedule schedule;
        std::uint64_t seed = 0;
        ProjectionMode projection = ProjectionMode::proximal;

        Index steps() const { return schedule.steps(); }
        void validate() const;
    };

    // sigma_{t_i} (sigma_{t_i} - sigma_{t_{i-1}}), 1 <= i <= K
    double delta_sigma(const NoiseSchedule &schedule, Index i);

    // Delta sigma_i / (2 lambda sigma_n^2 + beta sigma_{t_i}^2)
    double step_length(const NoiseSchedule &schedule, Index i, double lambda, double beta, double sigma_n);

    // h_t + delta s(h_t, sigma)
    CVec prior_step(const ScoreSource &score, const CVec &h_t, double sigma, double delta);

    // Cached eigendecomposition of Phi Phi^H, shared by every step and estimator using one Phi
    class ConsistencyProjector
    {
    public:
        explicit ConsistencyProjector(const CMat &phi);

        // z + rho Phi^H (Phi Phi^H)^{-1} (y - Phi z)
        CVec project(const CVec &z, const CVec &y, double rho) const;

        // z + Phi^H (Phi Phi^H + I / rho)^{-1} (y - Phi z)
        CVec proximal(const CVec &z, const CVec &y, double rho) const;

        // True when Phi Phi^H was loaded by 1e-10 of its largest eigenvalue
        bool regularized() const { return regularized_; }
        const CMat &phi() const { return phi_; }

    private:
        CMat phi_;
        CMat v_;
        RVec ev_;
        bool regularized_ = false;
    };

    CVec consistency_project(const CVec &z, const CVec &y, const ConsistencyProjector &projector, double rho);

    struct StepRecord
    {
        Index i = 0;
        double sigma = 0.0;
        double rho = 0.0;
        double residual = 0.0;  // |y - Phi h_{t_{i-1}}|
        double step_norm = 0.0; // |h_{t_{i-1}} - h_{t_i}|
    };

    struct EstimateResult
    {
        CVec estimate;
        std::vector<StepRecord> steps;
        bool regularized = false;
    };

    EstimateResult diffpace_estimate(const ScoreSource &score, const MeasurementSet &m, const SolverConfig &cfg);

    // Reuses a projector built for m.phi
    EstimateResult diffpace_estimate(const ScoreSource &score, const MeasurementSet &m, const SolverConfig &cfg,
                                     const ConsistencyProjector &projector);

    // Euler steps of the probability-flow ODE from h ~ CN(0, sigma_max^2 I)
    CVec ode_sample(const ScoreSource &score, const NoiseSchedule &schedule, Rng &rng);

    void write_step_csv(std::ostream &os, const std::vector<StepRecord> &steps);
}

#endif
