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

#include "pnpce/solver.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>

namespace pnpce
{
    void SolverConfig::validate() const
    {
        schedule.validate();
        if (!(lambda > 0.0) || !std::isfinite(lambda))
            throw std::invalid_argument("SolverConfig: lambda must be positive");
        if (!(beta >= 0.0) || !std::isfinite(beta))
            throw std::invalid_argument("SolverConfig: beta must be non-negative");
    }

    double delta_sigma(const NoiseSchedule &schedule, Index i)
    {
        if (i < 1 || i > schedule.steps())
            throw std::invalid_argument("delta_sigma: step " + std::to_string(i) + " outside [1, " +
                                        std::to_string(schedule.steps()) + "]");
        const double s = schedule.at(i);
        return s * (s - schedule.at(i - 1));
    }

    double step_length(const NoiseSchedule &schedule, Index i, double lambda, double beta, double sigma_n)
    {
        const double d = delta_sigma(schedule, i);
        const double s = schedule.at(i);
        const double denom = 2.0 * lambda * sigma_n * sigma_n + beta * s * s;
        if (!(denom > 0.0) || !std::isfinite(denom))
            throw std::invalid_argument("step_length: denominator 2 lambda sigma_n^2 + beta sigma^2 is not positive");
        return d / denom;
    }

    CVec prior_step(const ScoreSource &score, const CVec &h_t, double sigma, double delta)
    {
        if (!(sigma > 0.0))
            throw std::invalid_argument("prior_step: sigma must be positive");
        const CVec s = score.score(h_t, sigma);
        if (s.size() != h_t.size())
            throw std::invalid_argument("prior_step: score dimension differs from the iterate");
        if (!s.allFinite())
            throw numerical_error("prior_step: non-finite score at sigma " + std::to_string(sigma) +
                                  ", |h_t| = " + std::to_string(h_t.norm()));
        return h_t + delta * s;
    }

    ConsistencyProjector::ConsistencyProjector(const CMat &phi) : phi_(phi)
    {
        if (phi.rows() < 1 || phi.rows() > phi.cols())
            throw std::invalid_argument("ConsistencyProjector: need 1 <= rows <= columns");
        const CMat g = phi * phi.adjoint();
        const Eigen::SelfAdjointEigenSolver<CMat> es(g);
        if (es.info() != Eigen::Success)
            throw numerical_error("ConsistencyProjector: eigendecomposition of Phi Phi^H failed");
        v_ = es.eigenvectors();
        ev_ = es.eigenvalues();
        const double top = ev_.maxCoeff();
        if (!(top > 0.0))
            throw std::invalid_argument("ConsistencyProjector: measurement matrix is zero");
        const double floor = 1e-10 * top;
        if (ev_.minCoeff() <= floor)
        {
            regularized_ = true;
            ev_ = ev_.cwiseMax(0.0).array() + floor;
        }
    }

    CVec ConsistencyProjector::project(const CVec &z, const CVec &y, double rho) const
    {
        if (rho == 0.0)
            return z;
        const CVec c = v_.adjoint() * (y - phi_ * z);
        return z + rho * (phi_.adjoint() * (v_ * (ev_.cwiseInverse().asDiagonal() * c)));
    }

    CVec ConsistencyProjector::proximal(const CVec &z, const CVec &y, double rho) const
    {
        if (!(rho > 0.0))
            return z;
        const CVec c = v_.adjoint() * (y - phi_ * z);
        const RVec w = (ev_.array() + 1.0 / rho).inverse();
        return z + phi_.adjoint() * (v_ * (w.asDiagonal() * c));
    }

    CVec consistency_project(const CVec &z, const CVec &y, const ConsistencyProjector &projector, double rho)
    {
        if (z.size() != projector.phi().cols() || y.size() != projector.phi().rows())
            throw std::invalid_argument("consistency_project: dimension mismatch");
        return projector.project(z, y, rho);
    }

    EstimateResult diffpace_estimate(const ScoreSource &score, const MeasurementSet &m, const SolverConfig &cfg)
    {
        return diffpace_estimate(score, m, cfg, ConsistencyProjector(m.phi));
    }

    EstimateResult diffpace_estimate(const ScoreSource &score, const MeasurementSet &m, const SolverConfig &cfg,
                                     const ConsistencyProjector &projector)
    {
        cfg.validate();
        if (score.dim() != m.phi.cols() || m.y.size() != m.phi.rows() || projector.phi().rows() != m.phi.rows() ||
            projector.phi().cols() != m.phi.cols())
            throw std::invalid_argument("diffpace_estimate: score, measurement and projector dimensions disagree");

        const NoiseSchedule &sched = cfg.schedule;
        const Index k = sched.steps();
        Rng rng = make_rng(cfg.seed, "init");
        CVec h = sched.sigma_max() * complex_normal_vector(rng, m.phi.cols());

        EstimateResult res;
        res.regularized = projector.regularized();
        res.steps.reserve(static_cast<std::size_t>(k));
        for (Index i = k; i >= 1; --i)
        {
            const double sigma = sched.at(i);
            const double delta = delta_sigma(sched, i);
            const double rho = step_length(sched, i, cfg.lambda, cfg.beta, m.sigma_n);
            const CVec z = prior_step(score, h, sigma, delta);
            CVec next = cfg.projection == ProjectionMode::proximal ? projector.proximal(z, m.y, rho)
                                                                   : projector.project(z, m.y, rho);
            if (!next.allFinite())
                throw numerical_error("diffpace_estimate: non-finite iterate at step " + std::to_string(i));

            StepRecord rec;
            rec.i = i;
            rec.sigma = sigma;
            rec.rho = rho;
            rec.residual = (m.y - m.phi * next).norm();
            rec.step_norm = (next - h).norm();
            res.steps.push_back(rec);
            h = std::move(next);
        }
        res.estimate = std::move(h);
        return res;
    }

    CVec ode_sample(const ScoreSource &score, const NoiseSchedule &schedule, Rng &rng)
    {
        schedule.validate();
        CVec h = schedule.sigma_max() * complex_normal_vector(rng, score.dim());
        for (Index i = schedule.steps(); i >= 1; --i)
            h = prior_step(score, h, schedule.at(i), delta_sigma(schedule, i));
        return h;
    }

    void write_step_csv(std::ostream &os, const std::vector<StepRecord> &steps)
    {
        os << "i,sigma,rho,residual,step_norm\n";
        os << std::setprecision(17);
        for (const auto &s : steps)
            os << s.i << ',' << s.sigma << ',' << s.rho << ',' << s.residual << ',' << s.step_norm << '\n';
    }
}
