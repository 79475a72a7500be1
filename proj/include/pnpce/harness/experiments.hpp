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

#ifndef pnpce_harness_experiments_H
#define pnpce_harness_experiments_H

#include "pnpce/baselines.hpp"
#include "pnpce/dataset.hpp"
#include "pnpce/diffusion.hpp"
#include "pnpce/harness/config.hpp"
#include "pnpce/harness/results.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <tuple>
#include <utility>

namespace pnpce::harness
{
    // Everything a trial needs besides its seeds: codebooks, test channels and the fitted priors
    struct Environment
    {
        ArrayConfig array;
        CodebookPair codebooks;
        CMat train; // columns vec(H_b)
        CMat test;
        SecondOrderPrior prior;                 // fitted on the training split
        std::shared_ptr<GaussianScore> oracle;  // exact score of CN(prior)
        std::shared_ptr<DenoiserScore> learned; // empty without a checkpoint
        double data_rms = 1.0;                  // complex RMS of the training entries
        std::uint64_t calibration_seed = 0;

        // Signal power per measurement row for one pilot geometry, cached
        double signal_power(Index m_t, Index m_r, int n_b) const;

    private:
        mutable std::mutex mutex_;
        mutable std::map<std::tuple<Index, Index, int>, double> power_;
    };

    std::shared_ptr<Environment> make_environment(const ExperimentConfig &cfg, const Dataset &dataset,
                                                  const std::optional<DenoiserModel> &model);

    // Same priors and model, different test channels
    std::shared_ptr<Environment> with_test_set(const Environment &env, CMat test);

    // True when a method needs a trained checkpoint
    bool needs_model(const std::vector<std::string> &methods);

    // Pilot dims for a target ratio, or the configured dims when no ratio is set
    std::pair<Index, Index> resolve_pilots(const ExperimentConfig &cfg, std::optional<double> alpha);

    // Diffusion schedule for a method: configured overrides, else the model's range (learned)
    // or 3x and 0.01x the data RMS (oracle)
    NoiseSchedule schedule_for(const ExperimentConfig &cfg, const Environment &env, const std::string &method,
                               Index steps);

    struct Trial
    {
        CVec h;
        PilotPlan plan;
        MeasurementSet m;
        std::uint64_t seed = 0;
    };

    // trial_seed = derive(master, "trial", t); channel from derive(trial_seed, "channel"),
    // plan and noise from derive(trial_seed, "plan" / "noise", cell)
    Trial make_trial(const ExperimentConfig &cfg, const Environment &env, Index trial, Index cell, double snr_db,
                     Index m_t, Index m_r);

    // Estimate of one method; solver methods use `steps`, and the seed is derive(trial_seed, "solver", cell)
    CVec run_method(const ExperimentConfig &cfg, const Environment &env, const std::string &method, const Trial &t,
                    const ConsistencyProjector &projector, Index steps, Index cell);

    // Every method at every SNR, configured pilots
    std::vector<ResultRow> run_snr_sweep(const ExperimentConfig &cfg, const Environment &env);

    // Solver methods at every K, the measurements shared across K
    std::vector<ResultRow> run_step_sweep(const ExperimentConfig &cfg, const Environment &env,
                                          const std::vector<Index> &steps);

    // Every method at every pilot ratio
    std::vector<ResultRow> run_alpha_sweep(const ExperimentConfig &cfg, const Environment &env,
                                           const std::vector<double> &alphas);

    // base and shifted rows per (method, SNR), plus shifted minus base
    std::vector<ShiftRow> run_shift_eval(const ExperimentConfig &cfg, const Environment &base,
                                         const Environment &shifted);

    struct GridSearchResult
    {
        std::vector<GridRow> surface;
        std::vector<GridRow> best; // one per SNR
    };

    // Exhaustive (lambda, beta) search on the test split; ties go to the smaller lambda, then beta
    GridSearchResult gridsearch(const std::vector<double> &lambdas, const std::vector<double> &betas,
                                const ExperimentConfig &cfg, const Environment &env);
}

#endif
