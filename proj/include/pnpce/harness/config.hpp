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

#ifndef pnpce_harness_config_H
#define pnpce_harness_config_H

#include "pnpce/baselines.hpp"
#include "pnpce/channel.hpp"
#include "pnpce/diffusion.hpp"
#include "pnpce/geometry.hpp"
#include "pnpce/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnpce::harness
{
    // Invalid configuration; the message carries "source:line:column: field: reason" when known
    class config_error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // A required input file (dataset, checkpoint) does not exist
    class missing_artifact : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    enum class ChannelSource
    {
        hpsm,    // test channels from the dataset's held-out split
        gaussian // test channels drawn from CN(mu, Sigma) fitted on the training split
    };

    struct PilotSettings
    {
        std::optional<double> alpha = 0.8; // overrides m_t, m_r when set
        Index m_t = 26;
        Index m_r = 4;
        int n_b = 4;
    };

    struct SolverSettings
    {
        double lambda = 0.1;
        double beta = 0.1;
        Index steps = 100;
        double sigma_min = 0.0; // data units; 0 takes the model's (or the data-derived) value
        double sigma_max = 0.0;
        ProjectionMode projection = ProjectionMode::proximal;
        Precision precision = Precision::f64;
    };

    struct OmpSettings
    {
        Index max_atoms = 0;          // 0: stop on the residual tolerance instead
        double residual_factor = 1.0; // tolerance = factor * rows * sigma_n^2
    };

    struct ExperimentConfig
    {
        std::string preset = "desk";
        ArrayConfig array = array_preset("desk");
        ScenarioSpec scenario;

        std::size_t samples = 2048;
        double train_fraction = 0.9;
        std::uint64_t split_seed = 0;

        ChannelSource channel_source = ChannelSource::hpsm;
        PilotSettings pilots;
        std::vector<double> snr_db{10.0};
        std::vector<std::string> methods{"ls", "omp", "mmse", "diffpace"};
        bool mmse_colored_noise = false;
        SolverSettings solver;
        OmpSettings omp;
        AmpOptions amp;

        TrainConfig training;
        DenoiserArch arch; // rows and cols follow the array

        Index trials = 100;
        std::uint64_t seed = 0;
        std::filesystem::path output = "out";
        Index threads = 1;
        bool record_timing = false;

        std::vector<Index> steps_grid{20, 50, 100};
        std::vector<double> alpha_grid{0.2, 0.4, 0.6, 0.8, 1.0};
        std::vector<double> lambda_grid{0.03, 0.1, 0.3};
        std::vector<double> beta_grid{0.03, 0.1, 0.3};
        std::string gridsearch_method = "diffpace";
        ScenarioSpec shift; // shifted scenario; defaults to the base scenario

        std::string source_text; // raw configuration text, hashed into the run manifest

        void validate() const;
    };

    inline const std::vector<std::string> &known_methods()
    {
        static const std::vector<std::string> m{"ls", "omp", "amp", "mmse", "diffpace", "diffpace-oracle"};
        return m;
    }

    // Parses YAML text; unknown keys and type errors raise config_error with line and column
    ExperimentConfig parse_config(const std::string &text, const std::string &source = "<config>");

    ExperimentConfig load_config(const std::filesystem::path &path);

    // 64-bit FNV-1a, hex encoded
    std::string content_hash(const std::string &text);
}

#endif
