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

#ifndef pnpce_dataset_H
#define pnpce_dataset_H

#include "pnpce/channel.hpp"
#include "pnpce/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace pnpce
{
    inline constexpr std::uint32_t dataset_format_version = 1;

    // Beamspace channel matrices drawn from one scenario
    struct Dataset
    {
        ArrayConfig array;
        ScenarioSpec scenario;
        std::uint64_t seed = 0;
        std::vector<CMat> samples; // n_r x n_t beamspace matrices

        Index dim() const { return array.unknowns(); }

        // Sample i as vec(H_b), column-major
        CVec vectorized(std::size_t i) const;
    };

    // Sample i uses the generator derive_seed(seed, "sample", i)
    Dataset generate_dataset(const ArrayConfig &cfg, const ScenarioSpec &spec, std::uint64_t seed, std::size_t count);

    void write_dataset(std::ostream &os, const Dataset &d);
    Dataset read_dataset(std::istream &is);
    void write_dataset(const std::filesystem::path &path, const Dataset &d);
    Dataset read_dataset(const std::filesystem::path &path);

    struct Split
    {
        std::vector<std::size_t> train;
        std::vector<std::size_t> test;
    };

    // Seeded permutation, first round(train_fraction * count) indices train
    Split split_indices(std::size_t count, double train_fraction, std::uint64_t split_seed);

    // Columns are vec(H_b) of the selected samples
    CMat stack_samples(const Dataset &d, const std::vector<std::size_t> &indices);
}

#endif
