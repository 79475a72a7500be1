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

#ifndef pnpce_channel_H
#define pnpce_channel_H

#include "pnpce/geometry.hpp"
#include "pnpce/types.hpp"

#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace pnpce
{
    struct Angles
    {
        double azimuth = 0.0;   // theta
        double elevation = 0.0; // phi

        bool operator==(const Angles &) const = default;
    };

    // Parameters of path l on the link between Tx subarray k_t and Rx subarray k_r
    struct PathTuple
    {
        double gain = 0.0;  // |a|
        double phase = 0.0; // rad
        Angles aoa;
        Angles aod;

        bool operator==(const PathTuple &) const = default;
    };

    struct PathParams
    {
        Index paths = 0;
        Index k_t = 1;
        Index k_r = 1;
        std::vector<PathTuple> tuples; // (l * k_t + kt) * k_r + kr

        static PathParams zeros(Index paths, Index k_t, Index k_r);

        PathTuple &at(Index l, Index kt, Index kr) { return tuples[index(l, kt, kr)]; }
        const PathTuple &at(Index l, Index kt, Index kr) const { return tuples[index(l, kt, kr)]; }

        // Single-link view of pair (kt, kr), usable with pwm_channel
        PathParams pair(Index kt, Index kr) const;

        void validate() const;

        bool operator==(const PathParams &) const = default;

    private:
        std::size_t index(Index l, Index kt, Index kr) const
        {
            return static_cast<std::size_t>((l * k_t + kt) * k_r + kr);
        }
    };

    struct ChannelSample
    {
        CMat spatial;
        CMat beamspace;
        std::optional<PathParams> paths;
    };

    // Planar-wave channel of a single Tx and Rx array
    CMat pwm_channel(const PathParams &paths, const ArrayConfig &cfg);

    // Hybrid planar-spherical channel: one planar-wave block per subarray pair
    CMat hpsm_channel(const PathParams &paths, const ArrayConfig &cfg);

    // Per-antenna-pair gains and distances of one path, both n_r x n_t
    struct SphericalPath
    {
        RMat gain;
        RMat distance; // m
    };

    CMat swm_channel(std::span<const SphericalPath> paths, double wavelength);

    CMat to_beamspace(const CMat &h, const CodebookPair &cb);
    CMat from_beamspace(const CMat &h_b, const CodebookPair &cb);

    // Random multipath scenario descriptor
    struct ScenarioSpec
    {
        Index min_paths = 1;
        Index max_paths = 5;
        double azimuth_min = -std::numbers::pi / 3.0;
        double azimuth_max = std::numbers::pi / 3.0;
        double elevation_min = -std::numbers::pi / 6.0;
        double elevation_max = std::numbers::pi / 6.0;
        double decay = 0.7;            // path power ~ exp(-decay * l)
        double angular_spread = 0.03;  // rad, half-width of per-subarray angle jitter
        double subarray_spacing = 8.0; // edge-to-edge gap between subarrays, in wavelengths
        double wavelength = 5e-3;      // m
        double min_distance = 5.0;     // m, array to reflector
        double max_distance = 50.0;

        void validate() const;

        // Normalized power profile for an L-path draw; sums to 1
        std::vector<double> power_profile(Index paths) const;

        bool operator==(const ScenarioSpec &) const = default;
    };

    // Subarray centers along the x axis, m
    std::vector<double> subarray_centers(Index k, const SubarrayShape &shape, double spacing, double wavelength);

    PathParams sample_scenario(Rng &rng, const ScenarioSpec &spec, const ArrayConfig &cfg);

    ChannelSample sample_channel(Rng &rng, const ScenarioSpec &spec, const ArrayConfig &cfg, const CodebookPair &cb);
}

#endif
