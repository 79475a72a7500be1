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

#include "pnpce/channel.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pnpce
{
    PathParams PathParams::zeros(Index paths, Index k_t, Index k_r)
    {
        if (paths < 0 || k_t < 1 || k_r < 1)
            throw std::invalid_argument("PathParams: path count must be non-negative and subarray counts positive");
        PathParams p;
        p.paths = paths;
        p.k_t = k_t;
        p.k_r = k_r;
        p.tuples.assign(static_cast<std::size_t>(paths * k_t * k_r), PathTuple{});
        return p;
    }

    PathParams PathParams::pair(Index kt, Index kr) const
    {
        if (kt < 0 || kt >= k_t || kr < 0 || kr >= k_r)
            throw std::invalid_argument("PathParams::pair: subarray index out of range");
        PathParams p = zeros(paths, 1, 1);
        for (Index l = 0; l < paths; ++l)
            p.at(l, 0, 0) = at(l, kt, kr);
        return p;
    }

    void PathParams::validate() const
    {
        if (paths < 0 || k_t < 1 || k_r < 1)
            throw std::invalid_argument("PathParams: invalid counts");
        if (tuples.size() != static_cast<std::size_t>(paths * k_t * k_r))
            throw std::invalid_argument("PathParams: expected " + std::to_string(paths * k_t * k_r) +
                                        " tuples, got " + std::to_string(tuples.size()));
        for (const auto &t : tuples)
        {
            if (!(t.gain >= 0.0) || !std::isfinite(t.gain) || !std::isfinite(t.phase))
                throw std::invalid_argument("PathParams: gains must be finite and non-negative, phases finite");
            if (!std::isfinite(t.aoa.azimuth) || !std::isfinite(t.aoa.elevation) ||
                !std::isfinite(t.aod.azimuth) || !std::isfinite(t.aod.elevation))
                throw std::invalid_argument("PathParams: angles must be finite");
        }
    }

    namespace
    {
        // Planar-wave block of pair (kt, kr)
        CMat planar_block(const PathParams &paths, Index kt, Index kr, const SubarrayShape &rx, const SubarrayShape &tx)
        {
            CMat block = CMat::Zero(rx.size(), tx.size());
            for (Index l = 0; l < paths.paths; ++l)
            {
                const PathTuple &p = paths.at(l, kt, kr);
                const CVec a_r = upa_steering(p.aoa.azimuth, p.aoa.elevation, rx.n_x, rx.n_z);
                const CVec a_t = upa_steering(p.aod.azimuth, p.aod.elevation, tx.n_x, tx.n_z);
                block.noalias() += (std::polar(p.gain, -p.phase) * a_r) * a_t.adjoint();
            }
            return block;
        }
    }

    CMat pwm_channel(const PathParams &paths, const ArrayConfig &cfg)
    {
        cfg.validate();
        paths.validate();
        if (paths.k_t != 1 || paths.k_r != 1 || cfg.k_t != 1 || cfg.k_r != 1)
            throw std::invalid_argument("pwm_channel: requires a single subarray on each side");
        return hpsm_channel(paths, cfg);
    }

    CMat hpsm_channel(const PathParams &paths, const ArrayConfig &cfg)
    {
        cfg.validate();
        paths.validate();
        if (paths.k_t != cfg.k_t || paths.k_r != cfg.k_r)
            throw std::invalid_argument("hpsm_channel: path parameters describe " + std::to_string(paths.k_t) + "x" +
                                        std::to_string(paths.k_r) + " subarray pairs, array has " +
                                        std::to_string(cfg.k_t) + "x" + std::to_string(cfg.k_r));

        const Index nrs = cfg.rx_per_subarray();
        const Index nts = cfg.tx_per_subarray();
        CMat h(cfg.n_r, cfg.n_t);
        for (Index kr = 0; kr < cfg.k_r; ++kr)
            for (Index kt = 0; kt < cfg.k_t; ++kt)
                h.block(kr * nrs, kt * nts, nrs, nts) = planar_block(paths, kt, kr, cfg.rx_subarray, cfg.tx_subarray);
        return h;
    }

    CMat swm_channel(std::span<const SphericalPath> paths, double wavelength)
    {
        if (!(wavelength > 0.0) || !std::isfinite(wavelength))
            throw std::invalid_argument("swm_channel: wavelength must be positive");
        if (paths.empty())
            throw std::invalid_argument("swm_channel: at least one path is needed to fix the matrix shape");

        const Index rows = paths[0].gain.rows();
        const Index cols = paths[0].gain.cols();
        CMat h = CMat::Zero(rows, cols);
        const double k = 2.0 * std::numbers::pi / wavelength;
        for (const auto &p : paths)
        {
            if (p.gain.rows() != rows || p.gain.cols() != cols || p.distance.rows() != rows || p.distance.cols() != cols)
                throw std::invalid_argument("swm_channel: gain and distance matrices must share one shape");
            if (!(p.distance.array() > 0.0).all())
                throw std::invalid_argument("swm_channel: distances must be positive");
            for (Index j = 0; j < cols; ++j)
                for (Index i = 0; i < rows; ++i)
                    h(i, j) += std::polar(p.gain(i, j), -k * p.distance(i, j));
        }
        return h;
    }

    CMat to_beamspace(const CMat &h, const CodebookPair &cb)
    {
        if (cb.rx.dim() != h.rows() || cb.tx.dim() != h.cols())
            throw std::invalid_argument("to_beamspace: codebook dimensions do not match the channel");
        return cb.rx.matrix.adjoint() * h * cb.tx.matrix;
    }

    CMat from_beamspace(const CMat &h_b, const CodebookPair &cb)
    {
        if (cb.rx.dim() != h_b.rows() || cb.tx.dim() != h_b.cols())
            throw std::invalid_argument("from_beamspace: codebook dimensions do not match the channel");
        return cb.rx.matrix * h_b * cb.tx.matrix.adjoint();
    }

    void ScenarioSpec::validate() const
    {
        auto fail = [](const std::string &what)
        { throw std::invalid_argument("ScenarioSpec: " + what); };

        if (min_paths < 0 || max_paths < min_paths)
            fail("path range must satisfy 0 <= min_paths <= max_paths");
        if (!std::isfinite(azimuth_min) || !std::isfinite(azimuth_max) || azimuth_max < azimuth_min)
            fail("azimuth range is empty");
        if (!std::isfinite(elevation_min) || !std::isfinite(elevation_max) || elevation_max < elevation_min)
            fail("elevation range is empty");
        if (!std::isfinite(decay) || decay < 0.0)
            fail("decay must be finite and non-negative");
        if (!std::isfinite(angular_spread) || angular_spread < 0.0)
            fail("angular_spread must be finite and non-negative");
        if (!std::isfinite(subarray_spacing) || subarray_spacing < 0.0)
            fail("subarray_spacing must be finite and non-negative");
        if (!(wavelength > 0.0) || !std::isfinite(wavelength))
            fail("wavelength must be positive");
        if (!(min_distance > 0.0) || !std::isfinite(max_distance) || max_distance < min_distance)
            fail("distance range must satisfy 0 < min_distance <= max_distance");
    }

    std::vector<double> ScenarioSpec::power_profile(Index paths) const
    {
        std::vector<double> w(static_cast<std::size_t>(std::max<Index>(paths, 0)));
        double total = 0.0;
        for (std::size_t l = 0; l < w.size(); ++l)
        {
            w[l] = std::exp(-decay * static_cast<double>(l));
            total += w[l];
        }
        for (double &v : w)
            v /= total;
        return w;
    }

    std::vector<double> subarray_centers(Index k, const SubarrayShape &shape, double spacing, double wavelength)
    {
        const double pitch = (0.5 * static_cast<double>(shape.n_x) + spacing) * wavelength;
        std::vector<double> c(static_cast<std::size_t>(k));
        for (Index i = 0; i < k; ++i)
            c[static_cast<std::size_t>(i)] = (static_cast<double>(i) - 0.5 * static_cast<double>(k - 1)) * pitch;
        return c;
    }

    namespace
    {
        using Vec3 = std::array<double, 3>;

        Vec3 direction(const Angles &a)
        {
            return {std::sin(a.azimuth) * std::cos(a.elevation), std::cos(a.azimuth) * std::cos(a.elevation),
                    std::sin(a.elevation)};
        }

        double distance_from(const Vec3 &point, double x_offset)
        {
            const double dx = point[0] - x_offset;
            return std::sqrt(dx * dx + point[1] * point[1] + point[2] * point[2]);
        }

        Angles jitter(Rng &rng, const Angles &centre, double spread)
        {
            if (spread == 0.0)
                return centre;
            const double da = uniform(rng, -spread, spread);
            const double de = uniform(rng, -spread, spread);
            return {centre.azimuth + da, centre.elevation + de};
        }
    }

    PathParams sample_scenario(Rng &rng, const ScenarioSpec &spec, const ArrayConfig &cfg)
    {
        spec.validate();
        cfg.validate();

        const Index paths = spec.min_paths + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(spec.max_paths - spec.min_paths + 1)));
        const std::vector<double> profile = spec.power_profile(paths);
        const double pair_power = static_cast<double>(cfg.n_t * cfg.n_r) / static_cast<double>(cfg.k_t * cfg.k_r);

        const auto tx_centers = subarray_centers(cfg.k_t, cfg.tx_subarray, spec.subarray_spacing, spec.wavelength);
        const auto rx_centers = subarray_centers(cfg.k_r, cfg.rx_subarray, spec.subarray_spacing, spec.wavelength);
        const double two_pi = 2.0 * std::numbers::pi;

        PathParams p = PathParams::zeros(paths, cfg.k_t, cfg.k_r);
        for (Index l = 0; l < paths; ++l)
        {
            const Angles aod{uniform(rng, spec.azimuth_min, spec.azimuth_max), uniform(rng, spec.elevation_min, spec.elevation_max)};
            const Angles aoa{uniform(rng, spec.azimuth_min, spec.azimuth_max), uniform(rng, spec.elevation_min, spec.elevation_max)};
            const double d_t = uniform(rng, spec.min_distance, spec.max_distance);
            const double d_r = uniform(rng, spec.min_distance, spec.max_distance);
            const double base_phase = uniform(rng, 0.0, two_pi);

            // Reflector points seen from the Tx and Rx array origins
            Vec3 s_t = direction(aod);
            Vec3 s_r = direction(aoa);
            for (int i = 0; i < 3; ++i)
            {
                s_t[i] *= d_t;
                s_r[i] *= d_r;
            }

            std::vector<Angles> aod_k(static_cast<std::size_t>(cfg.k_t));
            std::vector<Angles> aoa_k(static_cast<std::size_t>(cfg.k_r));
            for (auto &a : aod_k)
                a = jitter(rng, aod, spec.angular_spread);
            for (auto &a : aoa_k)
                a = jitter(rng, aoa, spec.angular_spread);

            const double amplitude = std::sqrt(pair_power * profile[static_cast<std::size_t>(l)]);
            const double reference = d_t + d_r;
            for (Index kt = 0; kt < cfg.k_t; ++kt)
                for (Index kr = 0; kr < cfg.k_r; ++kr)
                {
                    const double length = distance_from(s_t, tx_centers[static_cast<std::size_t>(kt)]) +
                                          distance_from(s_r, rx_centers[static_cast<std::size_t>(kr)]);
                    PathTuple &t = p.at(l, kt, kr);
                    t.gain = amplitude * reference / length;
                    t.phase = std::fmod(base_phase + two_pi * length / spec.wavelength, two_pi);
                    t.aod = aod_k[static_cast<std::size_t>(kt)];
                    t.aoa = aoa_k[static_cast<std::size_t>(kr)];
                }
        }
        return p;
    }

    ChannelSample sample_channel(Rng &rng, const ScenarioSpec &spec, const ArrayConfig &cfg, const CodebookPair &cb)
    {
        ChannelSample s;
        s.paths = sample_scenario(rng, spec, cfg);
        s.spatial = hpsm_channel(*s.paths, cfg);
        s.beamspace = to_beamspace(s.spatial, cb);
        return s;
    }
}
