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

#include "pnpce/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace pnpce
{
    namespace
    {
        constexpr std::array<char, 8> magic = {'P', 'N', 'P', 'C', 'E', 'D', 'S', '\0'};

        // Files are little-endian; this build only targets little-endian hosts
        template <typename T>
        void put(std::ostream &os, T v)
        {
            os.write(reinterpret_cast<const char *>(&v), sizeof(T));
        }

        template <typename T>
        T get(std::istream &is)
        {
            T v{};
            is.read(reinterpret_cast<char *>(&v), sizeof(T));
            if (!is)
                throw std::runtime_error("dataset: truncated file");
            return v;
        }

        void put_array(std::ostream &os, const ArrayConfig &c)
        {
            for (Index v : {c.n_t, c.n_r, c.k_t, c.k_r, c.l_t, c.l_r, c.tx_subarray.n_x, c.tx_subarray.n_z,
                            c.rx_subarray.n_x, c.rx_subarray.n_z})
                put<std::int64_t>(os, v);
        }

        ArrayConfig get_array(std::istream &is)
        {
            ArrayConfig c;
            for (Index *v : {&c.n_t, &c.n_r, &c.k_t, &c.k_r, &c.l_t, &c.l_r, &c.tx_subarray.n_x, &c.tx_subarray.n_z,
                             &c.rx_subarray.n_x, &c.rx_subarray.n_z})
                *v = get<std::int64_t>(is);
            return c;
        }

        void put_scenario(std::ostream &os, const ScenarioSpec &s)
        {
            put<std::int64_t>(os, s.min_paths);
            put<std::int64_t>(os, s.max_paths);
            for (double v : {s.azimuth_min, s.azimuth_max, s.elevation_min, s.elevation_max, s.decay, s.angular_spread,
                             s.subarray_spacing, s.wavelength, s.min_distance, s.max_distance})
                put<double>(os, v);
        }

        ScenarioSpec get_scenario(std::istream &is)
        {
            ScenarioSpec s;
            s.min_paths = get<std::int64_t>(is);
            s.max_paths = get<std::int64_t>(is);
            for (double *v : {&s.azimuth_min, &s.azimuth_max, &s.elevation_min, &s.elevation_max, &s.decay,
                              &s.angular_spread, &s.subarray_spacing, &s.wavelength, &s.min_distance, &s.max_distance})
                *v = get<double>(is);
            return s;
        }
    }

    CVec Dataset::vectorized(std::size_t i) const
    {
        const CMat &m = samples.at(i);
        return Eigen::Map<const CVec>(m.data(), m.size());
    }

    Dataset generate_dataset(const ArrayConfig &cfg, const ScenarioSpec &spec, std::uint64_t seed, std::size_t count)
    {
        cfg.validate();
        spec.validate();
        const CodebookPair cb = make_codebooks(cfg);
        Dataset d{cfg, spec, seed, {}};
        d.samples.reserve(count);
        for (std::size_t i = 0; i < count; ++i)
        {
            Rng rng = make_rng(seed, "sample", i);
            d.samples.push_back(sample_channel(rng, spec, cfg, cb).beamspace);
        }
        return d;
    }

    void write_dataset(std::ostream &os, const Dataset &d)
    {
        os.write(magic.data(), magic.size());
        put<std::uint32_t>(os, dataset_format_version);
        put_array(os, d.array);
        put_scenario(os, d.scenario);
        put<std::uint64_t>(os, d.seed);
        put<std::uint64_t>(os, d.samples.size());
        for (const CMat &m : d.samples)
        {
            if (m.rows() != d.array.n_r || m.cols() != d.array.n_t)
                throw std::invalid_argument("write_dataset: sample shape does not match the array configuration");
            for (Index r = 0; r < m.rows(); ++r)
                for (Index c = 0; c < m.cols(); ++c)
                {
                    put<double>(os, m(r, c).real());
                    put<double>(os, m(r, c).imag());
                }
        }
        if (!os)
            throw std::runtime_error("write_dataset: write failed");
    }

    Dataset read_dataset(std::istream &is)
    {
        std::array<char, 8> m{};
        is.read(m.data(), m.size());
        if (!is || m != magic)
            throw std::runtime_error("dataset: bad magic, not a channel dataset file");
        const auto version = get<std::uint32_t>(is);
        if (version != dataset_format_version)
            throw std::runtime_error("dataset: unsupported format version " + std::to_string(version));

        Dataset d;
        d.array = get_array(is);
        d.array.validate();
        d.scenario = get_scenario(is);
        d.seed = get<std::uint64_t>(is);
        const auto count = get<std::uint64_t>(is);
        d.samples.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i)
        {
            CMat s(d.array.n_r, d.array.n_t);
            for (Index r = 0; r < s.rows(); ++r)
                for (Index c = 0; c < s.cols(); ++c)
                {
                    const double re = get<double>(is);
                    const double im = get<double>(is);
                    s(r, c) = {re, im};
                }
            d.samples.push_back(std::move(s));
        }
        return d;
    }

    void write_dataset(const std::filesystem::path &path, const Dataset &d)
    {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os)
            throw std::runtime_error("cannot open " + path.string() + " for writing");
        write_dataset(os, d);
    }

    Dataset read_dataset(const std::filesystem::path &path)
    {
        std::ifstream is(path, std::ios::binary);
        if (!is)
            throw std::runtime_error("cannot open " + path.string());
        return read_dataset(is);
    }

    Split split_indices(std::size_t count, double train_fraction, std::uint64_t split_seed)
    {
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw std::invalid_argument("split_indices: train_fraction must lie in (0, 1)");
        std::vector<std::size_t> perm(count);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        Rng rng(derive_seed(split_seed, "split"));
        // Fisher-Yates with our own index draw so the permutation does not depend on std::shuffle internals
        for (std::size_t i = count; i > 1; --i)
            std::swap(perm[i - 1], perm[uniform_index(rng, i)]);

        const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(count)));
        Split s;
        s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
        s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
        std::sort(s.train.begin(), s.train.end());
        std::sort(s.test.begin(), s.test.end());
        return s;
    }

    CMat stack_samples(const Dataset &d, const std::vector<std::size_t> &indices)
    {
        CMat out(d.dim(), static_cast<Index>(indices.size()));
        for (std::size_t j = 0; j < indices.size(); ++j)
            out.col(static_cast<Index>(j)) = d.vectorized(indices[j]);
        return out;
    }
}
