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

#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace pnpce
{
    namespace
    {
        constexpr std::array<char, 8> magic = {'P', 'N', 'P', 'C', 'E', 'C', 'K', '\0'};

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
                throw std::runtime_error("checkpoint: truncated file");
            return v;
        }

        std::string describe(const DenoiserArch &a)
        {
            return std::to_string(a.rows) + "x" + std::to_string(a.cols) + " width " + std::to_string(a.width) +
                   " kernel " + std::to_string(a.kernel) + " freqs " + std::to_string(a.embed_freqs) + " embed " +
                   std::to_string(a.embed_width) + (a.positional_bias ? " pos" : " nopos");
        }
    }

    void write_checkpoint(std::ostream &os, const DenoiserModel &model)
    {
        const Index n = parameter_count(model.arch);
        if (model.theta.size() != n || model.theta_ema.size() != n)
            throw std::invalid_argument("write_checkpoint: parameter vectors do not match the architecture");
        os.write(magic.data(), magic.size());
        put<std::uint32_t>(os, checkpoint_format_version);
        const DenoiserArch &a = model.arch;
        for (Index v : {a.rows, a.cols, a.width, a.kernel, a.embed_freqs, a.embed_width})
            put<std::int64_t>(os, v);
        put<std::int64_t>(os, a.positional_bias ? 1 : 0);
        put<double>(os, model.data_scale);
        put<double>(os, model.sigma_min);
        put<double>(os, model.sigma_max);
        put<double>(os, model.ema_rate);
        put<std::uint64_t>(os, model.seed);
        put<std::int64_t>(os, model.epoch);
        put<std::uint64_t>(os, static_cast<std::uint64_t>(n));
        os.write(reinterpret_cast<const char *>(model.theta.data()), static_cast<std::streamsize>(n * sizeof(double)));
        os.write(reinterpret_cast<const char *>(model.theta_ema.data()), static_cast<std::streamsize>(n * sizeof(double)));
        if (!os)
            throw std::runtime_error("write_checkpoint: write failed");
    }

    DenoiserModel read_checkpoint(std::istream &is, const std::optional<DenoiserArch> &expected)
    {
        std::array<char, 8> m{};
        is.read(m.data(), m.size());
        if (!is || m != magic)
            throw std::runtime_error("checkpoint: bad magic, not a denoiser checkpoint");
        const auto version = get<std::uint32_t>(is);
        if (version != checkpoint_format_version)
            throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));

        DenoiserModel model;
        DenoiserArch &a = model.arch;
        for (Index *v : {&a.rows, &a.cols, &a.width, &a.kernel, &a.embed_freqs, &a.embed_width})
            *v = get<std::int64_t>(is);
        a.positional_bias = get<std::int64_t>(is) != 0;
        a.validate();
        if (expected && !(*expected == a))
            throw std::runtime_error("checkpoint: architecture mismatch, file has " + describe(a) + ", expected " +
                                     describe(*expected));

        model.data_scale = get<double>(is);
        model.sigma_min = get<double>(is);
        model.sigma_max = get<double>(is);
        model.ema_rate = get<double>(is);
        model.seed = get<std::uint64_t>(is);
        model.epoch = get<std::int64_t>(is);
        const auto n = get<std::uint64_t>(is);
        if (static_cast<Index>(n) != parameter_count(a))
            throw std::runtime_error("checkpoint: parameter count " + std::to_string(n) + " does not match " +
                                     describe(a));
        model.theta.resize(static_cast<Index>(n));
        model.theta_ema.resize(static_cast<Index>(n));
        is.read(reinterpret_cast<char *>(model.theta.data()), static_cast<std::streamsize>(n * sizeof(double)));
        is.read(reinterpret_cast<char *>(model.theta_ema.data()), static_cast<std::streamsize>(n * sizeof(double)));
        if (!is)
            throw std::runtime_error("checkpoint: truncated parameter block");
        return model;
    }

    void write_checkpoint(const std::filesystem::path &path, const DenoiserModel &model)
    {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os)
            throw std::runtime_error("cannot open " + path.string() + " for writing");
        write_checkpoint(os, model);
    }

    DenoiserModel read_checkpoint(const std::filesystem::path &path, const std::optional<DenoiserArch> &expected)
    {
        std::ifstream is(path, std::ios::binary);
        if (!is)
            throw std::runtime_error("cannot open " + path.string());
        return read_checkpoint(is, expected);
    }
}
