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

#include "pnpce/harness/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace pnpce::harness
{
    namespace
    {
        class Reader
        {
        public:
            explicit Reader(std::string source) : source_(std::move(source)) {}

            [[noreturn]] void fail(const YAML::Node &n, const std::string &field, const std::string &why) const
            {
                const YAML::Mark m = n.Mark();
                std::ostringstream os;
                os << source_;
                if (!m.is_null())
                    os << ':' << m.line + 1 << ':' << m.column + 1;
                os << ": " << field << ": " << why;
                throw config_error(os.str());
            }

            void require_map(const YAML::Node &n, const std::string &field) const
            {
                if (!n.IsMap())
                    fail(n, field, "expected a mapping");
            }

            void check_keys(const YAML::Node &n, const std::string &field, const std::set<std::string> &allowed) const
            {
                require_map(n, field);
                for (const auto &kv : n)
                {
                    const auto key = kv.first.as<std::string>();
                    if (!allowed.count(key))
                    {
                        std::string list;
                        for (const auto &a : allowed)
                            list += (list.empty() ? "" : ", ") + a;
                        fail(kv.first, join(field, key), "unknown key (allowed: " + list + ")");
                    }
                }
            }

            template <typename T>
            T scalar(const YAML::Node &n, const std::string &field, const char *type) const
            {
                if (!n.IsScalar())
                    fail(n, field, std::string("expected ") + type);
                try
                {
                    return n.as<T>();
                }
                catch (const YAML::Exception &)
                {
                    fail(n, field, std::string("expected ") + type + ", got '" + n.Scalar() + "'");
                }
            }

            double real(const YAML::Node &n, const std::string &field) const
            {
                const double v = scalar<double>(n, field, "a number");
                if (!std::isfinite(v))
                    fail(n, field, "must be finite");
                return v;
            }

            double positive(const YAML::Node &n, const std::string &field) const
            {
                const double v = real(n, field);
                if (!(v > 0.0))
                    fail(n, field, "must be positive");
                return v;
            }

            double non_negative(const YAML::Node &n, const std::string &field) const
            {
                const double v = real(n, field);
                if (v < 0.0)
                    fail(n, field, "must be non-negative");
                return v;
            }

            Index integer(const YAML::Node &n, const std::string &field, Index min_value) const
            {
                const auto v = scalar<long long>(n, field, "an integer");
                if (v < min_value)
                    fail(n, field, "must be at least " + std::to_string(min_value));
                return static_cast<Index>(v);
            }

            std::uint64_t seed(const YAML::Node &n, const std::string &field) const
            {
                return scalar<std::uint64_t>(n, field, "a non-negative integer");
            }

            bool boolean(const YAML::Node &n, const std::string &field) const
            {
                return scalar<bool>(n, field, "true or false");
            }

            std::string text(const YAML::Node &n, const std::string &field) const
            {
                return scalar<std::string>(n, field, "a string");
            }

            std::vector<double> reals(const YAML::Node &n, const std::string &field) const
            {
                if (!n.IsSequence() || n.size() == 0)
                    fail(n, field, "expected a non-empty list of numbers");
                std::vector<double> out;
                for (std::size_t i = 0; i < n.size(); ++i)
                    out.push_back(real(n[i], field + "[" + std::to_string(i) + "]"));
                return out;
            }

            std::pair<double, double> range(const YAML::Node &n, const std::string &field) const
            {
                const auto v = reals(n, field);
                if (v.size() != 2)
                    fail(n, field, "expected [min, max]");
                if (v[1] < v[0])
                    fail(n, field, "empty range, max < min");
                return {v[0], v[1]};
            }

            static std::string join(const std::string &a, const std::string &b)
            {
                return a.empty() ? b : a + "." + b;
            }

        private:
            std::string source_;
        };

        void read_scenario(const Reader &r, const YAML::Node &n, const std::string &field, ScenarioSpec &s)
        {
            r.check_keys(n, field, {"min_paths", "max_paths", "azimuth_range", "elevation_range", "decay",
                                    "angular_spread", "subarray_spacing", "wavelength", "distance_range"});
            if (n["min_paths"])
                s.min_paths = r.integer(n["min_paths"], field + ".min_paths", 0);
            if (n["max_paths"])
                s.max_paths = r.integer(n["max_paths"], field + ".max_paths", 0);
            if (s.max_paths < s.min_paths)
                r.fail(n, field, "max_paths must not be below min_paths");
            if (n["azimuth_range"])
                std::tie(s.azimuth_min, s.azimuth_max) = r.range(n["azimuth_range"], field + ".azimuth_range");
            if (n["elevation_range"])
                std::tie(s.elevation_min, s.elevation_max) = r.range(n["elevation_range"], field + ".elevation_range");
            if (n["decay"])
                s.decay = r.non_negative(n["decay"], field + ".decay");
            if (n["angular_spread"])
                s.angular_spread = r.non_negative(n["angular_spread"], field + ".angular_spread");
            if (n["subarray_spacing"])
                s.subarray_spacing = r.non_negative(n["subarray_spacing"], field + ".subarray_spacing");
            if (n["wavelength"])
                s.wavelength = r.positive(n["wavelength"], field + ".wavelength");
            if (n["distance_range"])
            {
                std::tie(s.min_distance, s.max_distance) = r.range(n["distance_range"], field + ".distance_range");
                if (!(s.min_distance > 0.0))
                    r.fail(n["distance_range"], field + ".distance_range", "distances must be positive");
            }
        }

        SubarrayShape read_shape(const Reader &r, const YAML::Node &n, const std::string &field)
        {
            if (!n.IsSequence() || n.size() != 2)
                r.fail(n, field, "expected [n_x, n_z]");
            return {r.integer(n[0], field + "[0]", 1), r.integer(n[1], field + "[1]", 1)};
        }

        void read_array(const Reader &r, const YAML::Node &n, ExperimentConfig &c)
        {
            r.check_keys(n, "array", {"preset", "n_t", "n_r", "k_t", "k_r", "l_t", "l_r", "tx_subarray", "rx_subarray"});
            if (n["preset"])
                c.preset = r.text(n["preset"], "array.preset");
            if (c.preset != "custom")
            {
                try
                {
                    c.array = array_preset(c.preset);
                }
                catch (const std::invalid_argument &e)
                {
                    r.fail(n["preset"], "array.preset", std::string(e.what()) + " or custom");
                }
                for (const auto &kv : n)
                    if (kv.first.as<std::string>() != "preset")
                        r.fail(kv.first, "array." + kv.first.as<std::string>(),
                               "preset dimensions are fixed; use preset: custom to set them");
                return;
            }
            const std::vector<std::pair<const char *, Index *>> counts = {
                {"n_t", &c.array.n_t}, {"n_r", &c.array.n_r}, {"k_t", &c.array.k_t},
                {"k_r", &c.array.k_r}, {"l_t", &c.array.l_t}, {"l_r", &c.array.l_r}};
            for (const auto &[key, dst] : counts)
            {
                if (!n[key])
                    r.fail(n, std::string("array.") + key, "required for a custom array");
                *dst = r.integer(n[key], std::string("array.") + key, 1);
            }
            for (const char *key : {"tx_subarray", "rx_subarray"})
                if (!n[key])
                    r.fail(n, std::string("array.") + key, "required for a custom array");
            c.array.tx_subarray = read_shape(r, n["tx_subarray"], "array.tx_subarray");
            c.array.rx_subarray = read_shape(r, n["rx_subarray"], "array.rx_subarray");
            try
            {
                c.array.validate();
            }
            catch (const std::invalid_argument &e)
            {
                r.fail(n, "array", e.what());
            }
        }
    }

    void ExperimentConfig::validate() const
    {
        array.validate();
        scenario.validate();
        shift.validate();
        training.validate();
        arch.validate();
        if (trials < 1)
            throw config_error("trials: must be at least 1");
        if (snr_db.empty())
            throw config_error("snr_db: must not be empty");
        if (methods.empty())
            throw config_error("methods: must not be empty");
        for (const auto &m : methods)
            if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
                throw config_error("methods: unknown method '" + m + "'");
        if (arch.rows != array.n_r || arch.cols != array.n_t)
            throw config_error("training: network grid must be n_r x n_t");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw config_error("dataset.train_fraction: must lie in (0, 1)");
        if (solver.steps < 1 || !(solver.lambda > 0.0) || solver.beta < 0.0)
            throw config_error("solver: need steps >= 1, lambda > 0, beta >= 0");
        if (threads < 1)
            throw config_error("threads: must be at least 1");
    }

    ExperimentConfig parse_config(const std::string &text, const std::string &source)
    {
        const Reader r(source);
        YAML::Node root;
        try
        {
            root = YAML::Load(text);
        }
        catch (const YAML::ParserException &e)
        {
            std::ostringstream os;
            os << source << ':' << e.mark.line + 1 << ':' << e.mark.column + 1 << ": syntax error: " << e.msg;
            throw config_error(os.str());
        }

        ExperimentConfig c;
        c.source_text = text;
        if (root.IsNull())
        {
            c.arch.rows = c.array.n_r;
            c.arch.cols = c.array.n_t;
            c.shift = c.scenario;
            return c;
        }
        r.check_keys(root, "", {"seed", "output", "trials", "threads", "record_timing", "channel_source", "array",
                                "scenario", "dataset", "pilots", "snr_db", "methods", "mmse_colored_noise", "solver",
                                "omp", "amp", "training", "sweep", "gridsearch", "shift"});

        if (root["seed"])
            c.seed = r.seed(root["seed"], "seed");
        if (root["output"])
            c.output = r.text(root["output"], "output");
        if (root["trials"])
            c.trials = r.integer(root["trials"], "trials", 1);
        if (root["threads"])
            c.threads = r.integer(root["threads"], "threads", 1);
        if (root["record_timing"])
            c.record_timing = r.boolean(root["record_timing"], "record_timing");
        if (root["mmse_colored_noise"])
            c.mmse_colored_noise = r.boolean(root["mmse_colored_noise"], "mmse_colored_noise");
        if (root["channel_source"])
        {
            const auto s = r.text(root["channel_source"], "channel_source");
            if (s == "hpsm")
                c.channel_source = ChannelSource::hpsm;
            else if (s == "gaussian")
                c.channel_source = ChannelSource::gaussian;
            else
                r.fail(root["channel_source"], "channel_source", "expected hpsm or gaussian");
        }

        if (root["array"])
            read_array(r, root["array"], c);
        if (root["scenario"])
            read_scenario(r, root["scenario"], "scenario", c.scenario);
        c.shift = c.scenario;
        if (root["shift"])
            read_scenario(r, root["shift"], "shift", c.shift);

        if (const auto d = root["dataset"])
        {
            r.check_keys(d, "dataset", {"samples", "train_fraction", "split_seed"});
            if (d["samples"])
                c.samples = static_cast<std::size_t>(r.integer(d["samples"], "dataset.samples", 2));
            if (d["train_fraction"])
            {
                c.train_fraction = r.real(d["train_fraction"], "dataset.train_fraction");
                if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
                    r.fail(d["train_fraction"], "dataset.train_fraction", "must lie in (0, 1)");
            }
            if (d["split_seed"])
                c.split_seed = r.seed(d["split_seed"], "dataset.split_seed");
        }

        if (const auto p = root["pilots"])
        {
            r.check_keys(p, "pilots", {"alpha", "m_t", "m_r", "n_b"});
            if (p["alpha"] && (p["m_t"] || p["m_r"]))
                r.fail(p, "pilots", "give either alpha or m_t and m_r, not both");
            if (p["m_t"] || p["m_r"])
            {
                if (!p["m_t"] || !p["m_r"])
                    r.fail(p, "pilots", "m_t and m_r must be given together");
                c.pilots.alpha.reset();
                c.pilots.m_t = r.integer(p["m_t"], "pilots.m_t", 1);
                c.pilots.m_r = r.integer(p["m_r"], "pilots.m_r", 1);
                if (c.pilots.m_t > c.array.n_t)
                    r.fail(p["m_t"], "pilots.m_t", "must not exceed n_t");
                if (c.pilots.m_r * c.array.l_r > c.array.n_r)
                    r.fail(p["m_r"], "pilots.m_r", "m_r * l_r must not exceed n_r");
            }
            if (p["alpha"])
            {
                const double a = r.real(p["alpha"], "pilots.alpha");
                if (!(a > 0.0 && a <= 1.0))
                    r.fail(p["alpha"], "pilots.alpha", "must lie in (0, 1]");
                c.pilots.alpha = a;
            }
            if (p["n_b"])
                c.pilots.n_b = static_cast<int>(r.integer(p["n_b"], "pilots.n_b", 1));
        }

        if (root["snr_db"])
            c.snr_db = r.reals(root["snr_db"], "snr_db");
        if (const auto m = root["methods"])
        {
            if (!m.IsSequence() || m.size() == 0)
                r.fail(m, "methods", "expected a non-empty list");
            c.methods.clear();
            for (std::size_t i = 0; i < m.size(); ++i)
            {
                const auto name = r.text(m[i], "methods[" + std::to_string(i) + "]");
                if (std::find(known_methods().begin(), known_methods().end(), name) == known_methods().end())
                    r.fail(m[i], "methods[" + std::to_string(i) + "]",
                           "unknown method '" + name + "' (ls, omp, amp, mmse, diffpace, diffpace-oracle)");
                if (std::find(c.methods.begin(), c.methods.end(), name) != c.methods.end())
                    r.fail(m[i], "methods[" + std::to_string(i) + "]", "duplicate method '" + name + "'");
                c.methods.push_back(name);
            }
        }

        if (const auto s = root["solver"])
        {
            r.check_keys(s, "solver", {"lambda", "beta", "steps", "sigma_min", "sigma_max", "projection", "precision"});
            if (s["lambda"])
                c.solver.lambda = r.positive(s["lambda"], "solver.lambda");
            if (s["beta"])
                c.solver.beta = r.non_negative(s["beta"], "solver.beta");
            if (s["steps"])
                c.solver.steps = r.integer(s["steps"], "solver.steps", 1);
            if (s["sigma_min"])
                c.solver.sigma_min = r.non_negative(s["sigma_min"], "solver.sigma_min");
            if (s["sigma_max"])
                c.solver.sigma_max = r.non_negative(s["sigma_max"], "solver.sigma_max");
            if (s["projection"])
            {
                const auto p = r.text(s["projection"], "solver.projection");
                if (p == "proximal")
                    c.solver.projection = ProjectionMode::proximal;
                else if (p == "pseudo-inverse")
                    c.solver.projection = ProjectionMode::pseudo_inverse;
                else
                    r.fail(s["projection"], "solver.projection", "expected proximal or pseudo-inverse");
            }
            if (s["precision"])
            {
                const auto p = r.text(s["precision"], "solver.precision");
                if (p == "f64")
                    c.solver.precision = Precision::f64;
                else if (p == "f32")
                    c.solver.precision = Precision::f32;
                else
                    r.fail(s["precision"], "solver.precision", "expected f64 or f32");
            }
        }

        if (const auto o = root["omp"])
        {
            r.check_keys(o, "omp", {"max_atoms", "residual_factor"});
            if (o["max_atoms"])
                c.omp.max_atoms = r.integer(o["max_atoms"], "omp.max_atoms", 0);
            if (o["residual_factor"])
                c.omp.residual_factor = r.non_negative(o["residual_factor"], "omp.residual_factor");
        }

        if (const auto a = root["amp"])
        {
            r.check_keys(a, "amp", {"iterations", "damping", "threshold_scale"});
            if (a["iterations"])
                c.amp.iterations = r.integer(a["iterations"], "amp.iterations", 1);
            if (a["damping"])
            {
                c.amp.damping = r.non_negative(a["damping"], "amp.damping");
                if (c.amp.damping >= 1.0)
                    r.fail(a["damping"], "amp.damping", "must lie in [0, 1)");
            }
            if (a["threshold_scale"])
                c.amp.threshold_scale = r.positive(a["threshold_scale"], "amp.threshold_scale");
        }

        if (const auto t = root["training"])
        {
            r.check_keys(t, "training", {"epochs", "batch_size", "learning_rate", "ema_rate", "noise_levels",
                                         "sigma_min", "sigma_max", "width", "kernel", "embed_freqs", "embed_width",
                                         "positional_bias"});
            if (t["epochs"])
                c.training.epochs = r.integer(t["epochs"], "training.epochs", 0);
            if (t["batch_size"])
                c.training.batch_size = r.integer(t["batch_size"], "training.batch_size", 1);
            if (t["learning_rate"])
                c.training.learning_rate = r.positive(t["learning_rate"], "training.learning_rate");
            if (t["ema_rate"])
            {
                c.training.ema_rate = r.non_negative(t["ema_rate"], "training.ema_rate");
                if (c.training.ema_rate >= 1.0)
                    r.fail(t["ema_rate"], "training.ema_rate", "must lie in [0, 1)");
            }
            if (t["noise_levels"])
                c.training.noise_levels = r.integer(t["noise_levels"], "training.noise_levels", 1);
            if (t["sigma_min"])
                c.training.sigma_min = r.non_negative(t["sigma_min"], "training.sigma_min");
            if (t["sigma_max"])
                c.training.sigma_max = r.non_negative(t["sigma_max"], "training.sigma_max");
            if (t["width"])
                c.arch.width = r.integer(t["width"], "training.width", 1);
            if (t["kernel"])
            {
                c.arch.kernel = r.integer(t["kernel"], "training.kernel", 1);
                if (c.arch.kernel % 2 == 0)
                    r.fail(t["kernel"], "training.kernel", "must be odd");
            }
            if (t["embed_freqs"])
                c.arch.embed_freqs = r.integer(t["embed_freqs"], "training.embed_freqs", 2);
            if (t["embed_width"])
                c.arch.embed_width = r.integer(t["embed_width"], "training.embed_width", 1);
            if (t["positional_bias"])
                c.arch.positional_bias = r.boolean(t["positional_bias"], "training.positional_bias");
        }
        c.training.seed = derive_seed(c.seed, "training");
        c.arch.rows = c.array.n_r;
        c.arch.cols = c.array.n_t;

        if (const auto s = root["sweep"])
        {
            r.check_keys(s, "sweep", {"steps", "alpha"});
            if (s["steps"])
            {
                const auto n = s["steps"];
                if (!n.IsSequence() || n.size() == 0)
                    r.fail(n, "sweep.steps", "expected a non-empty list of integers");
                c.steps_grid.clear();
                for (std::size_t i = 0; i < n.size(); ++i)
                    c.steps_grid.push_back(r.integer(n[i], "sweep.steps[" + std::to_string(i) + "]", 1));
            }
            if (s["alpha"])
            {
                c.alpha_grid = r.reals(s["alpha"], "sweep.alpha");
                for (double a : c.alpha_grid)
                    if (!(a > 0.0 && a <= 1.0))
                        r.fail(s["alpha"], "sweep.alpha", "entries must lie in (0, 1]");
            }
        }

        if (const auto g = root["gridsearch"])
        {
            r.check_keys(g, "gridsearch", {"lambda", "beta", "method"});
            if (g["lambda"])
            {
                c.lambda_grid = r.reals(g["lambda"], "gridsearch.lambda");
                for (double v : c.lambda_grid)
                    if (!(v > 0.0))
                        r.fail(g["lambda"], "gridsearch.lambda", "entries must be positive");
            }
            if (g["beta"])
            {
                c.beta_grid = r.reals(g["beta"], "gridsearch.beta");
                for (double v : c.beta_grid)
                    if (v < 0.0)
                        r.fail(g["beta"], "gridsearch.beta", "entries must be non-negative");
            }
            if (g["method"])
            {
                c.gridsearch_method = r.text(g["method"], "gridsearch.method");
                if (c.gridsearch_method != "diffpace" && c.gridsearch_method != "diffpace-oracle")
                    r.fail(g["method"], "gridsearch.method", "expected diffpace or diffpace-oracle");
            }
        }

        try
        {
            c.validate();
        }
        catch (const std::invalid_argument &e)
        {
            throw config_error(source + ": " + e.what());
        }
        catch (const config_error &e)
        {
            throw config_error(source + ": " + e.what());
        }
        return c;
    }

    ExperimentConfig load_config(const std::filesystem::path &path)
    {
        std::ifstream is(path, std::ios::binary);
        if (!is)
            throw config_error(path.string() + ": cannot read configuration file");
        std::ostringstream os;
        os << is.rdbuf();
        return parse_config(os.str(), path.string());
    }

    std::string content_hash(const std::string &text)
    {
        const std::uint64_t h = tag_hash(text);
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }
}
