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

// Command-line front end: gen-dataset, train, estimate, benchmark, sweep, gridsearch.
// Exit codes: 0 ok, 1 other failure, 2 configuration error, 3 missing artifact, 4 numerical failure.

#include "pnpce/dataset.hpp"
#include "pnpce/diffusion.hpp"
#include "pnpce/harness/config.hpp"
#include "pnpce/harness/experiments.hpp"
#include "pnpce/harness/results.hpp"
#include "pnpce/solver.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace fs = std::filesystem;
using namespace pnpce;
using namespace pnpce::harness;

namespace
{
    struct CommonOptions
    {
        std::string config;
        std::optional<std::uint64_t> seed;
        std::string out;
        bool force = false;
        std::optional<Index> threads;
    };

    bool verbose = false;

    void add_common(CLI::App *sub, CommonOptions &o)
    {
        sub->add_option("--config", o.config, "Experiment configuration (YAML)")->required();
        sub->add_option("--seed", o.seed, "Override the master seed");
        sub->add_option("--out", o.out, "Override the output directory");
        sub->add_flag("--force", o.force, "Overwrite existing outputs");
        sub->add_option("--threads", o.threads, "Worker threads for trials")->check(CLI::PositiveNumber);
    }

    ExperimentConfig load(const CommonOptions &o)
    {
        ExperimentConfig cfg = load_config(o.config);
        if (o.seed)
        {
            cfg.seed = *o.seed;
            cfg.training.seed = derive_seed(cfg.seed, "training");
        }
        if (!o.out.empty())
            cfg.output = o.out;
        if (o.threads)
            cfg.threads = *o.threads;
        return cfg;
    }

    void log(const std::string &msg)
    {
        if (verbose)
            std::cerr << msg << '\n';
    }

    // Refuses to clobber any existing output unless forced, then creates the directory
    void prepare_outputs(const ExperimentConfig &cfg, const std::vector<std::string> &names, bool force)
    {
        for (const auto &n : names)
        {
            const fs::path p = cfg.output / n;
            if (fs::exists(p) && !force)
                throw config_error(p.string() + ": exists; pass --force to overwrite");
        }
        fs::create_directories(cfg.output);
    }

    void write_file(const fs::path &path, const std::function<void(std::ostream &)> &fn)
    {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os)
            throw std::runtime_error(path.string() + ": cannot open for writing");
        fn(os);
        if (!os)
            throw std::runtime_error(path.string() + ": write failed");
        log("wrote " + path.string());
    }

    std::string join(const std::vector<std::string> &v)
    {
        std::string s;
        for (const auto &x : v)
            s += (s.empty() ? "" : ",") + x;
        return s;
    }

    Manifest base_manifest(const ExperimentConfig &cfg, const std::string &command, const std::string &config_path,
                           const std::vector<std::string> &outputs)
    {
        Manifest m;
        m.add("tool", "pnpce");
        m.add("version", version());
        m.add("command", command);
        m.add("config", config_path);
        m.add("config_hash", content_hash(cfg.source_text));
        m.add("seed", std::to_string(cfg.seed));
        m.add("split_seed", std::to_string(cfg.split_seed));
        m.add("preset", cfg.preset);
        m.add("outputs", join(outputs));
        return m;
    }

    void describe_run(Manifest &m, const ExperimentConfig &cfg)
    {
        m.add("channel_source", cfg.channel_source == ChannelSource::hpsm ? "hpsm" : "gaussian");
        m.add("methods", join(cfg.methods));
        std::vector<std::string> snr;
        for (double s : cfg.snr_db)
            snr.push_back(format_double(s));
        m.add("snr_db", join(snr));
        m.add("snr_definition", "mean |Phi h|^2 per row over the training set and random pilots, "
                                "divided by the per-antenna noise variance");
        const auto [m_t, m_r] = resolve_pilots(cfg, cfg.pilots.alpha);
        m.add("pilots", "m_t=" + std::to_string(m_t) + " m_r=" + std::to_string(m_r) +
                            " n_b=" + std::to_string(cfg.pilots.n_b));
        m.add("trials", std::to_string(cfg.trials));
        m.add("solver", "lambda=" + format_double(cfg.solver.lambda) + " beta=" + format_double(cfg.solver.beta) +
                            " steps=" + std::to_string(cfg.solver.steps) + " projection=" +
                            (cfg.solver.projection == ProjectionMode::proximal ? "proximal" : "pseudo-inverse"));
        m.add("omp", "max_atoms=" + std::to_string(cfg.omp.max_atoms) +
                         " residual_factor=" + format_double(cfg.omp.residual_factor));
        m.add("amp", "iterations=" + std::to_string(cfg.amp.iterations) + " damping=" +
                         format_double(cfg.amp.damping) + " threshold_scale=" + format_double(cfg.amp.threshold_scale));
    }

    void write_manifest(const ExperimentConfig &cfg, const std::string &command, const Manifest &m)
    {
        write_file(cfg.output / (command + ".manifest.yaml"), [&](std::ostream &os) { m.write(os); });
    }

    Dataset load_dataset(const ExperimentConfig &cfg)
    {
        const fs::path p = cfg.output / "dataset.bin";
        if (!fs::exists(p))
            throw missing_artifact(p.string() + ": dataset not found; run gen-dataset first");
        return read_dataset(p);
    }

    std::optional<DenoiserModel> load_model(const ExperimentConfig &cfg, bool required)
    {
        const fs::path p = cfg.output / "model.ckpt";
        if (!fs::exists(p))
        {
            if (required)
                throw missing_artifact(p.string() + ": checkpoint not found; run train first");
            return std::nullopt;
        }
        return read_checkpoint(p, cfg.arch);
    }

    void write_results_pair(const ExperimentConfig &cfg, const std::string &results, const std::string &summary,
                            const std::vector<ResultRow> &rows)
    {
        write_file(cfg.output / results, [&](std::ostream &os) { write_results(os, rows); });
        write_file(cfg.output / summary, [&](std::ostream &os) { write_summary(os, summarize(rows)); });
    }

    int cmd_gen_dataset(const CommonOptions &o)
    {
        const ExperimentConfig cfg = load(o);
        const std::vector<std::string> outputs{"dataset.bin", "gen-dataset.manifest.yaml"};
        prepare_outputs(cfg, outputs, o.force);
        log("generating " + std::to_string(cfg.samples) + " channels");
        const Dataset d = generate_dataset(cfg.array, cfg.scenario, cfg.seed, cfg.samples);
        write_dataset(cfg.output / "dataset.bin", d);
        Manifest m = base_manifest(cfg, "gen-dataset", o.config, outputs);
        m.add("samples", std::to_string(cfg.samples));
        write_manifest(cfg, "gen-dataset", m);
        return 0;
    }

    int cmd_train(const CommonOptions &o)
    {
        const ExperimentConfig cfg = load(o);
        const std::vector<std::string> outputs{"model.ckpt", "train_log.csv", "train.manifest.yaml"};
        prepare_outputs(cfg, outputs, o.force);
        const Dataset d = load_dataset(cfg);
        if (!(d.array == cfg.array))
            throw config_error("dataset: array dimensions differ from the configuration");
        const Split split = split_indices(d.samples.size(), cfg.train_fraction, cfg.split_seed);
        const TrainResult res = train(stack_samples(d, split.train), stack_samples(d, split.test), cfg.arch,
                                      cfg.training, [](const EpochLog &e) {
                                          log("epoch " + std::to_string(e.epoch) + " train " +
                                              format_double(e.train_loss) + " test " + format_double(e.test_loss) +
                                              (e.best ? " *" : ""));
                                      });
        write_checkpoint(cfg.output / "model.ckpt", res.model);
        write_file(cfg.output / "train_log.csv", [&](std::ostream &os) {
            os << "# pnpce-trainlog v1\nepoch,train_loss,test_loss,best\n";
            for (const auto &e : res.history)
                os << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.test_loss) << ','
                   << (e.best ? 1 : 0) << '\n';
        });
        Manifest m = base_manifest(cfg, "train", o.config, outputs);
        m.add("training_seed", std::to_string(cfg.training.seed));
        m.add("training", "epochs=" + std::to_string(cfg.training.epochs) +
                              " batch_size=" + std::to_string(cfg.training.batch_size) +
                              " learning_rate=" + format_double(cfg.training.learning_rate) +
                              " ema_rate=" + format_double(cfg.training.ema_rate));
        m.add("parameters", std::to_string(res.model.theta.size()));
        m.add("sigma_range", format_double(res.model.sigma_min) + " " + format_double(res.model.sigma_max));
        m.add("best_epoch", std::to_string(res.model.epoch));
        write_manifest(cfg, "train", m);
        return 0;
    }

    int cmd_estimate(const CommonOptions &o, Index trial)
    {
        ExperimentConfig cfg = load(o);
        if (!needs_model(cfg.methods))
            cfg.methods.push_back("diffpace");
        const std::vector<std::string> outputs{"estimate.csv", "estimate_steps.csv", "estimate_channels.csv",
                                               "estimate.manifest.yaml"};
        const auto model = load_model(cfg, true);
        prepare_outputs(cfg, outputs, o.force);
        const auto env = make_environment(cfg, load_dataset(cfg), model);

        std::vector<ResultRow> rows;
        std::ostringstream steps, channels;
        steps << "# pnpce-steps v1\nsnr_db,i,sigma,rho,residual,step_norm\n";
        channels << "# pnpce-channels v1\nmethod,snr_db,index,re,im\n";
        const auto [m_t, m_r] = resolve_pilots(cfg, cfg.pilots.alpha);
        const double alpha = cfg.pilots.alpha ? *cfg.pilots.alpha : pilot_ratio(cfg.array, m_t, m_r);
        for (std::size_t c = 0; c < cfg.snr_db.size(); ++c)
        {
            const double snr = cfg.snr_db[c];
            const Trial t = make_trial(cfg, *env, trial, static_cast<Index>(c), snr, m_t, m_r);
            const ConsistencyProjector projector(t.m.phi);
            auto dump = [&](const std::string &name, const CVec &v) {
                for (Index i = 0; i < v.size(); ++i)
                    channels << name << ',' << format_double(snr) << ',' << i << ',' << format_double(v(i).real())
                             << ',' << format_double(v(i).imag()) << '\n';
            };
            dump("truth", t.h);
            for (const auto &method : cfg.methods)
            {
                const bool solver = method == "diffpace" || method == "diffpace-oracle";
                const Index k = solver ? cfg.solver.steps : 0;
                CVec est;
                if (method == "diffpace")
                {
                    SolverConfig sc;
                    sc.lambda = cfg.solver.lambda;
                    sc.beta = cfg.solver.beta;
                    sc.schedule = schedule_for(cfg, *env, method, k);
                    sc.seed = derive_seed(t.seed, "solver", c);
                    sc.projection = cfg.solver.projection;
                    const EstimateResult r = diffpace_estimate(*env->learned, t.m, sc, projector);
                    for (const auto &s : r.steps)
                        steps << format_double(snr) << ',' << s.i << ',' << format_double(s.sigma) << ','
                              << format_double(s.rho) << ',' << format_double(s.residual) << ','
                              << format_double(s.step_norm) << '\n';
                    est = r.estimate;
                }
                else
                    est = run_method(cfg, *env, method, t, projector, k, static_cast<Index>(c));
                dump(method, est);
                rows.push_back({method, snr, alpha, k, trial, nmse_db(t.h, est), 0.0, t.seed});
            }
        }
        sort_rows(rows);
        write_file(cfg.output / "estimate.csv", [&](std::ostream &os) { write_results(os, rows); });
        write_file(cfg.output / "estimate_steps.csv", [&](std::ostream &os) { os << steps.str(); });
        write_file(cfg.output / "estimate_channels.csv", [&](std::ostream &os) { os << channels.str(); });
        Manifest m = base_manifest(cfg, "estimate", o.config, outputs);
        describe_run(m, cfg);
        m.add("trial", std::to_string(trial));
        write_manifest(cfg, "estimate", m);
        return 0;
    }

    int cmd_benchmark(const CommonOptions &o)
    {
        const ExperimentConfig cfg = load(o);
        const std::vector<std::string> outputs{"results.csv", "summary.csv", "benchmark.manifest.yaml"};
        const auto model = load_model(cfg, needs_model(cfg.methods));
        prepare_outputs(cfg, outputs, o.force);
        const auto env = make_environment(cfg, load_dataset(cfg), model);
        write_results_pair(cfg, "results.csv", "summary.csv", run_snr_sweep(cfg, *env));
        Manifest m = base_manifest(cfg, "benchmark", o.config, outputs);
        describe_run(m, cfg);
        write_manifest(cfg, "benchmark", m);
        return 0;
    }

    int cmd_sweep(const CommonOptions &o, const std::string &over)
    {
        const ExperimentConfig cfg = load(o);
        const std::string command = "sweep-" + over;
        std::vector<std::string> outputs;
        if (over == "shift")
            outputs = {"shift.csv"};
        else
            outputs = {"results_" + over + ".csv", "summary_" + over + ".csv"};
        outputs.push_back(command + ".manifest.yaml");
        const auto model = load_model(cfg, needs_model(cfg.methods));
        prepare_outputs(cfg, outputs, o.force);
        const Dataset d = load_dataset(cfg);
        const auto env = make_environment(cfg, d, model);
        Manifest m = base_manifest(cfg, command, o.config, outputs);
        describe_run(m, cfg);

        if (over == "steps")
        {
            write_results_pair(cfg, outputs[0], outputs[1], run_step_sweep(cfg, *env, cfg.steps_grid));
            std::vector<std::string> ks;
            for (Index k : cfg.steps_grid)
                ks.push_back(std::to_string(k));
            m.add("steps", join(ks));
        }
        else if (over == "alpha")
        {
            write_results_pair(cfg, outputs[0], outputs[1], run_alpha_sweep(cfg, *env, cfg.alpha_grid));
            std::vector<std::string> as;
            for (double a : cfg.alpha_grid)
            {
                const auto [m_t, m_r] = pilot_dims_for_ratio(cfg.array, a);
                as.push_back(format_double(a) + ":" + std::to_string(m_t) + "x" + std::to_string(m_r));
            }
            m.add("alpha_pilots", join(as));
        }
        else
        {
            // Shifted test set: as many channels as the held-out split, drawn from the shift scenario
            const std::uint64_t shift_seed = derive_seed(cfg.seed, "shift");
            const Dataset shifted =
                generate_dataset(cfg.array, cfg.shift, shift_seed, static_cast<std::size_t>(env->test.cols()));
            std::vector<std::size_t> all(shifted.samples.size());
            for (std::size_t i = 0; i < all.size(); ++i)
                all[i] = i;
            const auto senv = with_test_set(*env, stack_samples(shifted, all));
            const auto rows = run_shift_eval(cfg, *env, *senv);
            write_file(cfg.output / "shift.csv", [&](std::ostream &os) { write_shift(os, rows); });
            m.add("shift_seed", std::to_string(shift_seed));
            m.add("shift_identity", cfg.shift == cfg.scenario ? "true" : "false");
        }
        write_manifest(cfg, command, m);
        return 0;
    }

    int cmd_gridsearch(const CommonOptions &o)
    {
        const ExperimentConfig cfg = load(o);
        const std::vector<std::string> outputs{"gridsearch.csv", "gridsearch_best.csv", "gridsearch.manifest.yaml"};
        const auto model = load_model(cfg, cfg.gridsearch_method == "diffpace");
        prepare_outputs(cfg, outputs, o.force);
        const auto env = make_environment(cfg, load_dataset(cfg), model);
        const GridSearchResult res = gridsearch(cfg.lambda_grid, cfg.beta_grid, cfg, *env);
        write_file(cfg.output / "gridsearch.csv", [&](std::ostream &os) { write_grid(os, res.surface); });
        write_file(cfg.output / "gridsearch_best.csv", [&](std::ostream &os) { write_grid(os, res.best); });
        Manifest m = base_manifest(cfg, "gridsearch", o.config, outputs);
        describe_run(m, cfg);
        m.add("gridsearch_method", cfg.gridsearch_method);
        write_manifest(cfg, "gridsearch", m);
        return 0;
    }
}

int main(int argc, char **argv)
{
#if defined(__GLIBC__)
    // Keeps the large per-step training buffers on the heap instead of an mmap/munmap pair each time
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    CLI::App app{"pnpce: diffusion plug-and-play channel estimation laboratory"};
    app.require_subcommand(1);
    app.add_flag("--verbose", verbose, "Progress messages on stderr");
    app.set_version_flag("--version", version());

    CommonOptions o;
    Index trial = 0;
    std::string over;
    auto *gen = app.add_subcommand("gen-dataset", "Generate the channel dataset");
    auto *tr = app.add_subcommand("train", "Train the denoiser on the dataset");
    auto *est = app.add_subcommand("estimate", "Run every method on one trial and dump the DiffPace trace");
    auto *bench = app.add_subcommand("benchmark", "NMSE of every method over the SNR grid");
    auto *sweep = app.add_subcommand("sweep", "Sweep solver steps, pilot ratio or scenario shift");
    auto *grid = app.add_subcommand("gridsearch", "Exhaustive (lambda, beta) search on the held-out split");
    for (auto *s : {gen, tr, est, bench, sweep, grid})
    {
        add_common(s, o);
        s->add_flag("--verbose", verbose, "Progress messages on stderr");
    }
    est->add_option("--trial", trial, "Trial index")->check(CLI::NonNegativeNumber);
    sweep->add_option("--over", over, "steps, alpha or shift")
        ->required()
        ->check(CLI::IsMember({"steps", "alpha", "shift"}));

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try
    {
        if (*gen)
            return cmd_gen_dataset(o);
        if (*tr)
            return cmd_train(o);
        if (*est)
            return cmd_estimate(o, trial);
        if (*bench)
            return cmd_benchmark(o);
        if (*sweep)
            return cmd_sweep(o, over);
        if (*grid)
            return cmd_gridsearch(o);
    }
    catch (const config_error &e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    catch (const missing_artifact &e)
    {
        std::cerr << "missing artifact: " << e.what() << '\n';
        return 3;
    }
    catch (const numerical_error &e)
    {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 4;
    }
    catch (const std::invalid_argument &e)
    {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return 2;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
