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

#include "pnpce/harness/experiments.hpp"

#include "pnpce/solver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <thread>

namespace pnpce::harness
{
    namespace
    {
        bool is_solver_method(const std::string &m)
        {
            return m == "diffpace" || m == "diffpace-oracle";
        }

        // One measurement geometry: SNR plus pilot dims, indexed for seed derivation
        struct Cell
        {
            Index index = 0;
            double snr_db = 0.0;
            double alpha = 0.0; // reported ratio
            Index m_t = 0;
            Index m_r = 0;
        };

        std::vector<Cell> make_cells(const ExperimentConfig &cfg, const std::vector<std::optional<double>> &alphas)
        {
            std::vector<Cell> cells;
            Index index = 0;
            for (double snr : cfg.snr_db)
                for (const auto &a : alphas)
                {
                    const auto [m_t, m_r] = resolve_pilots(cfg, a);
                    cells.push_back({index++, snr, a ? *a : pilot_ratio(cfg.array, m_t, m_r), m_t, m_r});
                }
            return cells;
        }

        // Runs fn(trial) for every trial on cfg.threads workers; the first exception wins
        template <typename Fn>
        void parallel_trials(const ExperimentConfig &cfg, Fn &&fn)
        {
            const Index n_threads = std::max<Index>(1, std::min(cfg.threads, cfg.trials));
            std::atomic<Index> next{0};
            std::exception_ptr error;
            std::mutex error_mutex;
            auto worker = [&]
            {
                for (;;)
                {
                    const Index t = next.fetch_add(1);
                    if (t >= cfg.trials)
                        return;
                    try
                    {
                        fn(t);
                    }
                    catch (...)
                    {
                        std::lock_guard lock(error_mutex);
                        if (!error)
                            error = std::current_exception();
                        next.store(cfg.trials);
                        return;
                    }
                }
            };
            if (n_threads == 1)
                worker();
            else
            {
                std::vector<std::thread> pool;
                for (Index i = 0; i < n_threads; ++i)
                    pool.emplace_back(worker);
                for (auto &th : pool)
                    th.join();
            }
            if (error)
                std::rethrow_exception(error);
        }

        std::vector<ResultRow> evaluate(const ExperimentConfig &cfg, const Environment &env,
                                        const std::vector<Cell> &cells, const std::vector<Index> &steps)
        {
            std::vector<std::vector<ResultRow>> per_trial(static_cast<std::size_t>(cfg.trials));
            parallel_trials(cfg, [&](Index trial) {
                auto &out = per_trial[static_cast<std::size_t>(trial)];
                for (const auto &cell : cells)
                {
                    const Trial t = make_trial(cfg, env, trial, cell.index, cell.snr_db, cell.m_t, cell.m_r);
                    const ConsistencyProjector projector(t.m.phi);
                    for (const auto &method : cfg.methods)
                    {
                        const std::vector<Index> ks = is_solver_method(method) ? steps : std::vector<Index>{0};
                        for (Index k : ks)
                        {
                            const auto start = std::chrono::steady_clock::now();
                            const CVec est = run_method(cfg, env, method, t, projector, k, cell.index);
                            const auto stop = std::chrono::steady_clock::now();
                            ResultRow row;
                            row.method = method;
                            row.snr_db = cell.snr_db;
                            row.alpha = cell.alpha;
                            row.k = k;
                            row.trial = trial;
                            row.nmse_db = nmse_db(t.h, est);
                            row.wall_ms = cfg.record_timing
                                              ? std::chrono::duration<double, std::milli>(stop - start).count()
                                              : 0.0;
                            row.seed = t.seed;
                            out.push_back(std::move(row));
                        }
                    }
                }
            });
            std::vector<ResultRow> rows;
            for (auto &v : per_trial)
                rows.insert(rows.end(), v.begin(), v.end());
            sort_rows(rows);
            return rows;
        }
    }

    double Environment::signal_power(Index m_t, Index m_r, int n_b) const
    {
        std::lock_guard lock(mutex_);
        const auto key = std::make_tuple(m_t, m_r, n_b);
        if (auto it = power_.find(key); it != power_.end())
            return it->second;
        const double p = calibrate_signal_power(train, array, codebooks, m_t, m_r, n_b, calibration_seed);
        power_.emplace(key, p);
        return p;
    }

    std::shared_ptr<Environment> make_environment(const ExperimentConfig &cfg, const Dataset &dataset,
                                                  const std::optional<DenoiserModel> &model)
    {
        if (!(dataset.array == cfg.array))
            throw config_error("dataset: array dimensions differ from the configuration");
        if (dataset.samples.size() < 2)
            throw config_error("dataset: need at least two samples for a train/test split");
        const Split split = split_indices(dataset.samples.size(), cfg.train_fraction, cfg.split_seed);
        if (split.train.empty() || split.test.empty())
            throw config_error("dataset.train_fraction: leaves an empty split");

        auto env = std::make_shared<Environment>();
        env->array = cfg.array;
        env->codebooks = make_codebooks(cfg.array);
        env->train = stack_samples(dataset, split.train);
        env->test = stack_samples(dataset, split.test);
        env->prior = SecondOrderPrior::from_samples(env->train);
        env->oracle = std::make_shared<GaussianScore>(env->prior.mean, env->prior.covariance);
        env->data_rms = std::sqrt(env->train.squaredNorm() / static_cast<double>(env->train.size()));
        env->calibration_seed = derive_seed(cfg.seed, "calibration");
        if (model)
        {
            if (model->arch.rows != cfg.array.n_r || model->arch.cols != cfg.array.n_t)
                throw config_error("checkpoint: network grid does not match the array");
            env->learned = std::make_shared<DenoiserScore>(*model, cfg.solver.precision);
        }
        return env;
    }

    std::shared_ptr<Environment> with_test_set(const Environment &env, CMat test)
    {
        if (test.rows() != env.array.unknowns() || test.cols() < 1)
            throw std::invalid_argument("with_test_set: test channels do not match the array");
        auto out = std::make_shared<Environment>();
        out->array = env.array;
        out->codebooks = env.codebooks;
        out->train = env.train;
        out->test = std::move(test);
        out->prior = env.prior;
        out->oracle = env.oracle;
        out->learned = env.learned;
        out->data_rms = env.data_rms;
        out->calibration_seed = env.calibration_seed;
        return out;
    }

    bool needs_model(const std::vector<std::string> &methods)
    {
        return std::find(methods.begin(), methods.end(), "diffpace") != methods.end();
    }

    std::pair<Index, Index> resolve_pilots(const ExperimentConfig &cfg, std::optional<double> alpha)
    {
        if (alpha)
            return pilot_dims_for_ratio(cfg.array, *alpha);
        return {cfg.pilots.m_t, cfg.pilots.m_r};
    }

    NoiseSchedule schedule_for(const ExperimentConfig &cfg, const Environment &env, const std::string &method,
                               Index steps)
    {
        double lo = 0.01 * env.data_rms;
        double hi = 3.0 * env.data_rms;
        if (method == "diffpace")
        {
            if (!env.learned)
                throw missing_artifact("diffpace: no trained checkpoint loaded");
            lo = env.learned->model().sigma_min;
            hi = env.learned->model().sigma_max;
        }
        if (cfg.solver.sigma_min > 0.0)
            lo = cfg.solver.sigma_min;
        if (cfg.solver.sigma_max > 0.0)
            hi = cfg.solver.sigma_max;
        if (!(lo < hi))
            throw config_error("solver: sigma_min must lie below sigma_max");
        return make_schedule(steps, lo, hi);
    }

    Trial make_trial(const ExperimentConfig &cfg, const Environment &env, Index trial, Index cell, double snr_db,
                     Index m_t, Index m_r)
    {
        Trial t;
        t.seed = derive_seed(cfg.seed, "trial", static_cast<std::uint64_t>(trial));
        if (cfg.channel_source == ChannelSource::hpsm)
            t.h = env.test.col(trial % env.test.cols());
        else
        {
            Rng rng = make_rng(t.seed, "channel");
            const CVec n = complex_normal_vector(rng, env.prior.dim());
            const RVec scale = env.oracle->eigenvalues().cwiseMax(0.0).cwiseSqrt();
            t.h = env.oracle->mean() + env.oracle->eigenvectors() * (scale.cast<cd>().asDiagonal() * n);
        }

        const auto c = static_cast<std::uint64_t>(cell);
        Rng plan_rng = make_rng(t.seed, "plan", c);
        t.plan = sample_pilot_plan(plan_rng, cfg.array, m_t, m_r, cfg.pilots.n_b);
        const CMat phi = build_measurement_matrix(t.plan, env.codebooks);
        const CMat hb = Eigen::Map<const CMat>(t.h.data(), cfg.array.n_r, cfg.array.n_t);
        Rng noise_rng = make_rng(t.seed, "noise", c);
        t.m = measure_at_snr(hb, t.plan, phi, snr_db, env.signal_power(m_t, m_r, cfg.pilots.n_b), noise_rng);
        return t;
    }

    CVec run_method(const ExperimentConfig &cfg, const Environment &env, const std::string &method, const Trial &t,
                    const ConsistencyProjector &projector, Index steps, Index cell)
    {
        const MeasurementSet &m = t.m;
        if (method == "ls")
            return ls_estimate(m.y, m.phi);
        if (method == "omp")
        {
            OmpOptions opt;
            opt.max_atoms = cfg.omp.max_atoms > 0 ? cfg.omp.max_atoms : m.phi.rows();
            opt.residual_tol = cfg.omp.residual_factor * static_cast<double>(m.phi.rows()) * m.sigma_n * m.sigma_n;
            return omp(m.y, m.phi, opt).estimate;
        }
        if (method == "amp")
            return amp(m.y, m.phi, cfg.amp).estimate;
        if (method == "mmse")
        {
            if (cfg.mmse_colored_noise)
                return mmse(m.y, m.phi, env.prior, m.sigma_n,
                            CMat(m.sigma_n * m.sigma_n * combined_noise_covariance(t.plan)))
                    .estimate;
            return mmse(m.y, m.phi, env.prior, m.sigma_n).estimate;
        }
        if (is_solver_method(method))
        {
            SolverConfig sc;
            sc.lambda = cfg.solver.lambda;
            sc.beta = cfg.solver.beta;
            sc.schedule = schedule_for(cfg, env, method, steps);
            sc.seed = derive_seed(t.seed, "solver", static_cast<std::uint64_t>(cell));
            sc.projection = cfg.solver.projection;
            const ScoreSource &score =
                method == "diffpace" ? static_cast<const ScoreSource &>(*env.learned) : *env.oracle;
            return diffpace_estimate(score, m, sc, projector).estimate;
        }
        throw std::invalid_argument("run_method: unknown method '" + method + "'");
    }

    std::vector<ResultRow> run_snr_sweep(const ExperimentConfig &cfg, const Environment &env)
    {
        return evaluate(cfg, env, make_cells(cfg, {cfg.pilots.alpha}), {cfg.solver.steps});
    }

    std::vector<ResultRow> run_step_sweep(const ExperimentConfig &cfg, const Environment &env,
                                          const std::vector<Index> &steps)
    {
        if (steps.empty())
            throw std::invalid_argument("run_step_sweep: empty step grid");
        for (Index k : steps)
            if (k < 1)
                throw std::invalid_argument("run_step_sweep: steps must be positive");
        return evaluate(cfg, env, make_cells(cfg, {cfg.pilots.alpha}), steps);
    }

    std::vector<ResultRow> run_alpha_sweep(const ExperimentConfig &cfg, const Environment &env,
                                           const std::vector<double> &alphas)
    {
        if (alphas.empty())
            throw std::invalid_argument("run_alpha_sweep: empty ratio grid");
        std::vector<std::optional<double>> grid(alphas.begin(), alphas.end());
        return evaluate(cfg, env, make_cells(cfg, grid), {cfg.solver.steps});
    }

    std::vector<ShiftRow> run_shift_eval(const ExperimentConfig &cfg, const Environment &base,
                                         const Environment &shifted)
    {
        // Shifts live in the scenario, so test channels must come from the held-out sets
        ExperimentConfig c = cfg;
        c.channel_source = ChannelSource::hpsm;
        const auto a = run_snr_sweep(c, base);
        const auto b = run_snr_sweep(c, shifted);

        std::vector<ShiftRow> out;
        std::size_t i = 0;
        while (i < a.size())
        {
            std::vector<double> va, vb, diff;
            std::size_t j = i;
            for (; j < a.size() && a[j].method == a[i].method && a[j].snr_db == a[i].snr_db; ++j)
            {
                va.push_back(a[j].nmse_db);
                vb.push_back(b[j].nmse_db);
                diff.push_back(b[j].nmse_db - a[j].nmse_db);
            }
            const auto n = static_cast<Index>(va.size());
            const double ma = mean_db(va);
            const double mb = mean_db(vb);
            out.push_back({"base", a[i].method, a[i].snr_db, n, ma, std_db(va)});
            out.push_back({"shifted", a[i].method, a[i].snr_db, n, mb, std_db(vb)});
            out.push_back({"delta", a[i].method, a[i].snr_db, n, mb - ma, std_db(diff)});
            i = j;
        }
        return out;
    }

    GridSearchResult gridsearch(const std::vector<double> &lambdas, const std::vector<double> &betas,
                                const ExperimentConfig &cfg, const Environment &env)
    {
        if (lambdas.empty() || betas.empty())
            throw std::invalid_argument("gridsearch: empty lambda or beta grid");
        std::vector<double> ls = lambdas;
        std::vector<double> bs = betas;
        std::sort(ls.begin(), ls.end());
        ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
        std::sort(bs.begin(), bs.end());
        bs.erase(std::unique(bs.begin(), bs.end()), bs.end());

        ExperimentConfig c = cfg;
        c.channel_source = ChannelSource::hpsm;
        const auto cells = make_cells(c, {c.pilots.alpha});
        const std::size_t n_l = ls.size();
        const std::size_t n_b = bs.size();
        const std::size_t n_t = static_cast<std::size_t>(c.trials);
        // nmse[((cell * n_l + l) * n_b + b) * n_t + trial]
        std::vector<double> nmse(cells.size() * n_l * n_b * n_t);
        parallel_trials(c, [&](Index trial) {
            for (const auto &cell : cells)
            {
                const Trial t = make_trial(c, env, trial, cell.index, cell.snr_db, cell.m_t, cell.m_r);
                const ConsistencyProjector projector(t.m.phi);
                for (std::size_t l = 0; l < n_l; ++l)
                    for (std::size_t b = 0; b < n_b; ++b)
                    {
                        ExperimentConfig point = c;
                        point.solver.lambda = ls[l];
                        point.solver.beta = bs[b];
                        const CVec est =
                            run_method(point, env, c.gridsearch_method, t, projector, c.solver.steps, cell.index);
                        const std::size_t at =
                            ((static_cast<std::size_t>(cell.index) * n_l + l) * n_b + b) * n_t +
                            static_cast<std::size_t>(trial);
                        nmse[at] = nmse_db(t.h, est);
                    }
            }
        });

        GridSearchResult res;
        for (const auto &cell : cells)
        {
            GridRow best;
            bool have = false;
            for (std::size_t l = 0; l < n_l; ++l)
                for (std::size_t b = 0; b < n_b; ++b)
                {
                    const std::size_t at = ((static_cast<std::size_t>(cell.index) * n_l + l) * n_b + b) * n_t;
                    const std::vector<double> v(nmse.begin() + static_cast<std::ptrdiff_t>(at),
                                                nmse.begin() + static_cast<std::ptrdiff_t>(at + n_t));
                    const GridRow row{ls[l], bs[b], cell.snr_db, c.trials, mean_db(v)};
                    res.surface.push_back(row);
                    if (!have || row.mean_nmse_db < best.mean_nmse_db)
                    {
                        best = row;
                        have = true;
                    }
                }
            res.best.push_back(best);
        }
        return res;
    }
}
