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
// Acceptance checks; `pnpce_acceptance N` runs criterion N, no argument runs all of them.
// Each criterion prints one "criterion N: PASS|FAIL" line with the measured values and appends it to
// acceptance_results.txt in the working directory.

#include "pnpce/channel.hpp"
#include "pnpce/dataset.hpp"
#include "pnpce/diffusion.hpp"
#include "pnpce/geometry.hpp"
#include "pnpce/harness/config.hpp"
#include "pnpce/harness/experiments.hpp"
#include "pnpce/measurement.hpp"
#include "pnpce/network.hpp"
#include "pnpce/solver.hpp"

#include <Eigen/Cholesky>
#include <unsupported/Eigen/KroneckerProduct>

#include <sys/wait.h>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

using namespace pnpce;
using namespace pnpce::harness;
namespace fs = std::filesystem;

namespace
{
    using Clock = std::chrono::steady_clock;

    // Training budget of the posterior-mean check
    constexpr Index c3_train_samples = 8192;
    constexpr Index c3_epochs = 20;

    struct Outcome
    {
        bool pass = false;
        std::string detail;
    };

    std::string fmt(const char *spec, double v)
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, spec, v);
        return buf;
    }

    std::string db(double v) { return fmt("%.2f", v) + " dB"; }

    double elapsed(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

    std::string timing(double seconds, double budget)
    {
        return fmt("%.1f", seconds) + " s (budget " + fmt("%.0f", budget) + " s)";
    }

    int run_cli(const std::string &args)
    {
        const std::string cmd = std::string(PNPCE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string slurp(const fs::path &p)
    {
        std::ifstream is(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(is), {});
    }

    double mean_of(const std::vector<SummaryRow> &rows, const std::string &method, double snr, double alpha = -1.0,
                   Index k = -1)
    {
        for (const auto &r : rows)
            if (r.method == method && r.snr_db == snr && (alpha < 0.0 || r.alpha == alpha) && (k < 0 || r.k == k))
                return r.mean_nmse_db;
        throw std::runtime_error("no summary row for " + method);
    }

    CVec vec(const CMat &m) { return Eigen::Map<const CVec>(m.data(), m.size()); }

    // Desk preset with test channels drawn from the Gaussian fitted on the training split
    ExperimentConfig gaussian_desk(std::uint64_t seed)
    {
        ExperimentConfig cfg;
        cfg.seed = seed;
        cfg.samples = 2276;
        cfg.channel_source = ChannelSource::gaussian;
        cfg.mmse_colored_noise = true;
        cfg.pilots.alpha = 0.8;
        cfg.trials = 200;
        cfg.solver.steps = 100;
        cfg.arch.rows = cfg.array.n_r;
        cfg.arch.cols = cfg.array.n_t;
        return cfg;
    }

    std::shared_ptr<Environment> environment_for(const ExperimentConfig &cfg)
    {
        const Dataset data = generate_dataset(cfg.array, cfg.scenario, cfg.seed, cfg.samples);
        return make_environment(cfg, data, std::nullopt);
    }

    // Steering norm, codebook unitarity, hybrid-to-planar reduction, vec identity, NMSE cases,
    // then the geometry, channel and measurement unit suites
    Outcome criterion_1()
    {
        const auto t0 = Clock::now();
        Rng rng(101);

        double steer = 0.0;
        for (int i = 0; i < 500; ++i)
        {
            const double th = uniform(rng, -std::numbers::pi, std::numbers::pi);
            const double ph = uniform(rng, -std::numbers::pi / 2, std::numbers::pi / 2);
            const Index nx = 1 + static_cast<Index>(uniform_index(rng, 16));
            const Index nz = 1 + static_cast<Index>(uniform_index(rng, 16));
            steer = std::max(steer, std::abs(upa_steering<double>(th, ph, nx, nz).norm() - 1.0));
        }

        double unitary = 0.0;
        for (const char *name : {"desk", "mmwave", "thz"})
        {
            const CodebookPair cb = make_codebooks(array_preset(name));
            unitary = std::max({unitary, unitarity_error(cb.rx.matrix), unitarity_error(cb.tx.matrix)});
        }

        // With one subarray per side the hybrid model is the planar model; with several, each block is
        const ArrayConfig single{8, 4, 1, 1, 1, 1, {4, 2}, {2, 2}};
        const ArrayConfig desk = array_preset("desk");
        ScenarioSpec spec;
        spec.min_paths = 1;
        spec.max_paths = 5;
        double reduce = 0.0;
        for (int i = 0; i < 50; ++i)
        {
            const PathParams p1 = sample_scenario(rng, spec, single);
            reduce = std::max(reduce, (hpsm_channel(p1, single) - pwm_channel(p1, single)).cwiseAbs().maxCoeff());

            const PathParams p = sample_scenario(rng, spec, desk);
            const CMat h = hpsm_channel(p, desk);
            ArrayConfig sub = desk;
            sub.n_t = desk.tx_per_subarray();
            sub.n_r = desk.rx_per_subarray();
            sub.k_t = sub.k_r = 1;
            sub.l_t = sub.l_r = 1;
            for (Index kt = 0; kt < desk.k_t; ++kt)
                for (Index kr = 0; kr < desk.k_r; ++kr)
                {
                    const CMat block = h.block(kr * sub.n_r, kt * sub.n_t, sub.n_r, sub.n_t);
                    reduce = std::max(reduce, (block - pwm_channel(p.pair(kt, kr), sub)).cwiseAbs().maxCoeff());
                }
        }

        // Phi vec(H_b) against vec(W^H A_R H_b A_T^H P) and against the explicit Kronecker product
        const CodebookPair cb = make_codebooks(desk);
        double vec_err = 0.0;
        for (int i = 0; i < 10; ++i)
        {
            const Index m_t = 1 + static_cast<Index>(uniform_index(rng, 32));
            const Index m_r = 1 + static_cast<Index>(uniform_index(rng, 4));
            const PilotPlan plan = sample_pilot_plan(rng, desk, m_t, m_r, 4);
            const CMat phi = build_measurement_matrix(plan, cb);
            CMat hb(desk.n_r, desk.n_t);
            for (Index k = 0; k < hb.size(); ++k)
                hb(k) = complex_normal(rng);
            const CMat direct = plan.w.adjoint() * cb.rx.matrix * hb * cb.tx.matrix.adjoint() * plan.p;
            const CMat kron = Eigen::kroneckerProduct((cb.tx.matrix.adjoint() * plan.p).transpose().eval(),
                                                      (plan.w.adjoint() * cb.rx.matrix).eval());
            const double scale = std::max(1.0, direct.cwiseAbs().maxCoeff());
            vec_err = std::max({vec_err, (phi * vec(hb) - vec(direct)).cwiseAbs().maxCoeff() / scale,
                                (apply_measurement(plan, cb, hb) - vec(direct)).cwiseAbs().maxCoeff() / scale,
                                (phi - kron).cwiseAbs().maxCoeff()});
        }

        // 10 log10(|h - h_hat|^2 / |h|^2) on hand-computable cases
        CVec h(4);
        h << cd(1, 0), cd(0, 2), cd(-1, 1), cd(0.5, -0.5);
        double nmse_err = 0.0;
        nmse_err = std::max(nmse_err, std::abs(nmse_db(h, CVec::Zero(4)) - 0.0));
        nmse_err = std::max(nmse_err, std::abs(nmse_db(h, 0.9 * h) - (-20.0)));
        nmse_err = std::max(nmse_err, std::abs(nmse_db(h, 1.1 * h) - (-20.0)));
        nmse_err = std::max(nmse_err, std::abs(nmse_db(h, -h) - 10.0 * std::log10(4.0)));
        nmse_err = std::max(nmse_err, std::abs(nmse_db(h, h) - nmse_floor_db));

        const std::string cmd = std::string(PNPCE_TESTS_PATH) + " --test-suite=geometry,channel,measurement >/dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        const bool unit_ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;

        const double tol = 1e-8;
        const double t = elapsed(t0);
        Outcome o;
        o.pass = steer <= tol && unitary <= tol && reduce <= tol && vec_err <= tol && nmse_err <= tol && unit_ok &&
                 t < 10.0;
        o.detail = "steering " + fmt("%.1e", steer) + ", unitarity " + fmt("%.1e", unitary) + ", hybrid->planar " +
                   fmt("%.1e", reduce) + ", vec/kron " + fmt("%.1e", vec_err) + ", nmse " + fmt("%.1e", nmse_err) +
                   " (tol 1e-8); unit suites " + (unit_ok ? "ok" : "FAILED") + "; " + timing(t, 10.0);
        return o;
    }

    // Every parameter tensor probed against central differences of the loss
    Outcome criterion_2()
    {
        const auto t0 = Clock::now();
        const DenoiserArch arch;
        Rng rng(202);
        RVec theta = init_parameters<double>(arch, rng);
        const ParamLayout lay = ParamLayout::of(arch);

        // The last decoder layer starts at zero, which would hide most of the backward pass
        std::normal_distribution<double> n01(0.0, 1.0);
        for (const auto *s : {&lay.dec_w[3], &lay.dec_b[3], &lay.pos})
            for (Index i = 0; i < s->size; ++i)
                theta(s->offset + i) = 0.05 * n01(rng);

        const Index batch = 2;
        CMat clean(arch.pixels(), batch);
        CMat noisy(arch.pixels(), batch);
        for (Index k = 0; k < clean.size(); ++k)
        {
            clean(k) = complex_normal(rng);
            noisy(k) = clean(k) + 0.7 * complex_normal(rng);
        }
        const RMat x = to_grid<double>(noisy);
        const RMat target = to_grid<double>(clean);
        RVec sigma(batch);
        sigma << 0.3, 1.7;

        RVec grad;
        denoiser_loss_and_gradient<double>(arch, theta, x, sigma, target, grad);
        RVec unused;
        const auto loss = [&](const RVec &th) { return denoiser_loss_and_gradient<double>(arch, th, x, sigma, target, unused); };

        std::vector<ParamLayout::Slot> slots{lay.embed1_w, lay.embed1_b, lay.embed2_w, lay.embed2_b};
        for (int l = 0; l < 4; ++l)
        {
            slots.push_back(lay.enc_w[l]);
            slots.push_back(lay.enc_b[l]);
        }
        for (int l = 0; l < 4; ++l)
        {
            slots.push_back(lay.dec_w[l]);
            slots.push_back(lay.dec_b[l]);
        }
        slots.push_back(lay.pos);

        const int probes = 50;
        double worst = 0.0;
        for (int p = 0; p < probes; ++p)
        {
            const auto &s = slots[static_cast<std::size_t>(p) % slots.size()];
            const Index i = s.offset + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(s.size)));
            const double eps = 1e-5 * std::max(1.0, std::abs(theta(i)));
            RVec th = theta;
            th(i) = theta(i) + eps;
            const double up = loss(th);
            th(i) = theta(i) - eps;
            const double down = loss(th);
            const double fd = (up - down) / (2.0 * eps);
            const double rel = std::abs(fd - grad(i)) / std::max({std::abs(fd), std::abs(grad(i)), 1e-8});
            worst = std::max(worst, rel);
        }

        const double t = elapsed(t0);
        Outcome o;
        o.pass = worst < 1e-4 && t < 60.0;
        o.detail = "max relative error " + fmt("%.2e", worst) + " over " + std::to_string(probes) + " probes, " +
                   std::to_string(parameter_count(arch)) + " parameters (tol 1e-4); " + timing(t, 60.0);
        return o;
    }

    // Locally correlated, heteroscedastic covariance on a rows x cols grid, pixel p = col * rows + row
    CMat grid_covariance(Index rows, Index cols, double length, Rng &rng)
    {
        const Index n = rows * cols;
        RVec v(n);
        for (Index p = 0; p < n; ++p)
            v(p) = std::exp(uniform(rng, std::log(0.25), 0.0));
        CMat s(n, n);
        for (Index a = 0; a < n; ++a)
            for (Index b = 0; b < n; ++b)
            {
                const double dr = static_cast<double>(a % rows - b % rows);
                const double dc = static_cast<double>(a / rows - b / rows);
                s(a, b) = std::sqrt(v(a) * v(b)) * std::exp(-(dr * dr + dc * dc) / (2.0 * length * length));
            }
        s.diagonal().array() += 1e-3;
        return s;
    }

    CMat gaussian_draws(const CMat &chol, Index count, Rng &rng)
    {
        CMat w(chol.rows(), count);
        for (Index k = 0; k < w.size(); ++k)
            w(k) = complex_normal(rng);
        return chol * w;
    }

    // Denoiser trained on CN(0, Sigma) samples against the exact posterior mean
    Outcome criterion_3()
    {
        const auto t0 = Clock::now();
        Rng rng(303);
        DenoiserArch arch;
        arch.rows = 8;
        arch.cols = 16;
        const CMat sigma_cov = grid_covariance(arch.rows, arch.cols, 1.5, rng);
        const CMat chol = sigma_cov.llt().matrixL();
        const CMat train_set = gaussian_draws(chol, c3_train_samples, rng);
        const CMat test_set = gaussian_draws(chol, 512, rng);

        TrainConfig tc;
        tc.epochs = c3_epochs;
        tc.batch_size = 32;
        tc.learning_rate = 1e-3;
        tc.ema_rate = 0.999;
        tc.seed = 3303;
        const TrainResult res = train(train_set, test_set, arch, tc);
        const DenoiserModel &model = res.model;
        const GaussianScore exact(CVec::Zero(arch.pixels()), sigma_cov);

        const CMat eval = gaussian_draws(chol, 500, rng);
        CMat noise(eval.rows(), eval.cols());
        for (Index k = 0; k < noise.size(); ++k)
            noise(k) = complex_normal(rng);

        // Normalized squared distance to the posterior mean, and the same for the identity map
        const auto error_at = [&](double s, double &identity)
        {
            const CMat h_t = eval + s * noise;
            const CMat d = denoise(model, h_t, RVec::Constant(eval.cols(), s));
            double num = 0.0, den = 0.0, id = 0.0;
            for (Index j = 0; j < eval.cols(); ++j)
            {
                const CVec pm = exact.posterior_mean(h_t.col(j), s);
                num += (d.col(j) - pm).squaredNorm();
                id += (h_t.col(j) - pm).squaredNorm();
                den += pm.squaredNorm();
            }
            identity = id / den;
            return num / den;
        };

        const double mid = 0.5 * (model.sigma_min + model.sigma_max);
        const double geo = std::sqrt(model.sigma_min * model.sigma_max);
        double id_mid = 0.0, id_geo = 0.0;
        const double e_mid = error_at(mid, id_mid);
        const double e_geo = error_at(geo, id_geo);

        const double t = elapsed(t0);
        Outcome o;
        o.pass = e_mid < 0.05 && t < 900.0;
        o.detail = "error at sigma " + fmt("%.3f", mid) + " (mid-range) " + fmt("%.4f", e_mid) + " (tol 0.05, identity " +
                   fmt("%.3f", id_mid) + "); at sigma " + fmt("%.3f", geo) + " (geometric mid) " +
                   fmt("%.4f", e_geo) + " (identity " + fmt("%.4f", id_geo) + "); " +
                   std::to_string(res.history.size()) + " epochs on " + std::to_string(c3_train_samples) +
                   " samples; " + timing(t, 900.0);
        return o;
    }

    // Exact Gaussian score inside the solver versus the MMSE and LS estimators
    Outcome criterion_4()
    {
        const auto t0 = Clock::now();
        ExperimentConfig cfg = gaussian_desk(404);
        cfg.snr_db = {10.0};
        cfg.methods = {"ls", "mmse", "diffpace-oracle"};
        const auto env = environment_for(cfg);
        const auto sum = summarize(run_snr_sweep(cfg, *env));
        const double ls = mean_of(sum, "ls", 10.0);
        const double mmse = mean_of(sum, "mmse", 10.0);
        const double dp = mean_of(sum, "diffpace-oracle", 10.0);

        const double t = elapsed(t0);
        Outcome o;
        o.pass = dp - mmse <= 3.0 && ls - dp >= 3.0 && t < 300.0;
        o.detail = "DiffPace " + db(dp) + ", MMSE " + db(mmse) + ", LS " + db(ls) + "; gap to MMSE " + db(dp - mmse) +
                   " (max 3), gain over LS " + db(ls - dp) + " (min 3); " + std::to_string(cfg.trials) + " trials; " +
                   timing(t, 300.0);
        return o;
    }

    // |y - Phi project(z)| = |1 - rho| |y - Phi z| on random Gaussian and measurement matrices
    Outcome criterion_5()
    {
        const auto t0 = Clock::now();
        Rng rng(505);
        const ArrayConfig desk = array_preset("desk");
        const CodebookPair cb = make_codebooks(desk);
        double worst = 0.0;
        double worst_rel = 0.0;
        for (int i = 0; i < 100; ++i)
        {
            CMat phi;
            if (i % 20 == 19)
            {
                const PilotPlan plan = sample_pilot_plan(rng, desk, 8 + static_cast<Index>(uniform_index(rng, 24)), 4, 4);
                phi = build_measurement_matrix(plan, cb);
            }
            else
            {
                const Index m = 8 + static_cast<Index>(uniform_index(rng, 89));
                const Index n = m + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(m + 33)));
                phi.resize(m, n);
                for (Index k = 0; k < phi.size(); ++k)
                    phi(k) = complex_normal(rng);
            }
            const CVec z = complex_normal_vector(rng, phi.cols());
            const CVec y = complex_normal_vector(rng, phi.rows());
            const double rho = i % 10 == 0 ? 1.0 : uniform(rng, 0.0, 2.0);
            const ConsistencyProjector proj(phi);
            const double before = (y - phi * z).norm();
            const double after = (y - phi * proj.project(z, y, rho)).norm();
            const double err = std::abs(after - std::abs(1.0 - rho) * before);
            worst = std::max(worst, err);
            worst_rel = std::max(worst_rel, err / before);
        }

        const double t = elapsed(t0);
        Outcome o;
        o.pass = worst <= 1e-8 && t < 5.0;
        o.detail = "max deviation " + fmt("%.2e", worst) + " (relative " + fmt("%.2e", worst_rel) +
                   ") over 100 instances (tol 1e-8); " + timing(t, 5.0);
        return o;
    }

    // K = 20 against K = 100 with the exact score
    Outcome criterion_6()
    {
        const auto t0 = Clock::now();
        ExperimentConfig cfg = gaussian_desk(606);
        cfg.snr_db = {0.0, 10.0, 20.0};
        cfg.methods = {"diffpace-oracle"};
        const auto env = environment_for(cfg);
        const auto sum = summarize(run_step_sweep(cfg, *env, {20, 100}));

        bool ok = true;
        std::string parts;
        for (double snr : cfg.snr_db)
        {
            const double k20 = mean_of(sum, "diffpace-oracle", snr, -1.0, 20);
            const double k100 = mean_of(sum, "diffpace-oracle", snr, -1.0, 100);
            ok = ok && k20 - k100 < 3.0;
            parts += "SNR " + fmt("%.0f", snr) + ": K=20 " + db(k20) + " vs K=100 " + db(k100) + "; ";
        }

        const double t = elapsed(t0);
        Outcome o;
        o.pass = ok && t < 600.0;
        o.detail = parts + "max degradation 3 dB; " + timing(t, 600.0);
        return o;
    }

    // Mean NMSE across pilot ratios with the exact score
    Outcome criterion_7()
    {
        const auto t0 = Clock::now();
        ExperimentConfig cfg = gaussian_desk(707);
        cfg.snr_db = {10.0};
        cfg.methods = {"diffpace-oracle"};
        const auto env = environment_for(cfg);
        auto sum = summarize(run_alpha_sweep(cfg, *env, {0.2, 0.4, 0.6, 0.8, 1.0}));
        std::sort(sum.begin(), sum.end(), [](const SummaryRow &a, const SummaryRow &b) { return a.alpha < b.alpha; });

        bool ok = sum.size() == 5;
        std::string parts;
        for (std::size_t i = 0; i < sum.size(); ++i)
        {
            if (i > 0)
                ok = ok && sum[i].mean_nmse_db <= sum[i - 1].mean_nmse_db + 0.5;
            parts += "alpha " + fmt("%.3f", sum[i].alpha) + " " + db(sum[i].mean_nmse_db) + "; ";
        }

        const double t = elapsed(t0);
        Outcome o;
        o.pass = ok && t < 600.0;
        o.detail = parts + "slack 0.5 dB; " + timing(t, 600.0);
        return o;
    }

    // Train on the desk dataset, then compare against OMP and LS on the held-out channels
    Outcome criterion_8()
    {
        const auto t0 = Clock::now();
        ExperimentConfig cfg = load_config(fs::path(PNPCE_SOURCE_DIR) / "configs" / "desk.yaml");
        cfg.methods = {"ls", "omp", "diffpace"};
        const Dataset data = generate_dataset(cfg.array, cfg.scenario, cfg.seed, cfg.samples);
        const Split split = split_indices(data.samples.size(), cfg.train_fraction, cfg.split_seed);
        cfg.trials = static_cast<Index>(split.test.size());
        const TrainResult res =
            train(stack_samples(data, split.train), stack_samples(data, split.test), cfg.arch, cfg.training);
        const double t_train = elapsed(t0);
        const auto env = make_environment(cfg, data, res.model);
        const auto sum = summarize(run_snr_sweep(cfg, *env));

        bool ok = true;
        std::string parts;
        for (double snr : cfg.snr_db)
        {
            const double ls = mean_of(sum, "ls", snr);
            const double omp = mean_of(sum, "omp", snr);
            const double dp = mean_of(sum, "diffpace", snr);
            ok = ok && dp <= omp - 2.0 && dp <= ls - 2.0;
            parts += "SNR " + fmt("%.0f", snr) + ": DiffPace " + db(dp) + ", OMP " + db(omp) + ", LS " + db(ls) + "; ";
        }

        const double t = elapsed(t0);
        Outcome o;
        o.pass = ok && t < 3600.0;
        o.detail = parts + "margin 2 dB; " + std::to_string(split.train.size()) + " training samples, " +
                   std::to_string(res.history.size()) + " epochs (" + fmt("%.0f", t_train) + " s), " +
                   std::to_string(cfg.trials) + " trials; " + timing(t, 3600.0);
        return o;
    }

    const char *rerun_config = R"(seed: 9
trials: 3
array:
  preset: custom
  n_t: 8
  n_r: 4
  k_t: 2
  k_r: 1
  l_t: 2
  l_r: 2
  tx_subarray: [2, 2]
  rx_subarray: [2, 2]
dataset:
  samples: 40
pilots:
  alpha: 0.5
snr_db: [0, 10]
methods: [ls, omp, amp, mmse, diffpace, diffpace-oracle]
solver:
  steps: 10
sweep:
  steps: [5, 10]
  alpha: [0.5, 1.0]
gridsearch:
  lambda: [0.1, 0.3]
  beta: [0.1]
training:
  epochs: 2
  batch_size: 8
  width: 4
  embed_freqs: 4
  embed_width: 8
)";

    std::map<std::string, std::string> tree(const fs::path &root)
    {
        std::map<std::string, std::string> files;
        for (const auto &e : fs::recursive_directory_iterator(root))
            if (e.is_regular_file())
                files[fs::relative(e.path(), root).string()] = slurp(e.path());
        return files;
    }

    // Every subcommand twice into separate directories; the trees must match byte for byte
    Outcome criterion_9()
    {
        const auto t0 = Clock::now();
        const fs::path dir = fs::temp_directory_path() / "pnpce_acceptance_rerun";
        fs::remove_all(dir);
        fs::create_directories(dir);
        std::ofstream(dir / "c.yaml") << rerun_config;
        const std::string cfg = " --config " + (dir / "c.yaml").string();

        const std::vector<std::string> commands{"gen-dataset", "train",          "estimate --trial 1",
                                                "benchmark",   "sweep --over steps", "sweep --over alpha",
                                                "sweep --over shift", "gridsearch"};
        int failures = 0;
        for (const char *run : {"a", "b"})
            for (const auto &c : commands)
                if (run_cli(c + cfg + " --out " + (dir / run).string()) != 0)
                    ++failures;

        const auto a = tree(dir / "a");
        const auto b = tree(dir / "b");
        int differing = 0;
        for (const auto &[name, bytes] : a)
        {
            const auto it = b.find(name);
            if (it == b.end() || it->second != bytes || bytes.empty())
                ++differing;
        }
        if (a.size() != b.size())
            ++differing;
        fs::remove_all(dir);

        const double t = elapsed(t0);
        Outcome o;
        o.pass = failures == 0 && differing == 0 && !a.empty();
        o.detail = std::to_string(commands.size()) + " subcommands x 2 runs, " + std::to_string(failures) +
                   " failed; " + std::to_string(a.size()) + " files compared, " + std::to_string(differing) +
                   " differ; " + fmt("%.1f", t) + " s";
        return o;
    }
}

int main(int argc, char **argv)
{
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    const std::vector<std::function<Outcome()>> criteria{criterion_1, criterion_2, criterion_3,
                                                         criterion_4, criterion_5, criterion_6,
                                                         criterion_7, criterion_8, criterion_9};
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i)
    {
        const int c = std::atoi(argv[i]);
        if (c < 1 || c > static_cast<int>(criteria.size()))
        {
            std::fprintf(stderr, "usage: %s [criterion 1-9 ...]\n", argv[0]);
            return 2;
        }
        selected.push_back(c);
    }
    if (selected.empty())
        for (int c = 1; c <= static_cast<int>(criteria.size()); ++c)
            selected.push_back(c);

    bool all = true;
    for (int c : selected)
    {
        Outcome o;
        try
        {
            o = criteria[static_cast<std::size_t>(c - 1)]();
        }
        catch (const std::exception &e)
        {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        const std::string line =
            "criterion " + std::to_string(c) + ": " + (o.pass ? "PASS" : "FAIL") + " " + o.detail + "\n";
        std::fputs(line.c_str(), stdout);
        std::fflush(stdout);
        // ctest hides the output of passing tests
        std::ofstream("acceptance_results.txt", std::ios::app) << line;
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
