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
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace pnpce;
using pnpce::test::max_abs_diff;
using pnpce::test::random_cmat;
using pnpce::test::random_psd;

namespace
{
    DenoiserArch tiny_arch()
    {
        DenoiserArch a;
        a.rows = 4;
        a.cols = 6;
        a.width = 4;
        a.embed_freqs = 4;
        a.embed_width = 8;
        return a;
    }

    // Samples on a random two-dimensional complex subspace
    CMat low_rank_samples(Rng &rng, Index dim, Index count)
    {
        const CMat basis = random_cmat(rng, dim, 2);
        return basis * random_cmat(rng, 2, count);
    }
}

TEST_SUITE("diffusion")
{
    TEST_CASE("schedule endpoints and spacing")
    {
        const NoiseSchedule s1 = make_schedule(1, 0.01, 2.0);
        CHECK(s1.sigmas == std::vector<double>{2.0, 0.0});
        const NoiseSchedule s2 = make_schedule(2, 0.01, 2.0);
        CHECK(s2.sigmas == std::vector<double>{2.0, 0.01, 0.0});
        const NoiseSchedule s = make_schedule(100, 0.01, 2.0);
        CHECK(s.steps() == 100);
        CHECK(s.at(100) == 2.0);
        CHECK(s.at(1) == 0.01);
        CHECK(s.at(0) == 0.0);
        const double r = s.at(2) / s.at(1);
        for (Index i = 2; i < 100; ++i)
            CHECK(s.at(i + 1) / s.at(i) == doctest::Approx(r).epsilon(1e-12));
        CHECK_THROWS_AS(make_schedule(0, 0.01, 2.0), std::invalid_argument);
        CHECK_THROWS_AS(make_schedule(10, 2.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(s.at(101), std::invalid_argument);
        NoiseSchedule bad{{1.0, 2.0, 0.0}};
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    }

    TEST_CASE("training levels ascend geometrically")
    {
        const auto lv = training_levels(5, 0.1, 10.0);
        REQUIRE(lv.size() == 5);
        CHECK(lv.front() == 0.1);
        CHECK(lv.back() == 10.0);
        for (std::size_t i = 1; i < lv.size(); ++i)
            CHECK(lv[i] / lv[i - 1] == doctest::Approx(std::sqrt(10.0)).epsilon(1e-12));
        CHECK(training_levels(1, 0.1, 10.0) == std::vector<double>{10.0});
    }

    TEST_CASE("perturbation")
    {
        Rng rng(3);
        const CVec h = complex_normal_vector(rng, 64);
        CHECK(max_abs_diff(perturb(h, 0.0, rng), h) == 0.0);
        Rng a(9), b(9);
        CHECK(max_abs_diff(perturb(h, 0.5, a), perturb(h, 0.5, b)) == 0.0);
        double energy = 0.0;
        const int trials = 2000;
        for (int t = 0; t < trials; ++t)
            energy += (perturb(h, 0.5, rng) - h).squaredNorm();
        CHECK(energy / trials == doctest::Approx(0.25 * 64).epsilon(0.03));
        CHECK_THROWS_AS(perturb(h, -1.0, rng), std::invalid_argument);
    }

    TEST_CASE("freshly initialized model has near-zero score")
    {
        DenoiserModel m = DenoiserModel::initialize(tiny_arch(), 5);
        Rng rng(1);
        const CVec h = complex_normal_vector(rng, 24);
        CHECK(score_from_denoiser(m, h, 0.7).cwiseAbs().maxCoeff() < 1e-12);
        CHECK_THROWS_AS(score_from_denoiser(m, h, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(denoise(m, h, 10.0 * m.sigma_max), std::invalid_argument);
    }

    TEST_CASE("denoiser output rescales with the data scale")
    {
        DenoiserModel m = DenoiserModel::initialize(tiny_arch(), 5);
        for (Index i = 0; i < m.theta_ema.size(); ++i)
            m.theta_ema(i) = 0.05 * std::sin(0.37 * static_cast<double>(i) + 0.1);
        Rng rng(2);
        const CVec h = complex_normal_vector(rng, 24);
        DenoiserModel scaled = m;
        scaled.data_scale = 4.0;
        scaled.sigma_max = 4.0 * m.sigma_max;
        CHECK(max_abs_diff(denoise(scaled, CVec(4.0 * h), 2.0), CVec(4.0 * denoise(m, h, 0.5))) < 1e-12);
    }

    TEST_CASE("point-mass score")
    {
        Rng rng(4);
        const CVec h0 = complex_normal_vector(rng, 10);
        const CVec ht = complex_normal_vector(rng, 10);
        const PointMassScore s(h0);
        CHECK(max_abs_diff(s.score(ht, 0.5), CVec(-(ht - h0) / 0.25)) < 1e-14);
        CHECK_THROWS_AS(s.score(ht, 0.0), std::invalid_argument);
    }

    TEST_CASE("initial training loss equals the injected noise energy")
    {
        const DenoiserArch a = tiny_arch();
        Rng rng(6);
        RVec theta = init_parameters<double>(a, rng);
        const CMat batch = random_cmat(rng, 24, 64);
        AdamOptimizer adam;
        const double loss = train_step(a, theta, batch, {0.8}, rng, adam);
        CHECK(loss == doctest::Approx(0.64 * 24).epsilon(0.2));
        CHECK(adam.step == 1);
    }

    TEST_CASE("Adam first step moves every coordinate by the learning rate")
    {
        AdamOptimizer adam;
        adam.learning_rate = 0.01;
        RVec theta = RVec::Zero(3);
        RVec g(3);
        g << 2.0, -0.5, 1e-3;
        adam.apply(theta, g);
        CHECK(theta(0) == doctest::Approx(-0.01).epsilon(1e-6));
        CHECK(theta(1) == doctest::Approx(0.01).epsilon(1e-6));
        CHECK(theta(2) == doctest::Approx(-0.01).epsilon(1e-4));
        CHECK_THROWS_AS(adam.apply(theta, RVec::Zero(2)), std::invalid_argument);
    }

    TEST_CASE("EMA update")
    {
        RVec e(2), t(2);
        e << 1.0, 2.0;
        t << 3.0, -2.0;
        ema_update(e, t, 0.75);
        CHECK(e(0) == doctest::Approx(1.5));
        CHECK(e(1) == doctest::Approx(1.0));
        ema_update(e, t, 0.0);
        CHECK(max_abs_diff(e, t) == 0.0);
        CHECK_THROWS_AS(ema_update(e, t, 1.0), std::invalid_argument);
    }

    TEST_CASE("Gaussian exact score")
    {
        Rng rng(7);
        const Index n = 6;
        const CVec mu = complex_normal_vector(rng, n);
        const CVec ht = complex_normal_vector(rng, n);
        CHECK(max_abs_diff(gaussian_exact_score(mu, CMat::Identity(n, n), ht, 1.0), CVec(-(ht - mu) / 2.0)) < 1e-13);
        CHECK(max_abs_diff(gaussian_exact_score(mu, CMat::Zero(n, n), ht, 0.5), CVec(-(ht - mu) / 0.25)) < 1e-13);

        // Conjugate Wirtinger gradient of log CN(h; mu, Sigma + sigma^2 I) by central differences
        const CMat cov = random_psd(rng, n, 0.1);
        const double sigma = 0.4;
        const CMat c = cov + sigma * sigma * CMat::Identity(n, n);
        const Eigen::LDLT<CMat> ldlt(c);
        auto log_density = [&](const CVec &h) { return -(h - mu).dot(ldlt.solve(CVec(h - mu))).real(); };
        const CVec s = gaussian_exact_score(mu, cov, ht, sigma);
        const double eps = 1e-6;
        for (Index i = 0; i < n; ++i)
        {
            CVec p = ht, m = ht, pi = ht, mi = ht;
            p(i) += eps;
            m(i) -= eps;
            pi(i) += cd(0.0, eps);
            mi(i) -= cd(0.0, eps);
            const cd fd = 0.5 * cd((log_density(p) - log_density(m)) / (2 * eps),
                                   (log_density(pi) - log_density(mi)) / (2 * eps));
            CHECK(std::abs(fd - s(i)) < 1e-6 * std::max(1.0, std::abs(s(i))));
        }

        const GaussianScore g(mu, cov);
        CHECK(max_abs_diff(g.score(ht, sigma), s) < 1e-10);
        CHECK(max_abs_diff(g.posterior_mean(ht, sigma), CVec(ht + sigma * sigma * s)) < 1e-10);
        CHECK_THROWS_AS(gaussian_exact_score(mu, cov, CVec::Zero(3), sigma), std::invalid_argument);
    }

    TEST_CASE("training with zero epochs returns the initialization")
    {
        Rng rng(8);
        const CMat x = low_rank_samples(rng, 24, 64);
        TrainConfig cfg;
        cfg.epochs = 0;
        cfg.seed = 11;
        const TrainResult r = train(x, CMat(24, 0), tiny_arch(), cfg);
        CHECK(r.history.empty());
        CHECK(max_abs_diff(r.model.theta, DenoiserModel::initialize(tiny_arch(), 11).theta) == 0.0);
        const double rms = std::sqrt(x.squaredNorm() / (2.0 * 24 * 64));
        CHECK(r.model.data_scale == doctest::Approx(rms).epsilon(1e-12));
        CHECK(r.model.sigma_min == doctest::Approx(0.01 * std::sqrt(2.0) * rms).epsilon(1e-12));
    }

    TEST_CASE("training is deterministic and lowers the held-out loss")
    {
        Rng rng(9);
        const CMat all = low_rank_samples(rng, 24, 320);
        const CMat tr = all.leftCols(256), te = all.rightCols(64);
        TrainConfig cfg;
        cfg.epochs = 30;
        cfg.batch_size = 16;
        cfg.learning_rate = 2e-3;
        cfg.ema_rate = 0.9;
        cfg.noise_levels = 50;
        cfg.seed = 21;
        const TrainResult r1 = train(tr, te, tiny_arch(), cfg);
        const TrainResult r2 = train(tr, te, tiny_arch(), cfg);
        REQUIRE(r1.history.size() == 30);
        CHECK(max_abs_diff(r1.model.theta_ema, r2.model.theta_ema) == 0.0);
        CHECK(r1.history.back().test_loss < 0.8 * r1.history.front().test_loss);
        // The returned EMA parameters are those of the best epoch
        const auto best = std::min_element(r1.history.begin(), r1.history.end(),
                                           [](const EpochLog &a, const EpochLog &b) { return a.test_loss < b.test_loss; });
        CHECK(r1.model.epoch == best->epoch);
    }

    TEST_CASE("training input validation")
    {
        TrainConfig cfg;
        cfg.batch_size = 0;
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
        cfg = TrainConfig{};
        CHECK_THROWS_AS(train(CMat::Zero(24, 64), CMat(24, 0), tiny_arch(), cfg), std::invalid_argument);
        CHECK_THROWS_AS(train(CMat::Ones(23, 64), CMat(23, 0), tiny_arch(), cfg), std::invalid_argument);
    }

    TEST_CASE("checkpoint round trip and rejection")
    {
        DenoiserModel m = DenoiserModel::initialize(tiny_arch(), 13);
        m.theta_ema *= 0.5;
        m.data_scale = 0.7;
        m.sigma_min = 0.003;
        m.sigma_max = 2.5;
        m.epoch = 42;
        std::stringstream ss;
        write_checkpoint(ss, m);
        const std::string bytes = ss.str();
        std::istringstream in(bytes);
        const DenoiserModel r = read_checkpoint(in, tiny_arch());
        CHECK(r.arch == m.arch);
        CHECK(max_abs_diff(r.theta, m.theta) == 0.0);
        CHECK(max_abs_diff(r.theta_ema, m.theta_ema) == 0.0);
        CHECK(r.data_scale == m.data_scale);
        CHECK(r.sigma_min == m.sigma_min);
        CHECK(r.sigma_max == m.sigma_max);
        CHECK(r.seed == m.seed);
        CHECK(r.epoch == 42);

        std::stringstream again;
        write_checkpoint(again, r);
        CHECK(again.str() == bytes);

        DenoiserArch other = tiny_arch();
        other.width = 5;
        std::istringstream in2(bytes);
        CHECK_THROWS_AS(read_checkpoint(in2, other), std::runtime_error);
        std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
        CHECK_THROWS_AS(read_checkpoint(truncated), std::runtime_error);
        std::string foreign = bytes;
        foreign[0] ^= 0x5a;
        std::istringstream bad(foreign);
        CHECK_THROWS_AS(read_checkpoint(bad), std::runtime_error);
    }
}
