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

#include "pnpce/baselines.hpp"
#include "pnpce/measurement.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace pnpce;
using pnpce::test::max_abs_diff;
using pnpce::test::random_cmat;
using pnpce::test::random_psd;

namespace
{
    const cd j1(0.0, 1.0);

    CMat fixed_phi()
    {
        CMat p(3, 4);
        p << 1.0, 0.5 * j1, 0.0, 0.2,
             0.3, 1.0, -0.4 * j1, 0.0,
             0.0, 0.1, 1.0, 0.6;
        return p;
    }

    SecondOrderPrior fixed_prior()
    {
        CMat l(4, 4);
        l << 1.0, 0.0, 0.0, 0.0,
             0.5, 1.0, 0.0, 0.0,
             0.2 * j1, -0.3, 0.8, 0.0,
             0.0, 0.1, 0.4 * j1, 0.6;
        SecondOrderPrior p;
        p.mean = CVec(4);
        p.mean << 0.1, -0.2 * j1, 0.3, 0.0;
        p.covariance = l * l.adjoint();
        return p;
    }

    CVec fixed_y()
    {
        CVec y(3);
        y << cd(1.0, 0.5), -0.3, 0.2 * j1;
        return y;
    }

    CVec sparse_vector(Rng &rng, Index n, Index s)
    {
        CVec x = CVec::Zero(n);
        Index placed = 0;
        while (placed < s)
        {
            const Index i = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
            if (x(i) != cd(0.0, 0.0))
                continue;
            x(i) = complex_normal(rng);
            ++placed;
        }
        return x;
    }
}

TEST_SUITE("baselines")
{
    TEST_CASE("least squares")
    {
        Rng rng(1);
        const CMat phi = random_cmat(rng, 6, 10);
        CHECK(ls_estimate(CVec::Zero(6), phi).cwiseAbs().maxCoeff() == 0.0);

        const CMat sq = random_cmat(rng, 8, 8);
        const CVec h = complex_normal_vector(rng, 8);
        CHECK(max_abs_diff(ls_estimate(CVec(sq * h), sq), h) < 1e-10);

        // Overdetermined: the residual is no larger than at any perturbed point
        const CMat tall = random_cmat(rng, 12, 5);
        const CVec y = complex_normal_vector(rng, 12);
        const CVec x = ls_estimate(y, tall);
        const double r0 = (y - tall * x).norm();
        for (int t = 0; t < 100; ++t)
            CHECK(r0 <= (y - tall * (x + 0.01 * complex_normal_vector(rng, 5))).norm());

        CVec expected(4);
        expected << cd(0.8306389014247957, 0.7088646766810651), cd(-0.5560440977370894, -0.2460318483656763),
            cd(-0.08343111340339159, 0.017131068274127748), cd(0.23172587196183334, 0.345786860937399);
        CHECK(max_abs_diff(ls_estimate(fixed_y(), fixed_phi()), expected) < 1e-12);

        CHECK_THROWS_AS(ls_estimate(CVec::Zero(5), phi), std::invalid_argument);
        CHECK_THROWS_AS(ls_estimate(CVec::Zero(6), CMat::Zero(6, 10)), std::invalid_argument);
    }

    TEST_CASE("OMP trivial and exact recovery")
    {
        Rng rng(2);
        const CMat phi = random_cmat(rng, 16, 32);
        const CVec y = complex_normal_vector(rng, 16);
        OmpOptions none;
        CHECK(omp(y, phi, none).estimate.cwiseAbs().maxCoeff() == 0.0);

        CVec one = CVec::Zero(32);
        one(7) = cd(0.3, -1.2);
        OmpOptions o1;
        o1.max_atoms = 1;
        const OmpResult r = omp(CVec(phi * one), phi, o1);
        CHECK(r.support == std::vector<Index>{7});
        CHECK(max_abs_diff(r.estimate, one) < 1e-12);

        CHECK_THROWS_AS(omp(y, phi, OmpOptions{17, 0.0}), std::invalid_argument);
        CHECK_THROWS_AS(omp(CVec::Zero(3), phi, o1), std::invalid_argument);
    }

    TEST_CASE("OMP recovers 3-sparse vectors at 4x oversampling")
    {
        Rng rng(3);
        OmpOptions o;
        o.max_atoms = 3;
        double worst = -300.0;
        for (int t = 0; t < 50; ++t)
        {
            const CMat phi = random_cmat(rng, 32, 128);
            const CVec x = sparse_vector(rng, 128, 3);
            worst = std::max(worst, nmse_db(x, omp(CVec(phi * x), phi, o).estimate));
        }
        CHECK(worst < -60.0);
    }

    TEST_CASE("OMP stops at the residual tolerance")
    {
        Rng rng(4);
        const CMat phi = random_cmat(rng, 20, 40);
        const CVec y = complex_normal_vector(rng, 20);
        OmpOptions o;
        o.residual_tol = 0.5 * y.squaredNorm();
        const OmpResult r = omp(y, phi, o);
        CHECK(!r.support.empty());
        CHECK(static_cast<Index>(r.support.size()) < 20);
        CHECK((y - phi * r.estimate).squaredNorm() <= o.residual_tol + 1e-12);
    }

    TEST_CASE("AMP")
    {
        Rng rng(5);
        const CMat phi = random_cmat(rng, 64, 128);
        AmpOptions opt;
        CHECK(amp(CVec::Zero(64), phi, opt).estimate.cwiseAbs().maxCoeff() == 0.0);

        // One iteration from zero is a single soft threshold of the matched filter
        const CVec y = complex_normal_vector(rng, 64);
        AmpOptions one;
        one.iterations = 1;
        const RVec norms = phi.colwise().norm().transpose();
        const CMat a = phi * norms.cwiseInverse().asDiagonal();
        const double t = one.threshold_scale * y.norm() / 8.0;
        const CVec expected = norms.cwiseInverse().asDiagonal() * soft_threshold(CVec(a.adjoint() * y), t);
        const AmpResult r1 = amp(y, phi, one);
        CHECK(r1.iterations == 1);
        CHECK(max_abs_diff(r1.estimate, expected) < 1e-12);

        CHECK_THROWS_AS(amp(y, phi, AmpOptions{0, 0.0, 1.4}), std::invalid_argument);
        CHECK_THROWS_AS(amp(y, phi, AmpOptions{10, 1.0, 1.4}), std::invalid_argument);
    }

    TEST_CASE("AMP beats least squares on sparse vectors")
    {
        Rng rng(6);
        AmpOptions opt;
        double amp_db = 0.0, ls_db = 0.0;
        const int trials = 20;
        for (int t = 0; t < trials; ++t)
        {
            const CMat phi = random_cmat(rng, 64, 128);
            const CVec x = sparse_vector(rng, 128, 13);
            const CVec clean = phi * x;
            const double sigma_n = std::sqrt(clean.squaredNorm() / 64.0 / 100.0);
            const CVec y = clean + sigma_n * complex_normal_vector(rng, 64);
            const AmpResult r = amp(y, phi, opt);
            CHECK(r.status == AmpStatus::ok);
            amp_db += nmse_db(x, r.estimate) / trials;
            ls_db += nmse_db(x, ls_estimate(y, phi)) / trials;
        }
        CHECK(amp_db <= ls_db - 5.0);
    }

    TEST_CASE("soft threshold")
    {
        CVec x(3);
        x << cd(3.0, 4.0), cd(0.1, 0.0), cd(0.0, -2.0);
        const CVec s = soft_threshold(x, 1.0);
        CHECK(std::abs(s(0) - cd(2.4, 3.2)) < 1e-15);
        CHECK(s(1) == cd(0.0, 0.0));
        CHECK(std::abs(s(2) - cd(0.0, -1.0)) < 1e-15);
    }

    TEST_CASE("LMMSE against frozen values")
    {
        const SecondOrderPrior p = fixed_prior();
        CVec expected(4);
        expected << cd(0.7740997276377852, 0.6928784439407843), cd(-0.49253232843916595, -0.18846188235797587),
            cd(0.12834587372810188, 0.1935498558405213), cd(-0.056374954580191095, -0.02732510924681354);
        const MmseResult r = mmse(fixed_y(), fixed_phi(), p, 0.3);
        CHECK(!r.rank_deficient);
        CHECK(max_abs_diff(r.estimate, expected) < 1e-12);
        CHECK(mmse_trace(fixed_phi(), p.covariance, 0.3) == doctest::Approx(0.6851636877796499).epsilon(1e-12));

        const MmseResult white = mmse(fixed_y(), fixed_phi(), p, 0.3, CMat(CMat::Identity(3, 3)));
        CHECK(max_abs_diff(white.estimate, r.estimate) < 1e-13);
    }

    TEST_CASE("LMMSE limits")
    {
        Rng rng(7);
        const CMat phi = random_cmat(rng, 6, 6);
        const CVec y = complex_normal_vector(rng, 6);
        SecondOrderPrior p;
        p.mean = complex_normal_vector(rng, 6);
        p.covariance = CMat::Zero(6, 6);
        CHECK(max_abs_diff(mmse(y, phi, p, 0.5).estimate, p.mean) < 1e-14);

        p.covariance = random_psd(rng, 6, 0.1);
        CHECK(max_abs_diff(mmse(y, phi, p, 1e-7).estimate, CVec(phi.inverse() * y)) < 1e-6);
        CHECK_THROWS_AS(mmse(CVec::Zero(5), phi, p, 0.5), std::invalid_argument);
    }

    TEST_CASE("LMMSE empirical error matches the posterior trace")
    {
        Rng rng(8);
        const Index n = 8, m = 4;
        const CMat phi = random_cmat(rng, m, n);
        SecondOrderPrior p;
        p.mean = complex_normal_vector(rng, n);
        p.covariance = random_psd(rng, n, 0.05);
        const double sigma_n = 0.4;
        const Eigen::LLT<CMat> chol(p.covariance);
        const CMat l = chol.matrixL();
        double err = 0.0;
        const int trials = 10000;
        for (int t = 0; t < trials; ++t)
        {
            const CVec h = p.mean + l * complex_normal_vector(rng, n);
            const CVec y = phi * h + sigma_n * complex_normal_vector(rng, m);
            err += (mmse(y, phi, p, sigma_n).estimate - h).squaredNorm();
        }
        CHECK(err / trials == doctest::Approx(mmse_trace(phi, p.covariance, sigma_n)).epsilon(0.05));
    }

    TEST_CASE("second-order prior from samples")
    {
        Rng rng(9);
        const CMat x = random_cmat(rng, 3, 5);
        const SecondOrderPrior p = SecondOrderPrior::from_samples(x, 0.0);
        CMat cov = CMat::Zero(3, 3);
        for (Index i = 0; i < 5; ++i)
            cov += (x.col(i) - p.mean) * (x.col(i) - p.mean).adjoint();
        CHECK(max_abs_diff(p.covariance, CMat(cov / 5.0)) < 1e-14);
        CHECK_NOTHROW(p.validate());
        SecondOrderPrior bad = p;
        bad.covariance(0, 1) += 1.0;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        CHECK_THROWS_AS(SecondOrderPrior::from_samples(CMat(3, 0)), std::invalid_argument);
    }
}
