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

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pnpce
{
    CVec ls_estimate(const CVec &y, const CMat &phi)
    {
        if (phi.rows() != y.size())
            throw std::invalid_argument("ls_estimate: y has " + std::to_string(y.size()) + " entries, Phi has " +
                                        std::to_string(phi.rows()) + " rows");
        if (phi.size() == 0 || phi.cwiseAbs().maxCoeff() == 0.0)
            throw std::invalid_argument("ls_estimate: measurement matrix is zero");
        return phi.completeOrthogonalDecomposition().solve(y);
    }

    OmpResult omp(const CVec &y, const CMat &phi, const OmpOptions &opt)
    {
        const Index m = phi.rows();
        const Index n = phi.cols();
        if (y.size() != m)
            throw std::invalid_argument("omp: y and Phi disagree on the row count");
        if (opt.max_atoms < 0 || opt.max_atoms > m)
            throw std::invalid_argument("omp: sparsity must lie in [0, rows]");
        if (opt.residual_tol < 0.0)
            throw std::invalid_argument("omp: residual tolerance must be non-negative");

        OmpResult res;
        res.estimate = CVec::Zero(n);
        if (opt.max_atoms == 0 && opt.residual_tol == 0.0)
            return res;
        const Index limit = opt.max_atoms > 0 ? opt.max_atoms : m;

        const RVec col_norm = phi.colwise().norm().transpose();
        std::vector<bool> used(static_cast<std::size_t>(n), false);

        // Orthonormal basis of the selected columns, built by twice-applied Gram-Schmidt
        CMat q(m, limit);
        CMat r = CMat::Zero(limit, limit);
        CVec residual = y;
        Index k = 0;

        while (k < limit && residual.squaredNorm() > opt.residual_tol)
        {
            const CVec corr = phi.adjoint() * residual;
            Index best = -1;
            double best_val = -1.0;
            for (Index j = 0; j < n; ++j)
            {
                if (used[static_cast<std::size_t>(j)] || col_norm(j) == 0.0)
                    continue;
                const double v = std::abs(corr(j)) / col_norm(j);
                if (v > best_val) // strict: ties keep the lowest index
                {
                    best_val = v;
                    best = j;
                }
            }
            if (best < 0 || best_val == 0.0)
                break;

            CVec v = phi.col(best);
            for (int pass = 0; pass < 2; ++pass)
            {
                const CVec c = q.leftCols(k).adjoint() * v;
                v -= q.leftCols(k) * c;
                r.col(k).head(k) += c;
            }
            const double nv = v.norm();
            if (nv <= 1e-12 * col_norm(best))
            {
                r.col(k).head(k).setZero();
                break; // remaining columns are numerically in the span
            }
            r(k, k) = nv;
            q.col(k) = v / nv;
            used[static_cast<std::size_t>(best)] = true;
            res.support.push_back(best);
            residual -= q.col(k) * (q.col(k).adjoint() * residual);
            ++k;
        }

        if (k > 0)
        {
            const CVec b = q.leftCols(k).adjoint() * y;
            const CVec coef = r.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(b);
            for (Index i = 0; i < k; ++i)
                res.estimate(res.support[static_cast<std::size_t>(i)]) = coef(i);
        }
        return res;
    }

    CVec soft_threshold(const CVec &x, double t)
    {
        CVec out(x.size());
        for (Index i = 0; i < x.size(); ++i)
        {
            const double a = std::abs(x(i));
            out(i) = a > t ? x(i) * ((a - t) / a) : cd(0.0, 0.0);
        }
        return out;
    }

    AmpResult amp(const CVec &y, const CMat &phi, const AmpOptions &opt)
    {
        if (opt.iterations < 1)
            throw std::invalid_argument("amp: iterations must be at least 1");
        if (!(opt.damping >= 0.0 && opt.damping < 1.0))
            throw std::invalid_argument("amp: damping must lie in [0, 1)");
        if (y.size() != phi.rows())
            throw std::invalid_argument("amp: y and Phi disagree on the row count");

        const Index m = phi.rows();
        const Index n = phi.cols();
        RVec scale = phi.colwise().norm().transpose();
        for (Index j = 0; j < n; ++j)
            if (scale(j) == 0.0)
                scale(j) = 1.0;
        const CMat a = phi * scale.cwiseInverse().asDiagonal();
        const double inv_delta = static_cast<double>(n) / static_cast<double>(m);

        AmpResult res;
        CVec x = CVec::Zero(n);
        CVec z = y;
        CVec best = x;
        double best_res = y.norm();
        std::vector<double> history{best_res};

        for (Index it = 1; it <= opt.iterations; ++it)
        {
            const double noise = z.norm() / std::sqrt(static_cast<double>(m));
            const double t = opt.threshold_scale * noise;
            const CVec pseudo = x + a.adjoint() * z;

            double onsager = 0.0;
            for (Index i = 0; i < n; ++i)
            {
                const double mag = std::abs(pseudo(i));
                if (mag > t)
                    onsager += 1.0 - t / (2.0 * mag);
            }
            onsager /= static_cast<double>(n);

            const CVec next = (1.0 - opt.damping) * soft_threshold(pseudo, t) + opt.damping * x;
            z = y - a * next + (inv_delta * onsager) * z;
            x = next;
            res.iterations = it;

            const double r = (y - a * x).norm();
            if (!std::isfinite(r))
            {
                res.status = AmpStatus::diverged;
                break;
            }
            if (r < best_res)
            {
                best_res = r;
                best = x;
            }
            history.push_back(r);
            if (history.size() > 5 && r > 10.0 * history[history.size() - 6])
            {
                res.status = AmpStatus::diverged;
                break;
            }
        }
        // Without divergence the last iterate is returned, otherwise the best one seen
        const CVec &chosen = res.status == AmpStatus::ok ? x : best;
        res.estimate = scale.cwiseInverse().asDiagonal() * chosen;
        return res;
    }

    void SecondOrderPrior::validate() const
    {
        const Index n = mean.size();
        if (covariance.rows() != n || covariance.cols() != n)
            throw std::invalid_argument("SecondOrderPrior: covariance must be square and match the mean");
        if (n == 0)
            return;
        const double ref = std::max(1.0, covariance.cwiseAbs().maxCoeff());
        if ((covariance - covariance.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * ref)
            throw std::invalid_argument("SecondOrderPrior: covariance is not Hermitian");
        const Eigen::SelfAdjointEigenSolver<CMat> es(covariance, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10 * ref)
            throw std::invalid_argument("SecondOrderPrior: covariance is not positive semidefinite");
    }

    SecondOrderPrior SecondOrderPrior::from_samples(const CMat &columns, double loading)
    {
        if (columns.cols() < 1)
            throw std::invalid_argument("SecondOrderPrior::from_samples: no samples");
        if (loading < 0.0)
            throw std::invalid_argument("SecondOrderPrior::from_samples: loading must be non-negative");
        SecondOrderPrior p;
        p.mean = columns.rowwise().mean();
        const CMat centered = columns.colwise() - p.mean;
        p.covariance = centered * centered.adjoint() / static_cast<double>(columns.cols());
        p.covariance = (0.5 * (p.covariance + p.covariance.adjoint())).eval();
        p.covariance.diagonal().array() += loading;
        return p;
    }

    namespace
    {
        struct InnerSolve
        {
            CMat inverse;
            bool rank_deficient = false;
        };

        // Inverse of the Hermitian PSD inner matrix, falling back to the pseudo-inverse
        InnerSolve invert_inner(const CMat &k)
        {
            InnerSolve s;
            const Eigen::LLT<CMat> llt(k);
            bool ok = llt.info() == Eigen::Success;
            if (ok)
            {
                const RVec d = llt.matrixLLT().diagonal().real();
                ok = d.minCoeff() > 1e-7 * d.maxCoeff();
            }
            if (ok)
            {
                s.inverse = llt.solve(CMat::Identity(k.rows(), k.cols()));
                return s;
            }
            s.inverse = k.completeOrthogonalDecomposition().pseudoInverse();
            s.rank_deficient = true;
            return s;
        }
    }

    MmseResult mmse(const CVec &y, const CMat &phi, const SecondOrderPrior &prior, double sigma_n,
                    const std::optional<CMat> &noise_covariance)
    {
        if (phi.cols() != prior.dim() || phi.rows() != y.size())
            throw std::invalid_argument("mmse: dimensions of y, Phi and the prior disagree");
        if (!(sigma_n >= 0.0))
            throw std::invalid_argument("mmse: sigma_n must be non-negative");

        const CMat sp = prior.covariance * phi.adjoint();
        CMat k = phi * sp;
        if (noise_covariance)
        {
            if (noise_covariance->rows() != phi.rows() || noise_covariance->cols() != phi.rows())
                throw std::invalid_argument("mmse: noise covariance must be rows x rows");
            k += sigma_n * sigma_n * *noise_covariance;
        }
        else
        {
            k.diagonal().array() += sigma_n * sigma_n;
        }
        k = (0.5 * (k + k.adjoint())).eval();

        const InnerSolve inv = invert_inner(k);
        MmseResult r;
        r.estimate = prior.mean + sp * (inv.inverse * (y - phi * prior.mean));
        r.rank_deficient = inv.rank_deficient;
        return r;
    }

    double mmse_trace(const CMat &phi, const CMat &sigma, double sigma_n)
    {
        const CMat sp = sigma * phi.adjoint();
        CMat k = phi * sp;
        k.diagonal().array() += sigma_n * sigma_n;
        const InnerSolve inv = invert_inner(k);
        return (sigma.trace() - (sp * inv.inverse * sp.adjoint()).trace()).real();
    }
}
