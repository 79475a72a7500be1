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

#ifndef pnpce_measurement_H
#define pnpce_measurement_H

#include "pnpce/geometry.hpp"
#include "pnpce/types.hpp"

#include <utility>
#include <vector>

namespace pnpce
{
    // Nearest element of {e^{j 2 pi q / 2^n_b}}, ties toward the smaller q
    cd quantize_phase(cd x, int n_b);

    struct PilotPlan
    {
        Index m_t = 0; // Tx training slots
        Index m_r = 0; // Rx training slots
        Index l_t = 0;
        Index l_r = 0;
        int n_b = 4;
        double power = 1.0;
        std::vector<CMat> precoders; // m_t analog precoders F_t, n_t x l_t
        CMat symbols;                // l_t x m_t QPSK pilots
        CMat p;                      // n_t x m_t, column t = F_t s_t
        CMat w;                      // n_r x (l_r m_r), combiners W_r side by side

        Index rows() const { return m_t * m_r * l_r; }
    };

    // M_t M_r L_r / (N_t N_r)
    double pilot_ratio(const ArrayConfig &cfg, Index m_t, Index m_r);

    // Full-rank (m_t, m_r) whose ratio is closest to alpha; ties go to the larger m_r
    std::pair<Index, Index> pilot_dims_for_ratio(const ArrayConfig &cfg, double alpha);

    PilotPlan sample_pilot_plan(Rng &rng, const ArrayConfig &cfg, Index m_t, Index m_r, int n_b, double power = 1.0);

    // Phi = (A_T^H P)^T (x) (W^H A_R), so Phi vec(H_b) = vec(W^H A_R H_b A_T^H P)
    CMat build_measurement_matrix(const PilotPlan &plan, const CodebookPair &cb);

    // vec(W^H A_R H_b A_T^H P) evaluated without forming Phi
    CVec apply_measurement(const PilotPlan &plan, const CodebookPair &cb, const CMat &h_b);

    struct MeasurementSet
    {
        CVec y;
        CMat phi;
        double sigma_n = 0.0;
        double snr_db = 0.0;
    };

    // Antenna noise with per-slot draws, combined through each W_r^H and stacked like vec(Y)
    CVec combined_noise(Rng &rng, const PilotPlan &plan, double sigma_n);

    // Covariance of combined_noise at sigma_n = 1: I_{m_t} (x) blkdiag(W_r^H W_r)
    CMat combined_noise_covariance(const PilotPlan &plan);

    // sigma_n such that signal_power / sigma_n^2 hits snr_db; signal_power is E|(Phi h)_i|^2 per row
    double noise_std_for_snr(double snr_db, double signal_power);

    MeasurementSet measure(const CMat &h_b, const PilotPlan &plan, const CMat &phi, double sigma_n, Rng &rng);

    MeasurementSet measure_at_snr(const CMat &h_b, const PilotPlan &plan, const CMat &phi, double snr_db,
                                  double signal_power, Rng &rng);

    // Ensemble average of |Phi h|^2 / rows over random plans and the given beamspace samples (columns)
    double calibrate_signal_power(const CMat &samples, const ArrayConfig &cfg, const CodebookPair &cb, Index m_t,
                                  Index m_r, int n_b, std::uint64_t seed, Index draws = 256);

    inline constexpr double nmse_floor_db = -200.0;

    double nmse_db(const CVec &h_true, const CVec &h_est);
}

#endif
