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

#ifndef pnpce_harness_results_H
#define pnpce_harness_results_H

#include "pnpce/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace pnpce::harness
{
    inline constexpr int results_schema_version = 1;
    inline constexpr int summary_schema_version = 1;

    struct ResultRow
    {
        std::string method;
        double snr_db = 0.0;
        double alpha = 0.0;
        Index k = 0; // solver steps; 0 for methods without a schedule
        Index trial = 0;
        double nmse_db = 0.0;
        double wall_ms = 0.0;
        std::uint64_t seed = 0; // per-trial seed

        bool operator==(const ResultRow &) const = default;
    };

    // Orders by method, snr_db, alpha, K, trial
    bool row_less(const ResultRow &a, const ResultRow &b);
    void sort_rows(std::vector<ResultRow> &rows);

    struct SummaryRow
    {
        std::string method;
        double snr_db = 0.0;
        double alpha = 0.0;
        Index k = 0;
        Index trials = 0;
        double mean_nmse_db = 0.0; // 10 log10 of the mean linear NMSE
        double std_nmse_db = 0.0;  // sample standard deviation of the per-trial dB values
    };

    // One row per (method, snr_db, alpha, K) in row order
    std::vector<SummaryRow> summarize(const std::vector<ResultRow> &rows);

    // Mean of the linear values, in dB
    double mean_db(const std::vector<double> &values_db);
    double std_db(const std::vector<double> &values_db);

    void write_results(std::ostream &os, const std::vector<ResultRow> &rows);
    // Rejects a missing or unknown version line and any header other than the current one
    std::vector<ResultRow> read_results(std::istream &is);

    void write_summary(std::ostream &os, const std::vector<SummaryRow> &rows);
    std::vector<SummaryRow> read_summary(std::istream &is);

    struct ShiftRow
    {
        std::string set; // base, shifted or delta
        std::string method;
        double snr_db = 0.0;
        Index trials = 0;
        double mean_nmse_db = 0.0;
        double std_nmse_db = 0.0; // for delta: std of the paired per-trial differences
    };

    void write_shift(std::ostream &os, const std::vector<ShiftRow> &rows);

    struct GridRow
    {
        double lambda = 0.0;
        double beta = 0.0;
        double snr_db = 0.0;
        Index trials = 0;
        double mean_nmse_db = 0.0;
    };

    void write_grid(std::ostream &os, const std::vector<GridRow> &rows);

    // Ordered key/value pairs written as a flat YAML mapping; values are quoted
    struct Manifest
    {
        std::vector<std::pair<std::string, std::string>> entries;

        void add(const std::string &key, const std::string &value) { entries.emplace_back(key, value); }
        void write(std::ostream &os) const;
    };

    // Library version recorded in run manifests
    const char *version();

    // Shortest round-trip decimal form
    std::string format_double(double v);
}

#endif
