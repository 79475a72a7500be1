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

#include "pnpce/harness/results.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace pnpce::harness
{
    namespace
    {
        const char *results_header = "method,snr_db,alpha,K,trial,nmse_db,wall_ms,seed";
        const char *summary_header = "method,snr_db,alpha,K,trials,mean_nmse_db,std_nmse_db";

        std::vector<std::string> split_csv(const std::string &line)
        {
            std::vector<std::string> out;
            std::string field;
            std::istringstream is(line);
            while (std::getline(is, field, ','))
                out.push_back(field);
            if (!line.empty() && line.back() == ',')
                out.emplace_back();
            return out;
        }

        double parse_double(const std::string &s, const std::string &what)
        {
            double v = 0.0;
            const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || p != s.data() + s.size())
                throw std::runtime_error("csv: bad number '" + s + "' in column " + what);
            return v;
        }

        template <typename T>
        T parse_int(const std::string &s, const std::string &what)
        {
            T v = 0;
            const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || p != s.data() + s.size())
                throw std::runtime_error("csv: bad integer '" + s + "' in column " + what);
            return v;
        }

        // Checks the version line and the header
        void expect_preamble(std::istream &is, const std::string &kind, int version, const std::string &header)
        {
            std::string line;
            if (!std::getline(is, line))
                throw std::runtime_error(kind + ": empty input");
            const std::string prefix = "# pnpce-" + kind + " v";
            if (line.rfind(prefix, 0) != 0)
                throw std::runtime_error(kind + ": missing version line");
            if (line != prefix + std::to_string(version))
                throw std::runtime_error(kind + ": unsupported schema version '" + line.substr(prefix.size()) + "'");
            if (!std::getline(is, line) || line != header)
                throw std::runtime_error(kind + ": unexpected header '" + line + "'");
        }
    }

    const char *version()
    {
        return PNPCE_VERSION;
    }

    std::string format_double(double v)
    {
        if (std::isnan(v))
            return "nan";
        if (std::isinf(v))
            return v > 0 ? "inf" : "-inf";
        if (v == 0.0)
            return "0";
        char buf[64];
        const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, p);
    }

    bool row_less(const ResultRow &a, const ResultRow &b)
    {
        return std::tie(a.method, a.snr_db, a.alpha, a.k, a.trial) < std::tie(b.method, b.snr_db, b.alpha, b.k, b.trial);
    }

    void sort_rows(std::vector<ResultRow> &rows)
    {
        std::sort(rows.begin(), rows.end(), row_less);
    }

    double mean_db(const std::vector<double> &values_db)
    {
        if (values_db.empty())
            throw std::invalid_argument("mean_db: no values");
        double acc = 0.0;
        for (double v : values_db)
            acc += std::pow(10.0, v / 10.0);
        return 10.0 * std::log10(acc / static_cast<double>(values_db.size()));
    }

    double std_db(const std::vector<double> &values_db)
    {
        if (values_db.size() < 2)
            return 0.0;
        const double n = static_cast<double>(values_db.size());
        const double m = std::accumulate(values_db.begin(), values_db.end(), 0.0) / n;
        double acc = 0.0;
        for (double v : values_db)
            acc += (v - m) * (v - m);
        return std::sqrt(acc / (n - 1.0));
    }

    std::vector<SummaryRow> summarize(const std::vector<ResultRow> &rows)
    {
        std::vector<ResultRow> sorted = rows;
        sort_rows(sorted);
        std::vector<SummaryRow> out;
        std::size_t i = 0;
        while (i < sorted.size())
        {
            const auto &head = sorted[i];
            std::vector<double> values;
            std::size_t j = i;
            for (; j < sorted.size(); ++j)
            {
                const auto &r = sorted[j];
                if (r.method != head.method || r.snr_db != head.snr_db || r.alpha != head.alpha || r.k != head.k)
                    break;
                values.push_back(r.nmse_db);
            }
            out.push_back({head.method, head.snr_db, head.alpha, head.k, static_cast<Index>(values.size()),
                           mean_db(values), std_db(values)});
            i = j;
        }
        return out;
    }

    void write_results(std::ostream &os, const std::vector<ResultRow> &rows)
    {
        os << "# pnpce-results v" << results_schema_version << '\n' << results_header << '\n';
        for (const auto &r : rows)
            os << r.method << ',' << format_double(r.snr_db) << ',' << format_double(r.alpha) << ',' << r.k << ','
               << r.trial << ',' << format_double(r.nmse_db) << ',' << format_double(r.wall_ms) << ',' << r.seed
               << '\n';
    }

    std::vector<ResultRow> read_results(std::istream &is)
    {
        expect_preamble(is, "results", results_schema_version, results_header);
        std::vector<ResultRow> rows;
        std::string line;
        while (std::getline(is, line))
        {
            if (line.empty())
                continue;
            const auto f = split_csv(line);
            if (f.size() != 8)
                throw std::runtime_error("results: expected 8 columns in '" + line + "'");
            ResultRow r;
            r.method = f[0];
            r.snr_db = parse_double(f[1], "snr_db");
            r.alpha = parse_double(f[2], "alpha");
            r.k = parse_int<Index>(f[3], "K");
            r.trial = parse_int<Index>(f[4], "trial");
            r.nmse_db = parse_double(f[5], "nmse_db");
            r.wall_ms = parse_double(f[6], "wall_ms");
            r.seed = parse_int<std::uint64_t>(f[7], "seed");
            rows.push_back(std::move(r));
        }
        return rows;
    }

    void write_summary(std::ostream &os, const std::vector<SummaryRow> &rows)
    {
        os << "# pnpce-summary v" << summary_schema_version << '\n' << summary_header << '\n';
        for (const auto &r : rows)
            os << r.method << ',' << format_double(r.snr_db) << ',' << format_double(r.alpha) << ',' << r.k << ','
               << r.trials << ',' << format_double(r.mean_nmse_db) << ',' << format_double(r.std_nmse_db) << '\n';
    }

    std::vector<SummaryRow> read_summary(std::istream &is)
    {
        expect_preamble(is, "summary", summary_schema_version, summary_header);
        std::vector<SummaryRow> rows;
        std::string line;
        while (std::getline(is, line))
        {
            if (line.empty())
                continue;
            const auto f = split_csv(line);
            if (f.size() != 7)
                throw std::runtime_error("summary: expected 7 columns in '" + line + "'");
            rows.push_back({f[0], parse_double(f[1], "snr_db"), parse_double(f[2], "alpha"),
                            parse_int<Index>(f[3], "K"), parse_int<Index>(f[4], "trials"),
                            parse_double(f[5], "mean_nmse_db"), parse_double(f[6], "std_nmse_db")});
        }
        return rows;
    }

    void write_shift(std::ostream &os, const std::vector<ShiftRow> &rows)
    {
        os << "# pnpce-shift v1\nset,method,snr_db,trials,mean_nmse_db,std_nmse_db\n";
        for (const auto &r : rows)
            os << r.set << ',' << r.method << ',' << format_double(r.snr_db) << ',' << r.trials << ','
               << format_double(r.mean_nmse_db) << ',' << format_double(r.std_nmse_db) << '\n';
    }

    void write_grid(std::ostream &os, const std::vector<GridRow> &rows)
    {
        os << "# pnpce-gridsearch v1\nlambda,beta,snr_db,trials,mean_nmse_db\n";
        for (const auto &r : rows)
            os << format_double(r.lambda) << ',' << format_double(r.beta) << ',' << format_double(r.snr_db) << ','
               << r.trials << ',' << format_double(r.mean_nmse_db) << '\n';
    }

    void Manifest::write(std::ostream &os) const
    {
        for (const auto &[k, v] : entries)
        {
            os << k << ": \"";
            for (char c : v)
            {
                if (c == '"' || c == '\\')
                    os << '\\';
                os << c;
            }
            os << "\"\n";
        }
    }
}
