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

#include "pnpce/geometry.hpp"

#include <stdexcept>
#include <string>

namespace pnpce
{
    void ArrayConfig::validate() const
    {
        auto fail = [](const std::string &what)
        { throw std::invalid_argument("ArrayConfig: " + what); };

        if (n_t < 1 || n_r < 1)
            fail("antenna counts must be positive");
        if (k_t < 1 || k_r < 1)
            fail("subarray counts must be positive");
        if (n_t % k_t != 0)
            fail("n_t = " + std::to_string(n_t) + " is not divisible by k_t = " + std::to_string(k_t));
        if (n_r % k_r != 0)
            fail("n_r = " + std::to_string(n_r) + " is not divisible by k_r = " + std::to_string(k_r));
        if (tx_subarray.n_x < 1 || tx_subarray.n_z < 1 || rx_subarray.n_x < 1 || rx_subarray.n_z < 1)
            fail("subarray shapes must be positive");
        if (tx_subarray.size() != n_t / k_t)
            fail("tx_subarray n_x * n_z = " + std::to_string(tx_subarray.size()) + " but n_t / k_t = " + std::to_string(n_t / k_t));
        if (rx_subarray.size() != n_r / k_r)
            fail("rx_subarray n_x * n_z = " + std::to_string(rx_subarray.size()) + " but n_r / k_r = " + std::to_string(n_r / k_r));
        if (l_t < 1 || l_t > n_t)
            fail("l_t must lie in [1, n_t]");
        if (l_r < 1 || l_r > n_r)
            fail("l_r must lie in [1, n_r]");
    }

    CodebookPair make_codebooks(const ArrayConfig &cfg)
    {
        cfg.validate();
        return {subarray_codebook<double>(cfg.k_r, cfg.rx_subarray),
                subarray_codebook<double>(cfg.k_t, cfg.tx_subarray)};
    }

    ArrayConfig array_preset(const std::string &name)
    {
        ArrayConfig c;
        if (name == "desk")
        {
            c = {32, 16, 2, 2, 2, 4, {4, 4}, {4, 2}};
        }
        else if (name == "mmwave")
        {
            c = {64, 16, 2, 2, 2, 4, {8, 4}, {4, 2}};
        }
        else if (name == "thz")
        {
            c = {256, 64, 2, 2, 4, 8, {16, 8}, {8, 4}};
        }
        else
        {
            throw std::invalid_argument("unknown array preset '" + name + "' (expected desk, mmwave or thz)");
        }
        c.validate();
        return c;
    }
}
