// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#pragma once

#include <cstddef>
#include <vector>

namespace morphdet {

// Single-channel raster, row-major, double precision. Images live in [0,1];
// wavelet coefficients use the full real line.
struct Plane {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Plane() = default;
    Plane(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

    double& at(int y, int x) { return v[static_cast<std::size_t>(y) * cols + x]; }
    double at(int y, int x) const { return v[static_cast<std::size_t>(y) * cols + x]; }
    std::size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }
};

// Separable bilinear resampling with corner-anchored coordinates:
// src_x = dst_x * (src_w - 1) / (dst_w - 1). Identity when sizes match.
Plane bilinear_resize(const Plane& src, int out_rows, int out_cols);

}  // namespace morphdet
