// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#include "morphdet/plane.hpp"

#include "morphdet/errors.hpp"

namespace morphdet {

Plane bilinear_resize(const Plane& src, int out_rows, int out_cols) {
    if (src.empty()) throw InputError("bilinear_resize: empty source");
    if (out_rows < 1 || out_cols < 1) throw InputError("bilinear_resize: bad target size");
    if (out_rows == src.rows && out_cols == src.cols) return src;

    Plane dst(out_rows, out_cols);
    const double sy = out_rows > 1 ? static_cast<double>(src.rows - 1) / (out_rows - 1) : 0.0;
    const double sx = out_cols > 1 ? static_cast<double>(src.cols - 1) / (out_cols - 1) : 0.0;
    for (int y = 0; y < out_rows; ++y) {
        const double fy = y * sy;
        int y0 = static_cast<int>(fy);
        if (y0 >= src.rows - 1) y0 = src.rows > 1 ? src.rows - 2 : 0;
        const double wy = src.rows > 1 ? fy - y0 : 0.0;
        const int y1 = src.rows > 1 ? y0 + 1 : y0;
        for (int x = 0; x < out_cols; ++x) {
            const double fx = x * sx;
            int x0 = static_cast<int>(fx);
            if (x0 >= src.cols - 1) x0 = src.cols > 1 ? src.cols - 2 : 0;
            const double wx = src.cols > 1 ? fx - x0 : 0.0;
            const int x1 = src.cols > 1 ? x0 + 1 : x0;
            const double top = src.at(y0, x0) * (1.0 - wx) + src.at(y0, x1) * wx;
            const double bot = src.at(y1, x0) * (1.0 - wx) + src.at(y1, x1) * wx;
            dst.at(y, x) = top * (1.0 - wy) + bot * wy;
        }
    }
    return dst;
}

}  // namespace morphdet
