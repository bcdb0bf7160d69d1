// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#pragma once

#include <string>

#include "morphdet/plane.hpp"

namespace morphdet {

// Binary PGM (P5), 8-bit. Values are mapped linearly between [0,255] bytes
// and [0,1] doubles.
Plane read_pgm(const std::string& path);
void write_pgm(const Plane& img, const std::string& path);

// PNG, 8-bit gray / gray+alpha / RGB / RGBA, non-interlaced. Color input is
// collapsed to luma 0.299 R + 0.587 G + 0.114 B; alpha is ignored.
// Container parsing is local; inflate/deflate and CRC come from zlib.
Plane read_png(const std::string& path);
void write_png_gray(const Plane& img, const std::string& path);

// Sniffs the magic bytes and dispatches to the PGM or PNG reader.
// Throws FileNotFoundError / UnsupportedFormatError / CorruptDataError.
Plane read_image(const std::string& path);

}  // namespace morphdet
