// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "morphdet/plane.hpp"

namespace morphdet::wavelet {

enum class Family { Haar, DB2 };

enum class Band : std::uint8_t { LL = 0, LH = 1, HL = 2, HH = 3 };

const char* band_name(Band b);
Family family_from_string(const std::string& name);
std::string family_to_string(Family f);

// Analysis filter pair. Boundary handling is always periodic; the transform
// is undecimated, with taps dilated by 2^(level-1) at deeper levels.
struct WaveletSpec {
    Family family = Family::Haar;
    std::vector<double> lo;  // sums to sqrt(2)
    std::vector<double> hi;  // sums to 0

    void validate() const;  // throws ConfigError on a malformed spec
};

WaveletSpec build_filters(Family family);

// Three filtering steps; steps[0] is the level-1 (finest) split. The level-1
// LL subtree is discarded, so steps[0] is never LL.
struct SubbandPath {
    std::array<Band, 3> steps{Band::LH, Band::LL, Band::LL};

    std::string to_string() const;  // "LH.HL.HH"
    static SubbandPath from_string(const std::string& s);

    bool operator==(const SubbandPath&) const = default;
};

inline constexpr int kSubbandCount = 48;

// Channel order contract: lexicographic in (steps[0] over [LH,HL,HH],
// steps[1] over [LL,LH,HL,HH], steps[2] over [LL,LH,HL,HH]).
// Index 0 is LH.LL.LL, index 47 is HH.HH.HH.
const std::vector<SubbandPath>& all_subband_paths();
SubbandPath path_at(int channel);
int channel_of(const SubbandPath& p);

// C same-resolution coefficient planes plus their paths. C is 48 for a full
// decomposition and |selection| after channel reduction.
struct SubbandStack {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;  // channel-major, row-major per channel
    std::vector<SubbandPath> paths;

    double* channel(int c) { return data.data() + static_cast<std::size_t>(c) * height * width; }
    const double* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * height * width; }
    std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
};

// One undecimated split of `plane` into (LL, LH, HL, HH) at the given level
// (taps dilated by 2^(level-1), periodic boundary, no downsampling). The
// first band letter is the filter applied along rows (y), the second along
// columns (x).
std::array<Plane, 4> analysis_step(const Plane& plane, const WaveletSpec& spec, int level);

// Full three-level uniform packet decomposition with the level-1 LL subtree
// dropped: exactly 48 sub-bands at source resolution, ordered per path_at().
SubbandStack decompose(const Plane& image, const WaveletSpec& spec);

// "SBS1" container: magic, u32 C/H/W little-endian, C*H*W little-endian
// f32 row-major per channel, then C newline-terminated path strings.
void write_stack(const SubbandStack& stack, const std::string& path);
SubbandStack read_stack(const std::string& path);

// f32 payload of a stack file straight into training memory, with optional
// channel selection (indices into the stored channel order).
struct StackF32 {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;
    std::vector<SubbandPath> paths;
};
StackF32 read_stack_f32(const std::string& path, const std::vector<int>& selected = {});

}  // namespace morphdet::wavelet
