// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#include "morphdet/wavelet.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "morphdet/errors.hpp"

namespace morphdet::wavelet {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// high-pass by the quadrature-mirror relation hi[k] = (-1)^k lo[L-1-k]
std::vector<double> qmf(const std::vector<double>& lo) {
    const std::size_t L = lo.size();
    std::vector<double> hi(L);
    for (std::size_t k = 0; k < L; ++k) hi[k] = (k % 2 == 0 ? 1.0 : -1.0) * lo[L - 1 - k];
    return hi;
}

// Periodic convolution along one axis with taps dilated by `dilation`:
// out[n] = sum_k h[k] * in[(n - k*dilation) mod N].
// axis 0 filters down the rows (y), axis 1 along each row (x).
void conv_axis(const Plane& in, const std::vector<double>& h, int dilation, int axis, Plane& out) {
    const int rows = in.rows, cols = in.cols;
    const int taps = static_cast<int>(h.size());
    if (axis == 0) {
        const int n = rows;
        for (int y = 0; y < rows; ++y) {
            double* orow = &out.v[static_cast<std::size_t>(y) * cols];
            for (int x = 0; x < cols; ++x) orow[x] = 0.0;
            for (int k = 0; k < taps; ++k) {
                int src = (y - k * dilation) % n;
                if (src < 0) src += n;
                const double* irow = &in.v[static_cast<std::size_t>(src) * cols];
                const double hk = h[k];
                for (int x = 0; x < cols; ++x) orow[x] += hk * irow[x];
            }
        }
    } else {
        const int n = cols;
        for (int y = 0; y < rows; ++y) {
            const double* irow = &in.v[static_cast<std::size_t>(y) * cols];
            double* orow = &out.v[static_cast<std::size_t>(y) * cols];
            for (int x = 0; x < cols; ++x) {
                double acc = 0.0;
                for (int k = 0; k < taps; ++k) {
                    int src = (x - k * dilation) % n;
                    if (src < 0) src += n;
                    acc += h[k] * irow[src];
                }
                orow[x] = acc;
            }
        }
    }
}

}  // namespace

const char* band_name(Band b) {
    switch (b) {
        case Band::LL: return "LL";
        case Band::LH: return "LH";
        case Band::HL: return "HL";
        case Band::HH: return "HH";
    }
    return "??";
}

Family family_from_string(const std::string& name) {
    if (name == "haar") return Family::Haar;
    if (name == "db2") return Family::DB2;
    throw ConfigError("unsupported wavelet family: " + name + " (expected haar or db2)");
}

std::string family_to_string(Family f) {
    return f == Family::Haar ? "haar" : "db2";
}

void WaveletSpec::validate() const {
    if (lo.size() != hi.size() || lo.size() < 2) throw ConfigError("wavelet filters must share a length >= 2");
    double slo = 0.0, shi = 0.0;
    for (double x : lo) slo += x;
    for (double x : hi) shi += x;
    if (std::abs(slo - kSqrt2) > 1e-12) throw ConfigError("low-pass taps must sum to sqrt(2)");
    if (std::abs(shi) > 1e-12) throw ConfigError("high-pass taps must sum to 0");
}

WaveletSpec build_filters(Family family) {
    WaveletSpec spec;
    spec.family = family;
    switch (family) {
        case Family::Haar:
            spec.lo = {1.0 / kSqrt2, 1.0 / kSqrt2};
            break;
        case Family::DB2: {
            const double s3 = std::sqrt(3.0);
            const double d = 4.0 * kSqrt2;
            spec.lo = {(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d};
            break;
        }
        default:
            throw ConfigError("unsupported wavelet family enum value");
    }
    spec.hi = qmf(spec.lo);
    spec.validate();
    return spec;
}

std::string SubbandPath::to_string() const {
    std::string s = band_name(steps[0]);
    s += '.';
    s += band_name(steps[1]);
    s += '.';
    s += band_name(steps[2]);
    return s;
}

SubbandPath SubbandPath::from_string(const std::string& s) {
    auto parse = [&](const std::string& t) -> Band {
        if (t == "LL") return Band::LL;
        if (t == "LH") return Band::LH;
        if (t == "HL") return Band::HL;
        if (t == "HH") return Band::HH;
        throw CorruptDataError("bad sub-band token: " + t);
    };
    if (s.size() != 8 || s[2] != '.' || s[5] != '.') throw CorruptDataError("bad sub-band path: " + s);
    SubbandPath p;
    p.steps = {parse(s.substr(0, 2)), parse(s.substr(3, 2)), parse(s.substr(6, 2))};
    if (p.steps[0] == Band::LL) throw CorruptDataError("level-1 LL path is not admissible: " + s);
    return p;
}

const std::vector<SubbandPath>& all_subband_paths() {
    static const std::vector<SubbandPath> paths = [] {
        const Band level1[3] = {Band::LH, Band::HL, Band::HH};
        const Band deeper[4] = {Band::LL, Band::LH, Band::HL, Band::HH};
        std::vector<SubbandPath> out;
        out.reserve(kSubbandCount);
        for (Band b0 : level1)
            for (Band b1 : deeper)
                for (Band b2 : deeper) out.push_back(SubbandPath{{b0, b1, b2}});
        return out;
    }();
    return paths;
}

SubbandPath path_at(int channel) {
    if (channel < 0 || channel >= kSubbandCount) throw InputError("sub-band channel out of range");
    return all_subband_paths()[static_cast<std::size_t>(channel)];
}

int channel_of(const SubbandPath& p) {
    const auto& paths = all_subband_paths();
    for (int i = 0; i < kSubbandCount; ++i)
        if (paths[static_cast<std::size_t>(i)] == p) return i;
    throw InputError("path not in the 48-channel layout: " + p.to_string());
}

std::array<Plane, 4> analysis_step(const Plane& plane, const WaveletSpec& spec, int level) {
    if (plane.empty()) throw InputError("analysis_step: empty plane");
    if (level < 1) throw InputError("analysis_step: level must be >= 1");
    const int dilation = 1 << (level - 1);

    Plane row_lo(plane.rows, plane.cols), row_hi(plane.rows, plane.cols);
    conv_axis(plane, spec.lo, dilation, 0, row_lo);
    conv_axis(plane, spec.hi, dilation, 0, row_hi);

    std::array<Plane, 4> out{Plane(plane.rows, plane.cols), Plane(plane.rows, plane.cols),
                             Plane(plane.rows, plane.cols), Plane(plane.rows, plane.cols)};
    conv_axis(row_lo, spec.lo, dilation, 1, out[0]);  // LL
    conv_axis(row_lo, spec.hi, dilation, 1, out[1]);  // LH
    conv_axis(row_hi, spec.lo, dilation, 1, out[2]);  // HL
    conv_axis(row_hi, spec.hi, dilation, 1, out[3]);  // HH
    return out;
}

SubbandStack decompose(const Plane& image, const WaveletSpec& spec) {
    if (image.rows < 8 || image.cols < 8) throw InputError("decompose: image must be at least 8x8");

    SubbandStack stack;
    stack.channels = kSubbandCount;
    stack.height = image.rows;
    stack.width = image.cols;
    stack.data.resize(static_cast<std::size_t>(kSubbandCount) * image.rows * image.cols);
    stack.paths = all_subband_paths();

    auto level1 = analysis_step(image, spec, 1);
    int channel = 0;
    for (int b0 = 1; b0 < 4; ++b0) {  // LH, HL, HH; the LL subtree is dropped
        auto level2 = analysis_step(level1[static_cast<std::size_t>(b0)], spec, 2);
        for (int b1 = 0; b1 < 4; ++b1) {
            auto level3 = analysis_step(level2[static_cast<std::size_t>(b1)], spec, 3);
            for (int b2 = 0; b2 < 4; ++b2) {
                std::memcpy(stack.channel(channel), level3[static_cast<std::size_t>(b2)].v.data(),
                            stack.plane_size() * sizeof(double));
                ++channel;
            }
        }
    }
    return stack;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t x) {
    unsigned char b[4] = {static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8),
                          static_cast<unsigned char>(x >> 16), static_cast<unsigned char>(x >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw CorruptDataError("truncated stack file: " + path);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

}  // namespace

void write_stack(const SubbandStack& stack, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write("SBS1", 4);
    put_u32(out, static_cast<std::uint32_t>(stack.channels));
    put_u32(out, static_cast<std::uint32_t>(stack.height));
    put_u32(out, static_cast<std::uint32_t>(stack.width));
    std::vector<float> f32(stack.data.size());
    for (std::size_t i = 0; i < f32.size(); ++i) f32[i] = static_cast<float>(stack.data[i]);
    out.write(reinterpret_cast<const char*>(f32.data()),
              static_cast<std::streamsize>(f32.size() * sizeof(float)));
    for (const auto& p : stack.paths) out << p.to_string() << '\n';
    if (!out) throw IoError("write failed: " + path);
}

namespace {

struct StackHeader {
    int channels, height, width;
};

StackHeader read_stack_header(std::istream& in, const std::string& path) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SBS1", 4) != 0) throw CorruptDataError("bad stack magic: " + path);
    StackHeader h{};
    h.channels = static_cast<int>(get_u32(in, path));
    h.height = static_cast<int>(get_u32(in, path));
    h.width = static_cast<int>(get_u32(in, path));
    if (h.channels < 1 || h.height < 1 || h.width < 1) throw CorruptDataError("bad stack header: " + path);
    return h;
}

std::vector<SubbandPath> read_stack_paths(std::istream& in, int channels, const std::string& path) {
    std::vector<SubbandPath> paths;
    paths.reserve(static_cast<std::size_t>(channels));
    std::string line;
    for (int c = 0; c < channels; ++c) {
        if (!std::getline(in, line)) throw CorruptDataError("missing path strings: " + path);
        paths.push_back(SubbandPath::from_string(line));
    }
    return paths;
}

}  // namespace

SubbandStack read_stack(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFoundError("no such stack file: " + path);
    const auto h = read_stack_header(in, path);
    const std::size_t count = static_cast<std::size_t>(h.channels) * h.height * h.width;
    std::vector<float> f32(count);
    in.read(reinterpret_cast<char*>(f32.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw CorruptDataError("truncated stack payload: " + path);

    SubbandStack stack;
    stack.channels = h.channels;
    stack.height = h.height;
    stack.width = h.width;
    stack.data.assign(f32.begin(), f32.end());
    stack.paths = read_stack_paths(in, h.channels, path);
    return stack;
}

StackF32 read_stack_f32(const std::string& path, const std::vector<int>& selected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFoundError("no such stack file: " + path);
    const auto h = read_stack_header(in, path);
    const std::size_t plane = static_cast<std::size_t>(h.height) * h.width;
    const std::size_t count = static_cast<std::size_t>(h.channels) * plane;
    std::vector<float> all(count);
    in.read(reinterpret_cast<char*>(all.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw CorruptDataError("truncated stack payload: " + path);
    auto paths = read_stack_paths(in, h.channels, path);

    StackF32 out;
    out.height = h.height;
    out.width = h.width;
    if (selected.empty()) {
        out.channels = h.channels;
        out.data = std::move(all);
        out.paths = std::move(paths);
        return out;
    }
    out.channels = static_cast<int>(selected.size());
    out.data.resize(selected.size() * plane);
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const int c = selected[i];
        if (c < 0 || c >= h.channels)
            throw ArtifactError("selected channel " + std::to_string(c) + " out of range for " + path);
        std::memcpy(out.data.data() + i * plane, all.data() + static_cast<std::size_t>(c) * plane,
                    plane * sizeof(float));
        out.paths.push_back(paths[static_cast<std::size_t>(c)]);
    }
    return out;
}

}  // namespace morphdet::wavelet
