// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#include "morphdet/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "morphdet/errors.hpp"

namespace morphdet {

namespace {

std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFoundError("no such file: " + path);
    in.seekg(0, std::ios::end);
    const auto n = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<unsigned char> bytes(n);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
    if (!in) throw CorruptDataError("short read: " + path);
    return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

std::uint32_t be32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | p[3];
}

void push_be32(std::vector<unsigned char>& v, std::uint32_t x) {
    v.push_back(static_cast<unsigned char>(x >> 24));
    v.push_back(static_cast<unsigned char>(x >> 16));
    v.push_back(static_cast<unsigned char>(x >> 8));
    v.push_back(static_cast<unsigned char>(x));
}

unsigned char paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<unsigned char>(a);
    if (pb <= pc) return static_cast<unsigned char>(b);
    return static_cast<unsigned char>(c);
}

const unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};

}  // namespace

Plane read_pgm(const std::string& path) {
    auto bytes = read_file_bytes(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        throw UnsupportedFormatError("not a binary PGM (P5): " + path);

    // header: "P5" <ws> width <ws> height <ws> maxval <single ws> data
    std::size_t pos = 2;
    auto skip_ws = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {  // comment to end of line
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&]() -> long {
        skip_ws();
        if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw CorruptDataError("bad PGM header: " + path);
        long x = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) x = x * 10 + (bytes[pos++] - '0');
        return x;
    };
    const long w = read_int(), h = read_int(), maxval = read_int();
    if (w < 1 || h < 1) throw CorruptDataError("bad PGM dimensions: " + path);
    if (maxval < 1 || maxval > 255) throw UnsupportedFormatError("PGM maxval > 8 bit: " + path);
    ++pos;  // the single whitespace after maxval
    if (bytes.size() - pos < static_cast<std::size_t>(w) * h) throw CorruptDataError("truncated PGM: " + path);

    Plane img(static_cast<int>(h), static_cast<int>(w));
    const double scale = 1.0 / static_cast<double>(maxval);
    for (std::size_t i = 0; i < img.size(); ++i) img.v[i] = bytes[pos + i] * scale;
    return img;
}

void write_pgm(const Plane& img, const std::string& path) {
    if (img.empty()) throw InputError("write_pgm: empty image");
    std::vector<unsigned char> bytes;
    const std::string header = "P5\n" + std::to_string(img.cols) + " " + std::to_string(img.rows) + "\n255\n";
    bytes.insert(bytes.end(), header.begin(), header.end());
    bytes.reserve(bytes.size() + img.size());
    for (double x : img.v) {
        const double c = std::min(1.0, std::max(0.0, x));
        bytes.push_back(static_cast<unsigned char>(std::lround(c * 255.0)));
    }
    write_file_bytes(path, bytes);
}

Plane read_png(const std::string& path) {
    auto bytes = read_file_bytes(path);
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSig, 8) != 0)
        throw UnsupportedFormatError("not a PNG: " + path);

    std::uint32_t width = 0, height = 0;
    int bit_depth = 0, color_type = 0;
    bool saw_ihdr = false, saw_iend = false;
    std::vector<unsigned char> idat;

    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = be32(&bytes[pos]);
        if (pos + 12 + len > bytes.size()) throw CorruptDataError("truncated PNG chunk: " + path);
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const unsigned char* data = &bytes[pos + 8];
        const std::uint32_t crc_stored = be32(&bytes[pos + 8 + len]);
        const std::uint32_t crc_calc =
            static_cast<std::uint32_t>(crc32(crc32(0, &bytes[pos + 4], 4), data, len));
        if (crc_stored != crc_calc) throw CorruptDataError("PNG chunk CRC mismatch: " + path);

        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw CorruptDataError("bad IHDR: " + path);
            width = be32(data);
            height = be32(data + 4);
            bit_depth = data[8];
            color_type = data[9];
            const int interlace = data[12];
            if (bit_depth != 8) throw UnsupportedFormatError("PNG bit depth != 8: " + path);
            if (color_type != 0 && color_type != 2 && color_type != 4 && color_type != 6)
                throw UnsupportedFormatError("unsupported PNG color type: " + path);
            if (interlace != 0) throw UnsupportedFormatError("interlaced PNG unsupported: " + path);
            saw_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_iend = true;
            break;
        }
        pos += 12 + len;
    }
    if (!saw_ihdr || !saw_iend || idat.empty()) throw CorruptDataError("incomplete PNG: " + path);
    if (width < 1 || height < 1) throw CorruptDataError("bad PNG dimensions: " + path);

    const int channels = color_type == 0 ? 1 : color_type == 2 ? 3 : color_type == 4 ? 2 : 4;
    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    std::vector<unsigned char> raw(height * (stride + 1));
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw CorruptDataError("PNG inflate failed: " + path);

    // undo per-row filters in place into a separate pixel buffer
    std::vector<unsigned char> px(height * stride);
    for (std::uint32_t y = 0; y < height; ++y) {
        const unsigned char filter = raw[y * (stride + 1)];
        const unsigned char* src = &raw[y * (stride + 1) + 1];
        unsigned char* dst = &px[y * stride];
        const unsigned char* up = y > 0 ? &px[(y - 1) * stride] : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int a = i >= static_cast<std::size_t>(channels) ? dst[i - channels] : 0;
            const int b = up ? up[i] : 0;
            const int c = (up && i >= static_cast<std::size_t>(channels)) ? up[i - channels] : 0;
            int x = src[i];
            switch (filter) {
                case 0: break;
                case 1: x += a; break;
                case 2: x += b; break;
                case 3: x += (a + b) / 2; break;
                case 4: x += paeth(a, b, c); break;
                default: throw CorruptDataError("bad PNG filter byte: " + path);
            }
            dst[i] = static_cast<unsigned char>(x);
        }
    }

    Plane img(static_cast<int>(height), static_cast<int>(width));
    for (std::uint32_t y = 0; y < height; ++y) {
        for (std::uint32_t x = 0; x < width; ++x) {
            const unsigned char* p = &px[y * stride + static_cast<std::size_t>(x) * channels];
            double v;
            if (channels <= 2) {
                v = p[0] / 255.0;
            } else {
                v = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
            }
            img.at(static_cast<int>(y), static_cast<int>(x)) = v;
        }
    }
    return img;
}

void write_png_gray(const Plane& img, const std::string& path) {
    if (img.empty()) throw InputError("write_png_gray: empty image");
    const std::size_t stride = static_cast<std::size_t>(img.cols);
    std::vector<unsigned char> raw(static_cast<std::size_t>(img.rows) * (stride + 1));
    for (int y = 0; y < img.rows; ++y) {
        raw[y * (stride + 1)] = 0;  // filter: none
        for (int x = 0; x < img.cols; ++x) {
            const double c = std::min(1.0, std::max(0.0, img.at(y, x)));
            raw[y * (stride + 1) + 1 + x] = static_cast<unsigned char>(std::lround(c * 255.0));
        }
    }
    uLongf comp_cap = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_cap);
    if (compress2(comp.data(), &comp_cap, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw IoError("PNG deflate failed: " + path);
    comp.resize(comp_cap);

    std::vector<unsigned char> out(kPngSig, kPngSig + 8);
    auto chunk = [&](const char* type, const std::vector<unsigned char>& data) {
        push_be32(out, static_cast<std::uint32_t>(data.size()));
        const std::size_t type_pos = out.size();
        out.insert(out.end(), type, type + 4);
        out.insert(out.end(), data.begin(), data.end());
        const std::uint32_t crc =
            static_cast<std::uint32_t>(crc32(0, &out[type_pos], static_cast<uInt>(4 + data.size())));
        push_be32(out, crc);
    };
    std::vector<unsigned char> ihdr;
    push_be32(ihdr, static_cast<std::uint32_t>(img.cols));
    push_be32(ihdr, static_cast<std::uint32_t>(img.rows));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // gray
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter
    ihdr.push_back(0);  // no interlace
    chunk("IHDR", ihdr);
    chunk("IDAT", comp);
    chunk("IEND", {});
    write_file_bytes(path, out);
}

Plane read_image(const std::string& path) {
    auto head = [&]() -> std::array<unsigned char, 8> {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw FileNotFoundError("no such file: " + path);
        std::array<unsigned char, 8> h{};
        in.read(reinterpret_cast<char*>(h.data()), 8);
        return h;
    }();
    if (std::memcmp(head.data(), kPngSig, 8) == 0) return read_png(path);
    if (head[0] == 'P' && head[1] == '5') return read_pgm(path);
    throw UnsupportedFormatError("unrecognized image format: " + path);
}

}  // namespace morphdet
