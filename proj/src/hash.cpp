// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#include "morphdet/hash.hpp"

#include <cstdio>
#include <fstream>
#include <vector>

#include "morphdet/errors.hpp"

namespace morphdet {

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFoundError("cannot open for hashing: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h = fnv1a64(buf.data(), static_cast<std::size_t>(in.gcount()), h);
    }
    return "fnv64:" + hex64(h);
}

}  // namespace morphdet
