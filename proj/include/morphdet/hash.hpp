// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#pragma once

#include <cstdint>
#include <string>

namespace morphdet {

inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t h);

// FNV-1a over the file bytes, rendered as "fnv64:<16 hex digits>".
std::string file_hash(const std::string& path);

}  // namespace morphdet
