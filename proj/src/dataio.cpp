// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#include "morphdet/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "morphdet/errors.hpp"
#include "morphdet/image_io.hpp"
#include "morphdet/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace morphdet::data {

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw CorruptDataError("bad split name: " + s);
}

int DatasetManifest::count(Split s) const {
    int n = 0;
    for (const auto& e : entries) n += e.split == s;
    return n;
}

int DatasetManifest::count(Split s, Label l) const {
    int n = 0;
    for (const auto& e : entries) n += e.split == s && e.label == l;
    return n;
}

void DatasetManifest::validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& e : entries)
        if (!seen.insert(e.path).second) throw InputError("duplicate path in manifest: " + e.path);
}

void DatasetManifest::require_trainable() const {
    for (Split s : {Split::Train, Split::Val}) {
        if (count(s, Label::BonaFide) < 1 || count(s, Label::Morph) < 1)
            throw InputError(std::string("split '") + split_name(s) +
                             "' needs at least one bona fide and one morph entry");
    }
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFoundError("no such manifest: " + path);
    DatasetManifest m;
    m.name = fs::path(path).stem().string();
    const fs::path base = fs::path(path).parent_path();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw CorruptDataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        ManifestEntry e;
        // relative entries resolve against the manifest's own directory, so
        // generated datasets stay relocatable (and byte-reproducible)
        const std::string raw = j.at("path").get<std::string>();
        e.path = fs::path(raw).is_absolute() ? raw : (base / raw).string();
        const int label = j.at("label").get<int>();
        if (label != 0 && label != 1)
            throw CorruptDataError(path + ":" + std::to_string(lineno) + ": label must be 0 or 1");
        e.label = static_cast<Label>(label);
        e.split = split_from_string(j.at("split").get<std::string>());
        m.entries.push_back(std::move(e));
    }
    m.validate();
    return m;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
    m.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& e : m.entries) {
        json j;
        j["path"] = e.path;
        j["label"] = static_cast<int>(e.label);
        j["split"] = split_name(e.split);
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

Plane load_image(const std::string& path, int target_size) {
    Plane img = read_image(path);
    if (target_size > 0) img = bilinear_resize(img, target_size, target_size);
    return img;
}

DatasetManifest merge_manifests(const std::vector<DatasetManifest>& manifests, const std::string& name) {
    if (manifests.empty()) throw ConfigError("merge_manifests: need at least one manifest");
    DatasetManifest out;
    out.name = name;
    for (const auto& m : manifests)
        out.entries.insert(out.entries.end(), m.entries.begin(), m.entries.end());
    out.validate();  // duplicate paths across inputs surface here
    return out;
}

void SynthConfig::validate() const {
    if (image_size < 8) throw ConfigError("synth: image_size must be >= 8");
    if (n_pairs < 2) throw ConfigError("synth: n_pairs must be >= 2");
    if (blob_count < 1) throw ConfigError("synth: blob_count must be >= 1");
    if (artifact_amplitude < 0.0) throw ConfigError("synth: artifact_amplitude must be >= 0");
    if (artifact_period < 2) throw ConfigError("synth: artifact_period must be >= 2");
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("synth: alpha must be in [0,1]");
}

namespace {

Plane random_blob_image(int size, int blob_count, Rng& rng) {
    Plane img(size, size);
    for (int b = 0; b < blob_count; ++b) {
        const double amp = rng.uniform(0.5, 1.0);
        const double cy = rng.uniform(0.0, size - 1.0);
        const double cx = rng.uniform(0.0, size - 1.0);
        const double sigma = rng.uniform(size / 12.0, size / 4.0);
        const double inv = 1.0 / (2.0 * sigma * sigma);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                img.at(y, x) += amp * std::exp(-((y - cy) * (y - cy) + (x - cx) * (x - cx)) * inv);
    }
    double lo = img.v[0], hi = img.v[0];
    for (double v : img.v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    for (double& v : img.v) v = (v - lo) / span;
    return img;
}

double checkerboard_sign(int y, int x, int period) {
    const int cell = period / 2;
    return ((y / cell + x / cell) % 2 == 0) ? 1.0 : -1.0;
}

Split split_of_pair(int pair, int n_pairs) {
    const int n_train = static_cast<int>(std::llround(0.70 * n_pairs));
    const int n_val = static_cast<int>(std::llround(0.15 * n_pairs));
    if (pair < n_train) return Split::Train;
    if (pair < n_train + n_val) return Split::Val;
    return Split::Test;
}

}  // namespace

SynthResult synth_dataset(const SynthConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);

    Rng rng(cfg.seed);
    std::vector<Plane> bona(static_cast<std::size_t>(cfg.n_pairs));
    for (int i = 0; i < cfg.n_pairs; ++i) bona[static_cast<std::size_t>(i)] = random_blob_image(cfg.image_size, cfg.blob_count, rng);

    SynthResult result;
    result.manifest.name = "synth";
    std::size_t clamped = 0;
    char name[64];

    for (int i = 0; i < cfg.n_pairs; ++i) {
        const Split split = split_of_pair(i, cfg.n_pairs);

        std::snprintf(name, sizeof name, "bona_%04d.pgm", i);
        write_pgm(bona[static_cast<std::size_t>(i)], (fs::path(out_dir) / name).string());
        result.manifest.entries.push_back({name, Label::BonaFide, split});

        const Plane& a = bona[static_cast<std::size_t>(i)];
        const Plane& b = bona[static_cast<std::size_t>((i + 1) % cfg.n_pairs)];
        Plane morph(cfg.image_size, cfg.image_size);
        for (int y = 0; y < cfg.image_size; ++y) {
            for (int x = 0; x < cfg.image_size; ++x) {
                double v = cfg.alpha * a.at(y, x) + (1.0 - cfg.alpha) * b.at(y, x) +
                           cfg.artifact_amplitude * checkerboard_sign(y, x, cfg.artifact_period);
                if (v < 0.0 || v > 1.0) {
                    v = std::min(1.0, std::max(0.0, v));
                    ++clamped;
                }
                morph.at(y, x) = v;
            }
        }
        std::snprintf(name, sizeof name, "morph_%04d.pgm", i);
        write_pgm(morph, (fs::path(out_dir) / name).string());
        result.manifest.entries.push_back({name, Label::Morph, split});
    }

    // bona fides are min-max normalized, so only morph pixels can clip
    const std::size_t total = 2ull * cfg.n_pairs * cfg.image_size * cfg.image_size;
    result.clamp_fraction = static_cast<double>(clamped) / static_cast<double>(total);
    return result;
}

}  // namespace morphdet::data
