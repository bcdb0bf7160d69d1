// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "morphdet/plane.hpp"

namespace morphdet::data {

enum class Label : int { BonaFide = 0, Morph = 1 };
enum class Split { Train, Val, Test };

const char* split_name(Split s);
Split split_from_string(const std::string& s);

struct ManifestEntry {
    std::string path;
    Label label = Label::BonaFide;
    Split split = Split::Train;
};

struct DatasetManifest {
    std::string name;
    std::vector<ManifestEntry> entries;

    int count(Split s) const;
    int count(Split s, Label l) const;
    void validate() const;  // unique paths
    // both labels in every non-empty split that training touches
    void require_trainable() const;
};

// JSON-lines, one {"path":…,"label":0|1,"split":"train"|…} per line.
DatasetManifest read_manifest(const std::string& path);
void write_manifest(const DatasetManifest& m, const std::string& path);

// Decode (PNG or binary PGM), collapse to luma, bilinear-resize to
// target_size x target_size, values in [0,1]. target_size 0 keeps the
// source size.
Plane load_image(const std::string& path, int target_size);

// Concatenation preserving split, label, and order. Duplicate paths across
// inputs are a validation error.
DatasetManifest merge_manifests(const std::vector<DatasetManifest>& manifests, const std::string& name);

struct SynthConfig {
    int image_size = 64;
    int n_pairs = 200;
    int blob_count = 6;
    double artifact_amplitude = 0.08;
    int artifact_period = 2;
    double alpha = 0.5;
    std::uint64_t seed = 7;

    void validate() const;
};

struct SynthResult {
    DatasetManifest manifest;
    double clamp_fraction = 0.0;  // pixels clipped into [0,1] over all emitted images
};

// Desk-scale stand-in for a morph corpus. Bona fides are normalized sums of
// random Gaussian blobs (smooth, low frequency); morph i alpha-blends bona
// fides i and i+1 (mod n) and adds a sign-alternating checkerboard of the
// configured period and amplitude, so the class signal sits in the finest
// high-pass sub-bands. Images are emitted as 8-bit PGM under out_dir, split
// 70/15/15 train/val/test by pair index, fully determined by cfg.seed.
SynthResult synth_dataset(const SynthConfig& cfg, const std::string& out_dir);

}  // namespace morphdet::data
