#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dmis/error.hpp"

namespace dmis::datapipe {

inline constexpr int kModalityCount = 4;

// A raw multi-modal volume: four real-valued channels plus an integer label
// sub-volume with values in {0,1,2,3}, all sharing spatial dims (H, W, D).
struct RawVolume {
    std::string id;
    std::array<std::int64_t, 3> dims{0, 0, 0}; // H, W, D
    std::array<std::vector<float>, kModalityCount> channels;
    std::vector<std::uint8_t> labels;

    std::int64_t voxels() const { return dims[0] * dims[1] * dims[2]; }
    std::size_t index(std::int64_t h, std::int64_t w, std::int64_t d) const {
        return static_cast<std::size_t>((h * dims[1] + w) * dims[2] + d);
    }
};

// Channels-first sample ready for packing: image (4, H, W, D') and binary
// mask (1, H, W, D').
struct ProcessedSample {
    std::string id;
    std::array<std::int64_t, 4> image_dims{0, 0, 0, 0};
    std::vector<float> image;
    std::array<std::int64_t, 4> mask_dims{0, 0, 0, 0};
    std::vector<float> mask;

    bool operator==(const ProcessedSample&) const = default;
};

enum class CropMode { Leading, Center };

// Deterministic stand-in for the real MRI data: smooth per-channel random
// fields plus ellipsoidal foreground blobs labelled 1..3 on background 0.
RawVolume synth_volume(std::uint64_t seed, std::array<std::int64_t, 3> dims,
                       int tumor_blob_count, std::string id = "");

// Per-channel standardization to mean 0 and unit variance (population
// statistics, double accumulation). Constant channels map to all-zeros.
RawVolume standardize(RawVolume volume);

// Crops the depth axis to target_depth, keeping the leading slices by
// default or a centered window when requested.
RawVolume crop_depth(RawVolume volume, std::int64_t target_depth = 152,
                     CropMode mode = CropMode::Leading);

// Collapses 4-class labels to a binary mask: 0 stays background, {1,2,3}
// join into the positive class.
std::vector<float> collapse_labels(const std::vector<std::uint8_t>& labels);

// Rearranges a raw volume into the channels-first sample layout and attaches
// the collapsed mask.
ProcessedSample to_channels_first(const RawVolume& volume);

struct SplitIndices {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
};

// Seeded shuffle split with floor sizing: train = floor(r0*n),
// val = floor(r1*n), test takes the remainder.
SplitIndices split_dataset(int n, std::array<double, 3> ratios = {0.70, 0.15, 0.15},
                           std::uint64_t seed = 0);

} // namespace dmis::datapipe
