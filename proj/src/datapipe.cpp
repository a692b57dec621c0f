#include "dmis/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dmis/rng.hpp"

namespace dmis::datapipe {

namespace {

// Smooth field: coarse lattice of uniform noise, trilinearly upsampled.
std::vector<float> smooth_field(Rng& rng, const std::array<std::int64_t, 3>& dims) {
    constexpr std::int64_t kLattice = 5;
    std::array<std::int64_t, 3> grid{};
    for (int a = 0; a < 3; ++a) grid[a] = std::min<std::int64_t>(kLattice, dims[a]);

    std::vector<double> lattice(static_cast<std::size_t>(grid[0] * grid[1] * grid[2]));
    for (auto& v : lattice) v = rng.uniform(-1.0, 1.0);
    auto at = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
        return lattice[static_cast<std::size_t>((i * grid[1] + j) * grid[2] + k)];
    };

    std::vector<float> field(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]));
    std::size_t out = 0;
    for (std::int64_t h = 0; h < dims[0]; ++h) {
        double x = dims[0] > 1 ? double(h) / double(dims[0] - 1) * (grid[0] - 1) : 0.0;
        std::int64_t i0 = std::min<std::int64_t>(std::int64_t(x), grid[0] - 2 >= 0 ? grid[0] - 2 : 0);
        double fx = grid[0] > 1 ? x - double(i0) : 0.0;
        for (std::int64_t w = 0; w < dims[1]; ++w) {
            double y = dims[1] > 1 ? double(w) / double(dims[1] - 1) * (grid[1] - 1) : 0.0;
            std::int64_t j0 = std::min<std::int64_t>(std::int64_t(y), grid[1] - 2 >= 0 ? grid[1] - 2 : 0);
            double fy = grid[1] > 1 ? y - double(j0) : 0.0;
            for (std::int64_t d = 0; d < dims[2]; ++d) {
                double z = dims[2] > 1 ? double(d) / double(dims[2] - 1) * (grid[2] - 1) : 0.0;
                std::int64_t k0 = std::min<std::int64_t>(std::int64_t(z), grid[2] - 2 >= 0 ? grid[2] - 2 : 0);
                double fz = grid[2] > 1 ? z - double(k0) : 0.0;
                std::int64_t i1 = std::min(i0 + 1, grid[0] - 1);
                std::int64_t j1 = std::min(j0 + 1, grid[1] - 1);
                std::int64_t k1 = std::min(k0 + 1, grid[2] - 1);
                double c00 = at(i0, j0, k0) * (1 - fx) + at(i1, j0, k0) * fx;
                double c10 = at(i0, j1, k0) * (1 - fx) + at(i1, j1, k0) * fx;
                double c01 = at(i0, j0, k1) * (1 - fx) + at(i1, j0, k1) * fx;
                double c11 = at(i0, j1, k1) * (1 - fx) + at(i1, j1, k1) * fx;
                double c0 = c00 * (1 - fy) + c10 * fy;
                double c1 = c01 * (1 - fy) + c11 * fy;
                field[out++] = static_cast<float>(c0 * (1 - fz) + c1 * fz);
            }
        }
    }
    return field;
}

} // namespace

RawVolume synth_volume(std::uint64_t seed, std::array<std::int64_t, 3> dims,
                       int tumor_blob_count, std::string id) {
    for (std::int64_t d : dims)
        if (d < 8) fail(ErrorKind::InvalidDims, "synthetic volumes need dims >= (8,8,8)");
    if (tumor_blob_count < 0)
        fail(ErrorKind::InvalidCount, "tumor_blob_count must be >= 0");

    Rng rng(seed);
    RawVolume volume;
    volume.id = id.empty() ? "synth-" + std::to_string(seed) : std::move(id);
    volume.dims = dims;
    for (auto& channel : volume.channels) channel = smooth_field(rng, dims);

    volume.labels.assign(static_cast<std::size_t>(volume.voxels()), 0);
    for (int blob = 0; blob < tumor_blob_count; ++blob) {
        std::array<double, 3> center{}, radius{};
        for (int a = 0; a < 3; ++a) {
            center[a] = rng.uniform(0.25, 0.75) * double(dims[a]);
            radius[a] = rng.uniform(0.08, 0.22) * double(dims[a]);
        }
        auto label = static_cast<std::uint8_t>(1 + blob % 3);
        for (std::int64_t h = 0; h < dims[0]; ++h)
            for (std::int64_t w = 0; w < dims[1]; ++w)
                for (std::int64_t d = 0; d < dims[2]; ++d) {
                    double dh = (double(h) - center[0]) / radius[0];
                    double dw = (double(w) - center[1]) / radius[1];
                    double dd = (double(d) - center[2]) / radius[2];
                    if (dh * dh + dw * dw + dd * dd <= 1.0)
                        volume.labels[volume.index(h, w, d)] = label;
                }
    }
    return volume;
}

RawVolume standardize(RawVolume volume) {
    std::int64_t n = volume.voxels();
    if (n < 2) fail(ErrorKind::InvalidDims, "standardization needs more than one voxel");
    for (auto& channel : volume.channels) {
        double sum = 0.0;
        for (float v : channel) sum += v;
        double mean = sum / double(n);
        double var_sum = 0.0;
        for (float v : channel) {
            double d = v - mean;
            var_sum += d * d;
        }
        double variance = var_sum / double(n);
        if (variance == 0.0) {
            std::fill(channel.begin(), channel.end(), 0.0f);
            continue;
        }
        double inv_std = 1.0 / std::sqrt(variance);
        for (float& v : channel) v = static_cast<float>((v - mean) * inv_std);
    }
    return volume;
}

RawVolume crop_depth(RawVolume volume, std::int64_t target_depth, CropMode mode) {
    std::int64_t depth = volume.dims[2];
    if (target_depth < 1 || target_depth > depth)
        fail(ErrorKind::CropError, "target depth " + std::to_string(target_depth) +
                                       " exceeds volume depth " + std::to_string(depth));
    if (target_depth == depth) return volume;

    std::int64_t start = mode == CropMode::Center ? (depth - target_depth) / 2 : 0;
    RawVolume out;
    out.id = std::move(volume.id);
    out.dims = {volume.dims[0], volume.dims[1], target_depth};
    std::size_t total = static_cast<std::size_t>(out.voxels());

    auto crop_plane = [&](const auto& src, auto& dst) {
        dst.resize(total);
        std::size_t o = 0;
        for (std::int64_t h = 0; h < out.dims[0]; ++h)
            for (std::int64_t w = 0; w < out.dims[1]; ++w) {
                std::size_t base = static_cast<std::size_t>((h * volume.dims[1] + w) * depth + start);
                for (std::int64_t d = 0; d < target_depth; ++d) dst[o++] = src[base + d];
            }
    };
    for (int c = 0; c < kModalityCount; ++c) crop_plane(volume.channels[c], out.channels[c]);
    crop_plane(volume.labels, out.labels);
    return out;
}

std::vector<float> collapse_labels(const std::vector<std::uint8_t>& labels) {
    std::vector<float> mask(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] > 3)
            fail(ErrorKind::LabelError,
                 "label " + std::to_string(labels[i]) + " outside {0,1,2,3}");
        mask[i] = labels[i] == 0 ? 0.0f : 1.0f;
    }
    return mask;
}

ProcessedSample to_channels_first(const RawVolume& volume) {
    for (const auto& channel : volume.channels)
        if (channel.size() != static_cast<std::size_t>(volume.voxels()))
            fail(ErrorKind::LayoutError, "volume must carry exactly 4 complete channels");

    ProcessedSample sample;
    sample.id = volume.id;
    sample.image_dims = {kModalityCount, volume.dims[0], volume.dims[1], volume.dims[2]};
    sample.image.reserve(static_cast<std::size_t>(volume.voxels()) * kModalityCount);
    for (const auto& channel : volume.channels)
        sample.image.insert(sample.image.end(), channel.begin(), channel.end());

    sample.mask_dims = {1, volume.dims[0], volume.dims[1], volume.dims[2]};
    sample.mask = collapse_labels(volume.labels);
    return sample;
}

SplitIndices split_dataset(int n, std::array<double, 3> ratios, std::uint64_t seed) {
    if (n < 3) fail(ErrorKind::SplitError, "need at least 3 samples to split");
    double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9)
        fail(ErrorKind::SplitError, "split ratios must sum to 1");
    for (double r : ratios)
        if (r < 0.0) fail(ErrorKind::SplitError, "split ratios must be non-negative");

    auto train_count = static_cast<int>(std::floor(ratios[0] * n));
    auto val_count = static_cast<int>(std::floor(ratios[1] * n));
    int test_count = n - train_count - val_count;

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    SplitIndices split;
    split.train.assign(order.begin(), order.begin() + train_count);
    split.val.assign(order.begin() + train_count, order.begin() + train_count + val_count);
    split.test.assign(order.begin() + train_count + val_count, order.end());
    (void)test_count;
    return split;
}

} // namespace dmis::datapipe
