#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dmis/error.hpp"

namespace dmis::archmodel {

// Channels-first tensor shape (C, H, W, D). The depth axis is the one the
// data pipeline crops (155 -> 152 at reference scale).
struct TensorShape {
    std::int64_t channels = 0;
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::int64_t depth = 0;

    std::int64_t elements() const { return channels * height * width * depth; }
    bool operator==(const TensorShape&) const = default;
    std::string str() const;
};

enum class LayerKind {
    Conv3d,
    TransposedConv3d,
    MaxPool3d,
    Concat,
    BatchNorm,
    Relu,
    Sigmoid,
};

const char* to_string(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    std::array<int, 3> kernel{1, 1, 1};
    std::array<int, 3> stride{1, 1, 1};
    int out_filters = 0;      // conv kinds only
    bool bias_enabled = false; // conv kinds only
    int concat_source = -1;   // concat only: index of an earlier layer
    std::string label;
};

// Counting conventions the source text leaves open. The defaults follow the
// common convention (biased convolutions, transposed convolutions that halve
// the filter count to match the target step before concatenation).
struct UnetOptions {
    bool conv_bias = true;
    bool transposed_same_width = false;
};

// Data-level description of the U-shaped network: an ordered layer list plus
// skip links from the analysis path to the synthesis path. Descriptors are
// immutable after construction and never execute anything.
struct ArchDescriptor {
    std::vector<LayerSpec> layers;
    std::vector<std::pair<int, int>> skip_links; // encoder layer -> decoder concat layer
    int resolution_steps = 0;
    int base_filters = 0;
    int in_channels = 0;
    int out_channels = 0;
    UnetOptions options;
};

// Builds the four-step U-Net: per analysis step two 3x3x3 convolutions, each
// followed by batch normalization and a ReLU, with 2x2x2 stride-2 max pooling
// between steps; per synthesis transition a 2x2x2 stride-2 transposed
// convolution, concatenation with the matching analysis output, and two more
// conv+bn+relu blocks; finally a 1x1x1 convolution and a sigmoid. Filters at
// analysis step s are base_filters * 2^(s-1).
ArchDescriptor build_unet3d(int base_filters = 8, int steps = 4, int in_channels = 4,
                            int out_channels = 1, UnetOptions options = {});

struct ShapeTrace {
    std::vector<TensorShape> per_layer; // one entry per layer, in order
    TensorShape output;
};

// Walks the layer list propagating shapes. 3x3x3 convolutions are
// same-padded, pooling halves and transposed convolution doubles every
// spatial dimension, concatenation sums channels. A spatial dimension that
// cannot be halved raises ShapeError naming the layer and dimension.
ShapeTrace propagate_shapes(const ArchDescriptor& desc, const TensorShape& input);

struct LayerParams {
    std::int64_t weights = 0;
    std::int64_t biases = 0;
    std::int64_t bn_scale_shift = 0;
    std::int64_t bn_running_stats = 0;

    std::int64_t total() const { return weights + biases + bn_scale_shift + bn_running_stats; }
};

struct ParamBreakdown {
    std::vector<LayerParams> per_layer;
    LayerParams sums;
    std::int64_t total = 0;
};

// Parameter arithmetic: a k^3 convolution holds k^3*Cin*Cout weights plus
// Cout biases when enabled; a transposed convolution 8*Cin*Cout; batch
// normalization 2 scale/shift parameters per channel plus 2 running
// statistics per channel when counted.
ParamBreakdown count_params(const ArchDescriptor& desc, bool include_bn_running_stats = true);

// Upper-bound activation footprint: batch * sum of per-layer output elements
// * bytes_per_element, plus parameter bytes. Raises RangeError when the
// estimate does not fit in a signed 64-bit byte count.
std::int64_t estimate_activation_memory(const ArchDescriptor& desc, const TensorShape& input,
                                        std::int64_t batch, int bytes_per_element = 4);

} // namespace dmis::archmodel
