#include "dmis/archmodel.hpp"

#include <limits>

namespace dmis::archmodel {

std::string TensorShape::str() const {
    return "(" + std::to_string(channels) + "," + std::to_string(height) + "," +
           std::to_string(width) + "," + std::to_string(depth) + ")";
}

const char* to_string(LayerKind kind) {
    switch (kind) {
    case LayerKind::Conv3d: return "conv3d";
    case LayerKind::TransposedConv3d: return "transposed_conv3d";
    case LayerKind::MaxPool3d: return "maxpool3d";
    case LayerKind::Concat: return "concat";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::Relu: return "relu";
    case LayerKind::Sigmoid: return "sigmoid";
    }
    return "unknown";
}

namespace {

int step_filters(int base_filters, int step) {
    return base_filters << (step - 1); // base * 2^(s-1)
}

void push_conv_block(ArchDescriptor& desc, int filters, const std::string& label, bool bias) {
    desc.layers.push_back({LayerKind::Conv3d, {3, 3, 3}, {1, 1, 1}, filters, bias, -1, label});
    desc.layers.push_back({LayerKind::BatchNorm, {1, 1, 1}, {1, 1, 1}, 0, false, -1, label + "_bn"});
    desc.layers.push_back({LayerKind::Relu, {1, 1, 1}, {1, 1, 1}, 0, false, -1, label + "_relu"});
}

} // namespace

ArchDescriptor build_unet3d(int base_filters, int steps, int in_channels, int out_channels,
                            UnetOptions options) {
    if (base_filters < 1) fail(ErrorKind::InvalidArch, "base_filters must be >= 1");
    if (steps < 2) fail(ErrorKind::InvalidArch, "a U-shaped network needs at least 2 steps");
    if (in_channels < 1 || out_channels < 1)
        fail(ErrorKind::InvalidArch, "channel counts must be >= 1");

    ArchDescriptor desc;
    desc.resolution_steps = steps;
    desc.base_filters = base_filters;
    desc.in_channels = in_channels;
    desc.out_channels = out_channels;
    desc.options = options;

    // Analysis path. Skip sources are the final ReLU of each step before pooling.
    std::vector<int> skip_source(steps, -1);
    for (int s = 1; s <= steps; ++s) {
        int f = step_filters(base_filters, s);
        std::string tag = "enc" + std::to_string(s);
        push_conv_block(desc, f, tag + "_conv1", options.conv_bias);
        push_conv_block(desc, f, tag + "_conv2", options.conv_bias);
        skip_source[s - 1] = static_cast<int>(desc.layers.size()) - 1;
        if (s < steps) {
            desc.layers.push_back({LayerKind::MaxPool3d, {2, 2, 2}, {2, 2, 2}, 0, false, -1,
                                   tag + "_pool"});
        }
    }

    // Synthesis path, walking back from the bottleneck.
    for (int s = steps - 1; s >= 1; --s) {
        int f = step_filters(base_filters, s);
        int up_filters = options.transposed_same_width ? step_filters(base_filters, s + 1) : f;
        std::string tag = "dec" + std::to_string(s);
        desc.layers.push_back({LayerKind::TransposedConv3d, {2, 2, 2}, {2, 2, 2}, up_filters,
                               options.conv_bias, -1, tag + "_up"});
        int concat_index = static_cast<int>(desc.layers.size());
        desc.layers.push_back({LayerKind::Concat, {1, 1, 1}, {1, 1, 1}, 0, false,
                               skip_source[s - 1], tag + "_concat"});
        desc.skip_links.emplace_back(skip_source[s - 1], concat_index);
        push_conv_block(desc, f, tag + "_conv1", options.conv_bias);
        push_conv_block(desc, f, tag + "_conv2", options.conv_bias);
    }

    desc.layers.push_back({LayerKind::Conv3d, {1, 1, 1}, {1, 1, 1}, out_channels,
                           options.conv_bias, -1, "head_conv"});
    desc.layers.push_back({LayerKind::Sigmoid, {1, 1, 1}, {1, 1, 1}, 0, false, -1, "head_sigmoid"});
    return desc;
}

ShapeTrace propagate_shapes(const ArchDescriptor& desc, const TensorShape& input) {
    if (desc.layers.empty()) fail(ErrorKind::InvalidArch, "descriptor has no layers");
    if (input.channels != desc.in_channels)
        fail(ErrorKind::ShapeError, "input has " + std::to_string(input.channels) +
                                        " channels, descriptor expects " +
                                        std::to_string(desc.in_channels));
    if (input.height < 1 || input.width < 1 || input.depth < 1)
        fail(ErrorKind::ShapeError, "input dimensions must be >= 1");

    ShapeTrace trace;
    trace.per_layer.reserve(desc.layers.size());
    TensorShape cur = input;

    for (std::size_t i = 0; i < desc.layers.size(); ++i) {
        const LayerSpec& layer = desc.layers[i];
        switch (layer.kind) {
        case LayerKind::Conv3d:
            cur.channels = layer.out_filters; // same padding keeps spatial dims
            break;
        case LayerKind::MaxPool3d: {
            auto halve = [&](std::int64_t v, const char* axis) {
                if (v % 2 != 0)
                    fail(ErrorKind::ShapeError,
                         "layer " + std::to_string(i) + " (" + layer.label + "): " + axis +
                             " dimension " + std::to_string(v) + " is not divisible by 2");
                return v / 2;
            };
            cur.height = halve(cur.height, "height");
            cur.width = halve(cur.width, "width");
            cur.depth = halve(cur.depth, "depth");
            break;
        }
        case LayerKind::TransposedConv3d:
            cur.channels = layer.out_filters;
            cur.height *= 2;
            cur.width *= 2;
            cur.depth *= 2;
            break;
        case LayerKind::Concat: {
            if (layer.concat_source < 0 || layer.concat_source >= static_cast<int>(i))
                fail(ErrorKind::ArchError, "concat at layer " + std::to_string(i) +
                                               " references layer " +
                                               std::to_string(layer.concat_source));
            const TensorShape& other = trace.per_layer[layer.concat_source];
            if (other.height != cur.height || other.width != cur.width || other.depth != cur.depth)
                fail(ErrorKind::ShapeError, "concat at layer " + std::to_string(i) +
                                                " joins mismatched shapes " + other.str() +
                                                " and " + cur.str());
            cur.channels += other.channels;
            break;
        }
        case LayerKind::BatchNorm:
        case LayerKind::Relu:
        case LayerKind::Sigmoid:
            break;
        }
        trace.per_layer.push_back(cur);
    }
    trace.output = cur;
    return trace;
}

ParamBreakdown count_params(const ArchDescriptor& desc, bool include_bn_running_stats) {
    ParamBreakdown breakdown;
    breakdown.per_layer.reserve(desc.layers.size());

    // Channel propagation is enough for parameter arithmetic.
    std::vector<std::int64_t> channels_at(desc.layers.size(), 0);
    std::int64_t cur = desc.in_channels;

    for (std::size_t i = 0; i < desc.layers.size(); ++i) {
        const LayerSpec& layer = desc.layers[i];
        LayerParams p;
        switch (layer.kind) {
        case LayerKind::Conv3d:
        case LayerKind::TransposedConv3d: {
            std::int64_t k =
                std::int64_t(layer.kernel[0]) * layer.kernel[1] * layer.kernel[2];
            p.weights = k * cur * layer.out_filters;
            if (layer.bias_enabled) p.biases = layer.out_filters;
            cur = layer.out_filters;
            break;
        }
        case LayerKind::BatchNorm:
            p.bn_scale_shift = 2 * cur;
            if (include_bn_running_stats) p.bn_running_stats = 2 * cur;
            break;
        case LayerKind::Concat: {
            if (layer.concat_source < 0 || layer.concat_source >= static_cast<int>(i))
                fail(ErrorKind::ArchError, "concat at layer " + std::to_string(i) +
                                               " has unresolved source");
            cur += channels_at[layer.concat_source];
            break;
        }
        case LayerKind::MaxPool3d:
        case LayerKind::Relu:
        case LayerKind::Sigmoid:
            break;
        }
        channels_at[i] = cur;
        breakdown.sums.weights += p.weights;
        breakdown.sums.biases += p.biases;
        breakdown.sums.bn_scale_shift += p.bn_scale_shift;
        breakdown.sums.bn_running_stats += p.bn_running_stats;
        breakdown.per_layer.push_back(p);
    }
    breakdown.total = breakdown.sums.total();
    return breakdown;
}

std::int64_t estimate_activation_memory(const ArchDescriptor& desc, const TensorShape& input,
                                        std::int64_t batch, int bytes_per_element) {
    if (batch < 1) fail(ErrorKind::InvalidCount, "batch must be >= 1");
    if (bytes_per_element < 1) fail(ErrorKind::InvalidCount, "bytes_per_element must be >= 1");

    ShapeTrace trace = propagate_shapes(desc, input);
    ParamBreakdown params = count_params(desc, true);

    __int128 total = static_cast<__int128>(params.total) * bytes_per_element;
    for (const TensorShape& shape : trace.per_layer)
        total += static_cast<__int128>(shape.elements()) * batch * bytes_per_element;

    if (total > std::numeric_limits<std::int64_t>::max())
        fail(ErrorKind::RangeError, "activation estimate exceeds 2^63-1 bytes");
    return static_cast<std::int64_t>(total);
}

} // namespace dmis::archmodel
