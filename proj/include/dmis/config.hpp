#pragma once

#include <optional>
#include <string>

#include "dmis/clustersim.hpp"
#include "dmis/costcal.hpp"
#include "dmis/datapipe.hpp"
#include "dmis/hpgrid.hpp"

namespace dmis::config {

struct PipelineConfig {
    int count = 16;
    std::array<std::int64_t, 3> dims{24, 24, 16};
    std::uint64_t seed = 7;
    int workers = 1;
    std::array<double, 3> ratios{0.70, 0.15, 0.15};
    datapipe::CropMode crop = datapipe::CropMode::Leading;
    std::int64_t crop_depth = 0; // 0 keeps the full depth
    int tumor_blobs = 2;
};

// Hierarchical run configuration with strict parsing: any key the schema
// does not know is rejected. Defaults reproduce the deployment constants
// (4-GPU nodes, per-replica batch 2, base learning rate 1e-4, 250 epochs,
// epsilon 0.1, 70/15/15 split).
struct RunConfig {
    std::optional<hpgrid::HyperSpace> grid;
    clustersim::ClusterTopology topology;
    costcal::CostParams cost;
    PipelineConfig pipeline;
    double loss_epsilon = 0.1;
    std::string output_dir;
    std::optional<clustersim::Schedule> injected_schedule;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_json_text(const std::string& text);
};

} // namespace dmis::config
