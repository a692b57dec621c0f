#include "dmis/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "dmis/format.hpp"

namespace dmis::config {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void unknown_key(const std::string& section, const std::string& key) {
    fail(ErrorKind::InputError, "unknown key '" + key + "' in section '" + section + "'");
}

hpgrid::ScalarValue scalar_from_json(const ordered_json& v, const std::string& axis) {
    if (v.is_string()) return hpgrid::ScalarValue::token(v.get<std::string>());
    if (v.is_number_integer()) return hpgrid::ScalarValue::integer(v.get<std::int64_t>());
    if (v.is_number_float()) return hpgrid::ScalarValue::real(v.get<double>());
    fail(ErrorKind::InputError, "axis '" + axis + "' holds a non-scalar value");
}

hpgrid::HyperSpace parse_grid(const ordered_json& section) {
    std::vector<hpgrid::HyperAxis> axes;
    for (const auto& [name, values] : section.items()) {
        if (!values.is_array())
            fail(ErrorKind::InputError, "axis '" + name + "' must be a list");
        hpgrid::HyperAxis axis;
        axis.name = name;
        for (const auto& v : values) axis.values.push_back(scalar_from_json(v, name));
        axes.push_back(std::move(axis));
    }
    return hpgrid::HyperSpace(std::move(axes));
}

void parse_topology(const ordered_json& section, clustersim::ClusterTopology& topo) {
    for (const auto& [key, value] : section.items()) {
        if (key == "nodes") topo.node_count = value.get<int>();
        else if (key == "gpus_per_node") topo.gpus_per_node = value.get<int>();
        else if (key == "gpu_memory_bytes") topo.gpu_memory_bytes = value.get<std::int64_t>();
        else if (key == "intra_bandwidth") topo.intra_bandwidth = value.get<double>();
        else if (key == "intra_latency") topo.intra_latency = value.get<double>();
        else if (key == "inter_bandwidth") topo.inter_bandwidth = value.get<double>();
        else if (key == "inter_latency") topo.inter_latency = value.get<double>();
        else unknown_key("topology", key);
    }
    topo.validate();
}

void parse_cost(const ordered_json& section, costcal::CostParams& cost) {
    for (const auto& [key, value] : section.items()) {
        if (key == "t_step_base") cost.t_step_base = value.get<double>();
        else if (key == "sync_overhead_intra") cost.sync_overhead_intra = value.get<double>();
        else if (key == "sync_overhead_inter") cost.sync_overhead_inter = value.get<double>();
        else if (key == "beta_intra") cost.beta_intra = value.get<double>();
        else if (key == "beta_inter") cost.beta_inter = value.get<double>();
        else if (key == "grid_size") cost.grid_size = value.get<int>();
        else if (key == "heterogeneity") cost.heterogeneity = value.get<std::vector<double>>();
        else if (key == "epochs") cost.epochs = value.get<int>();
        else if (key == "samples_train") cost.samples_train = value.get<int>();
        else if (key == "grad_bytes") cost.grad_bytes = value.get<std::int64_t>();
        else unknown_key("cost", key);
    }
    cost.validate();
}

void parse_pipeline(const ordered_json& section, PipelineConfig& pipe) {
    for (const auto& [key, value] : section.items()) {
        if (key == "count") pipe.count = value.get<int>();
        else if (key == "dims") pipe.dims = value.get<std::array<std::int64_t, 3>>();
        else if (key == "seed") pipe.seed = value.get<std::uint64_t>();
        else if (key == "workers") pipe.workers = value.get<int>();
        else if (key == "ratios") pipe.ratios = value.get<std::array<double, 3>>();
        else if (key == "crop_depth") pipe.crop_depth = value.get<std::int64_t>();
        else if (key == "tumor_blobs") pipe.tumor_blobs = value.get<int>();
        else if (key == "crop") {
            auto mode = value.get<std::string>();
            if (mode == "leading") pipe.crop = datapipe::CropMode::Leading;
            else if (mode == "center") pipe.crop = datapipe::CropMode::Center;
            else fail(ErrorKind::InputError, "crop mode must be 'leading' or 'center'");
        } else {
            unknown_key("pipeline", key);
        }
    }
}

clustersim::Schedule parse_schedule(const ordered_json& section) {
    clustersim::Schedule schedule;
    if (!section.is_array())
        fail(ErrorKind::InputError, "section 'schedule' must be a list of assignments");
    for (const auto& item : section) {
        clustersim::TrialAssignment trial;
        for (const auto& [key, value] : item.items()) {
            if (key == "experiment") trial.experiment_id = value.get<int>();
            else if (key == "start") trial.start = value.get<double>();
            else if (key == "duration") trial.duration = value.get<double>();
            else if (key == "gpus") {
                for (const auto& g : value)
                    trial.gpus.push_back({g.at(0).get<int>(), g.at(1).get<int>()});
            } else {
                unknown_key("schedule", key);
            }
        }
        schedule.push_back(std::move(trial));
    }
    return schedule;
}

} // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        fail(ErrorKind::InputError, "config parse error: " + std::string(e.what()));
    }
    if (!j.is_object()) fail(ErrorKind::InputError, "config root must be an object");

    RunConfig cfg;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "grid") cfg.grid = parse_grid(value);
            else if (key == "topology") parse_topology(value, cfg.topology);
            else if (key == "cost") parse_cost(value, cfg.cost);
            else if (key == "pipeline") parse_pipeline(value, cfg.pipeline);
            else if (key == "loss") {
                for (const auto& [lkey, lvalue] : value.items()) {
                    if (lkey == "epsilon") cfg.loss_epsilon = lvalue.get<double>();
                    else unknown_key("loss", lkey);
                }
            }
            else if (key == "output") {
                for (const auto& [okey, ovalue] : value.items()) {
                    if (okey == "dir") cfg.output_dir = ovalue.get<std::string>();
                    else unknown_key("output", okey);
                }
            }
            else if (key == "schedule") cfg.injected_schedule = parse_schedule(value);
            else unknown_key("top level", key);
        }
    } catch (const ordered_json::exception& e) {
        fail(ErrorKind::InputError, "config field error: " + std::string(e.what()));
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoError, "cannot open config " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

} // namespace dmis::config
