#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dmis/archmodel.hpp"
#include "dmis/costcal.hpp"
#include "dmis/reference.hpp"

namespace dmis::report {

struct ReportRow {
    int n_gpus = 1;
    double data_elapsed = 0.0;
    double data_speedup = 1.0;
    double exp_elapsed = 0.0;
    double exp_speedup = 1.0;
    std::optional<double> data_residual; // prediction vs reference, relative
    std::optional<double> exp_residual;
    std::optional<double> data_utilization; // mean across GPUs
    std::optional<double> exp_utilization;
};

struct Report {
    std::vector<ReportRow> rows;
    bool predicted = false; // rows carry model output rather than reference passthrough
};

// Reference passthrough: one row per GPU count, values exactly as bundled.
Report reference_report(const std::vector<reference::Entry>& table);

// Model prediction with residuals against the given reference.
Report predicted_report(const costcal::CostParams& params,
                        const std::vector<reference::Entry>& table);

// Writes elapsed and speedup CSVs (n, data, experiment) plus a minimal SVG
// line chart for each; returns the written paths.
std::vector<std::filesystem::path> emit_plot_data(const Report& report,
                                                  const std::filesystem::path& out_dir);

void write_report_csv(const Report& report, const std::filesystem::path& path);

struct MemoryFeasibility {
    bool pass = false;
    std::int64_t estimate_bytes = 0;
    std::int64_t capacity_bytes = 0;
    std::int64_t headroom_bytes = 0; // negative when over capacity
};

// Compares the activation-memory estimate for one replica against the GPU
// memory of the topology.
MemoryFeasibility memory_feasibility_check(const archmodel::ArchDescriptor& desc,
                                           const archmodel::TensorShape& input,
                                           std::int64_t per_replica_batch,
                                           const clustersim::ClusterTopology& topo);

} // namespace dmis::report
