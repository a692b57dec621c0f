#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dmis/error.hpp"
#include "dmis/hpgrid.hpp"

namespace dmis::clustersim {

// Nodes x GPUs-per-node with memory and link characteristics. The reference
// preset models 4-GPU nodes with 16 GiB devices.
struct ClusterTopology {
    int node_count = 1;
    int gpus_per_node = 4;
    std::int64_t gpu_memory_bytes = 16ll * 1024 * 1024 * 1024;
    double intra_bandwidth = 150.0e9; // bytes/s
    double intra_latency = 5.0e-6;    // s
    double inter_bandwidth = 12.5e9;
    double inter_latency = 25.0e-6;

    int total_gpus() const { return node_count * gpus_per_node; }

    void validate() const;

    // Smallest preset that provides n GPUs in 4-GPU nodes.
    static ClusterTopology v100_preset(int n_gpus, int gpus_per_node = 4);
};

enum class StrategyKind {
    Sequential,
    SingleNodeDataParallel,
    MultiNodeDataParallel,
    ExperimentParallel,
};

const char* to_string(StrategyKind kind);

// Case split for the data-parallel pipeline: one device runs sequentially,
// up to a node's worth of devices stays on one machine, anything larger
// spans nodes.
StrategyKind select_parallelism_level(int n, int gpus_per_node);

struct GpuId {
    int node = 0;
    int slot = 0;
    bool operator==(const GpuId&) const = default;
};

struct TrialAssignment {
    int experiment_id = 0;
    std::vector<GpuId> gpus;
    double start = 0.0;
    double duration = 0.0;

    double finish() const { return start + duration; }
};

using Schedule = std::vector<TrialAssignment>;

// Supplies the modeled duration of one trial at a given replica width.
using DurationOracle = std::function<double(const hpgrid::ExperimentSpec&, int width)>;

struct GpusPerTrialPolicy {
    enum class Mode { Fixed, Auto };
    Mode mode = Mode::Auto;
    int k = 1;

    static GpusPerTrialPolicy fixed(int k) { return {Mode::Fixed, k}; }
    static GpusPerTrialPolicy auto_size() { return {Mode::Auto, 1}; }

    int group_size(int total_gpus, std::size_t experiment_count) const;
};

// Serial chain: every experiment occupies all GPUs, trial i starts when
// trial i-1 finishes.
Schedule plan_data_parallel(std::span<const hpgrid::ExperimentSpec> specs,
                            const ClusterTopology& topo, const DurationOracle& cost);

// Greedy list scheduling in spec-id order: each trial takes the earliest
// available GPU group of the required size, ties broken by lowest node then
// slot index. Groups of at most a node's width never cross node boundaries.
Schedule plan_experiment_parallel(std::span<const hpgrid::ExperimentSpec> specs,
                                  const ClusterTopology& topo, const DurationOracle& cost,
                                  GpusPerTrialPolicy policy = GpusPerTrialPolicy::auto_size());

struct TraceEvent {
    double time = 0.0;
    GpuId gpu; // lowest-indexed GPU of the trial's group
    int experiment_id = 0;
    bool is_start = false;
};

struct MakespanResult {
    double makespan = 0.0;
    Schedule assignments;
    std::vector<double> gpu_utilization; // node-major, one entry per GPU
    std::vector<TraceEvent> trace;
};

// Deterministic replay of a schedule: validates resource exclusivity, orders
// the event trace, and derives makespan and per-GPU utilization.
MakespanResult simulate(const Schedule& schedule, const ClusterTopology& topo);

// Ratio of a baseline elapsed time to the measured one.
double speedup(double t_base, double t_n);

} // namespace dmis::clustersim
