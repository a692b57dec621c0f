#include "dmis/clustersim.hpp"

#include <algorithm>
#include <cmath>

namespace dmis::clustersim {

void ClusterTopology::validate() const {
    if (node_count < 1 || gpus_per_node < 1)
        fail(ErrorKind::InvalidCount, "topology needs at least one node and one GPU per node");
    if (gpu_memory_bytes < 1) fail(ErrorKind::InvalidCount, "gpu_memory_bytes must be positive");
    if (!(intra_bandwidth > 0.0) || !(inter_bandwidth > 0.0))
        fail(ErrorKind::InvalidValue, "bandwidths must be positive");
    if (inter_bandwidth > intra_bandwidth)
        fail(ErrorKind::InvalidValue, "inter-node bandwidth cannot exceed intra-node bandwidth");
}

ClusterTopology ClusterTopology::v100_preset(int n_gpus, int gpus_per_node) {
    if (n_gpus < 1 || gpus_per_node < 1)
        fail(ErrorKind::InvalidCount, "GPU counts must be positive");
    ClusterTopology topo;
    topo.gpus_per_node = std::min(n_gpus, gpus_per_node);
    topo.node_count = (n_gpus + gpus_per_node - 1) / gpus_per_node;
    return topo;
}

const char* to_string(StrategyKind kind) {
    switch (kind) {
    case StrategyKind::Sequential: return "sequential";
    case StrategyKind::SingleNodeDataParallel: return "single_node_data_parallel";
    case StrategyKind::MultiNodeDataParallel: return "multi_node_data_parallel";
    case StrategyKind::ExperimentParallel: return "experiment_parallel";
    }
    return "unknown";
}

StrategyKind select_parallelism_level(int n, int gpus_per_node) {
    if (n < 1 || gpus_per_node < 1)
        fail(ErrorKind::InvalidCount, "GPU counts must be positive");
    if (n == 1) return StrategyKind::Sequential;
    if (n <= gpus_per_node) return StrategyKind::SingleNodeDataParallel;
    return StrategyKind::MultiNodeDataParallel;
}

int GpusPerTrialPolicy::group_size(int total_gpus, std::size_t experiment_count) const {
    if (mode == Mode::Fixed) {
        if (k < 1) fail(ErrorKind::InvalidCount, "fixed group size must be >= 1");
        if (k > total_gpus)
            fail(ErrorKind::InfeasibleAssignment,
                 "group size " + std::to_string(k) + " exceeds " +
                     std::to_string(total_gpus) + " available GPUs");
        return k;
    }
    if (experiment_count == 0) return 1;
    int g = total_gpus / static_cast<int>(experiment_count);
    return std::max(1, g);
}

Schedule plan_data_parallel(std::span<const hpgrid::ExperimentSpec> specs,
                            const ClusterTopology& topo, const DurationOracle& cost) {
    topo.validate();
    if (specs.empty()) fail(ErrorKind::EmptyGrid, "no experiments to schedule");

    std::vector<GpuId> all;
    for (int node = 0; node < topo.node_count; ++node)
        for (int slot = 0; slot < topo.gpus_per_node; ++slot) all.push_back({node, slot});

    Schedule schedule;
    double clock = 0.0;
    for (const auto& spec : specs) {
        double duration = cost(spec, topo.total_gpus());
        schedule.push_back({spec.id, all, clock, duration});
        clock += duration;
    }
    return schedule;
}

namespace {

// Earliest-available group selection over per-GPU availability times.
struct GroupPicker {
    const ClusterTopology& topo;
    std::vector<double> available; // node-major
    std::vector<int> slot_scratch;
    std::vector<int> best_slot_scratch;
    std::vector<GpuId> order_scratch;

    explicit GroupPicker(const ClusterTopology& t)
        : topo(t), available(static_cast<std::size_t>(t.total_gpus()), 0.0) {
        slot_scratch.reserve(static_cast<std::size_t>(t.gpus_per_node));
        best_slot_scratch.reserve(static_cast<std::size_t>(t.gpus_per_node));
        order_scratch.reserve(static_cast<std::size_t>(t.total_gpus()));
    }

    double& at(int node, int slot) {
        return available[static_cast<std::size_t>(node) * topo.gpus_per_node + slot];
    }

    // k slots within one node: per node take the k earliest slots; the group
    // is ready at the k-th earliest availability. Lowest node index wins ties.
    std::pair<std::vector<GpuId>, double> pick_within_node(int k) {
        int best_node = -1;
        double best_ready = 0.0;
        for (int node = 0; node < topo.node_count; ++node) {
            slot_scratch.resize(static_cast<std::size_t>(topo.gpus_per_node));
            for (int s = 0; s < topo.gpus_per_node; ++s)
                slot_scratch[static_cast<std::size_t>(s)] = s;
            std::stable_sort(slot_scratch.begin(), slot_scratch.end(), [&](int a, int b) {
                return at(node, a) < at(node, b);
            });
            slot_scratch.resize(static_cast<std::size_t>(k));
            double ready = at(node, slot_scratch.back());
            if (best_node < 0 || ready < best_ready) {
                best_node = node;
                best_ready = ready;
                best_slot_scratch = slot_scratch;
            }
        }
        std::sort(best_slot_scratch.begin(), best_slot_scratch.end());
        std::vector<GpuId> group;
        group.reserve(static_cast<std::size_t>(k));
        for (int s : best_slot_scratch) group.push_back({best_node, s});
        return {std::move(group), best_ready};
    }

    // k slots anywhere: the k earliest GPUs by (availability, node, slot).
    std::pair<std::vector<GpuId>, double> pick_anywhere(int k) {
        order_scratch.clear();
        for (int node = 0; node < topo.node_count; ++node)
            for (int slot = 0; slot < topo.gpus_per_node; ++slot)
                order_scratch.push_back({node, slot});
        std::stable_sort(order_scratch.begin(), order_scratch.end(),
                         [&](const GpuId& a, const GpuId& b) {
                             return at(a.node, a.slot) < at(b.node, b.slot);
                         });
        order_scratch.resize(static_cast<std::size_t>(k));
        double ready = 0.0;
        for (const GpuId& g : order_scratch) ready = std::max(ready, at(g.node, g.slot));
        std::sort(order_scratch.begin(), order_scratch.end(),
                  [](const GpuId& a, const GpuId& b) {
                      return a.node != b.node ? a.node < b.node : a.slot < b.slot;
                  });
        std::vector<GpuId> group(order_scratch.begin(), order_scratch.end());
        return {std::move(group), ready};
    }

    void occupy(const std::vector<GpuId>& group, double until) {
        for (const GpuId& g : group) at(g.node, g.slot) = until;
    }
};

} // namespace

Schedule plan_experiment_parallel(std::span<const hpgrid::ExperimentSpec> specs,
                                  const ClusterTopology& topo, const DurationOracle& cost,
                                  GpusPerTrialPolicy policy) {
    topo.validate();
    if (specs.empty()) fail(ErrorKind::EmptyGrid, "no experiments to schedule");

    int width = policy.group_size(topo.total_gpus(), specs.size());
    GroupPicker picker(topo);
    Schedule schedule;
    for (const auto& spec : specs) {
        auto [group, ready] = width <= topo.gpus_per_node ? picker.pick_within_node(width)
                                                          : picker.pick_anywhere(width);
        double duration = cost(spec, width);
        picker.occupy(group, ready + duration);
        schedule.push_back({spec.id, std::move(group), ready, duration});
    }
    return schedule;
}

MakespanResult simulate(const Schedule& schedule, const ClusterTopology& topo) {
    topo.validate();
    MakespanResult result;
    result.assignments = schedule;

    int total = topo.total_gpus();
    std::vector<std::vector<std::pair<double, double>>> busy(static_cast<std::size_t>(total));
    for (const TrialAssignment& trial : schedule) {
        if (trial.gpus.empty())
            fail(ErrorKind::ScheduleConflict,
                 "trial " + std::to_string(trial.experiment_id) + " has an empty GPU set");
        if (trial.duration < 0.0 || trial.start < 0.0)
            fail(ErrorKind::InvalidTime,
                 "trial " + std::to_string(trial.experiment_id) + " has negative timing");
        for (const GpuId& g : trial.gpus) {
            if (g.node < 0 || g.node >= topo.node_count || g.slot < 0 ||
                g.slot >= topo.gpus_per_node)
                fail(ErrorKind::ScheduleConflict,
                     "trial " + std::to_string(trial.experiment_id) + " uses GPU (" +
                         std::to_string(g.node) + "," + std::to_string(g.slot) +
                         ") outside the topology");
            busy[static_cast<std::size_t>(g.node) * topo.gpus_per_node + g.slot].emplace_back(
                trial.start, trial.finish());
        }
    }

    for (int i = 0; i < total; ++i) {
        auto& intervals = busy[static_cast<std::size_t>(i)];
        std::sort(intervals.begin(), intervals.end());
        for (std::size_t j = 1; j < intervals.size(); ++j)
            if (intervals[j].first < intervals[j - 1].second)
                fail(ErrorKind::ScheduleConflict,
                     "GPU (" + std::to_string(i / topo.gpus_per_node) + "," +
                         std::to_string(i % topo.gpus_per_node) + ") is double-booked at t=" +
                         std::to_string(intervals[j].first));
    }

    for (const TrialAssignment& trial : schedule) {
        result.makespan = std::max(result.makespan, trial.finish());
        GpuId lead = trial.gpus.front();
        result.trace.push_back({trial.start, lead, trial.experiment_id, true});
        result.trace.push_back({trial.finish(), lead, trial.experiment_id, false});
    }
    std::sort(result.trace.begin(), result.trace.end(),
              [](const TraceEvent& a, const TraceEvent& b) {
                  if (a.time != b.time) return a.time < b.time;
                  if (a.is_start != b.is_start) return !a.is_start; // finishes first
                  return a.experiment_id < b.experiment_id;
              });

    result.gpu_utilization.assign(static_cast<std::size_t>(total), 0.0);
    if (result.makespan > 0.0) {
        for (int i = 0; i < total; ++i) {
            double busy_time = 0.0;
            for (const auto& [s, f] : busy[static_cast<std::size_t>(i)]) busy_time += f - s;
            result.gpu_utilization[static_cast<std::size_t>(i)] = busy_time / result.makespan;
        }
    }
    return result;
}

double speedup(double t_base, double t_n) {
    if (!(t_base > 0.0) || !(t_n > 0.0))
        fail(ErrorKind::InvalidTime, "speedup needs positive elapsed times");
    return t_base / t_n;
}

} // namespace dmis::clustersim
