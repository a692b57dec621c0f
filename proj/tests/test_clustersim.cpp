#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "dmis/clustersim.hpp"
#include "dmis/reference.hpp"
#include "dmis/rng.hpp"

using namespace dmis;
using namespace dmis::clustersim;

namespace {

std::vector<hpgrid::ExperimentSpec> make_specs(std::size_t count) {
    std::vector<hpgrid::ExperimentSpec> specs(count);
    for (std::size_t i = 0; i < count; ++i) specs[i].id = static_cast<int>(i);
    return specs;
}

DurationOracle fixed_durations(std::vector<double> durations) {
    return [durations](const hpgrid::ExperimentSpec& spec, int) {
        return durations[static_cast<std::size_t>(spec.id)];
    };
}

ClusterTopology topo_of(int nodes, int gpus_per_node) {
    ClusterTopology topo;
    topo.node_count = nodes;
    topo.gpus_per_node = gpus_per_node;
    return topo;
}

// Independent re-enactment of the greedy policy, written against the policy
// prose rather than the planner: scan availability lists per trial, prefer
// the earliest ready group with lowest node then slot index.
double reenact_greedy(const std::vector<double>& durations, const ClusterTopology& topo,
                      int width) {
    std::vector<std::vector<double>> avail(
        static_cast<std::size_t>(topo.node_count),
        std::vector<double>(static_cast<std::size_t>(topo.gpus_per_node), 0.0));
    double makespan = 0.0;
    for (double duration : durations) {
        int chosen_node = -1;
        std::vector<int> chosen_slots;
        double chosen_ready = 0.0;
        if (width <= topo.gpus_per_node) {
            for (int node = 0; node < topo.node_count; ++node) {
                std::vector<int> slots;
                for (int s = 0; s < topo.gpus_per_node; ++s) slots.push_back(s);
                std::stable_sort(slots.begin(), slots.end(), [&](int a, int b) {
                    return avail[static_cast<std::size_t>(node)][static_cast<std::size_t>(a)] <
                           avail[static_cast<std::size_t>(node)][static_cast<std::size_t>(b)];
                });
                slots.resize(static_cast<std::size_t>(width));
                double ready =
                    avail[static_cast<std::size_t>(node)][static_cast<std::size_t>(slots.back())];
                if (chosen_node < 0 || ready < chosen_ready) {
                    chosen_node = node;
                    chosen_ready = ready;
                    chosen_slots = slots;
                }
            }
            for (int s : chosen_slots)
                avail[static_cast<std::size_t>(chosen_node)][static_cast<std::size_t>(s)] =
                    chosen_ready + duration;
        } else {
            std::vector<std::pair<int, int>> order;
            for (int node = 0; node < topo.node_count; ++node)
                for (int s = 0; s < topo.gpus_per_node; ++s) order.emplace_back(node, s);
            std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
                return avail[static_cast<std::size_t>(a.first)][static_cast<std::size_t>(a.second)] <
                       avail[static_cast<std::size_t>(b.first)][static_cast<std::size_t>(b.second)];
            });
            order.resize(static_cast<std::size_t>(width));
            chosen_ready = 0.0;
            for (auto [node, slot] : order)
                chosen_ready = std::max(
                    chosen_ready,
                    avail[static_cast<std::size_t>(node)][static_cast<std::size_t>(slot)]);
            for (auto [node, slot] : order)
                avail[static_cast<std::size_t>(node)][static_cast<std::size_t>(slot)] =
                    chosen_ready + duration;
        }
        makespan = std::max(makespan, chosen_ready + duration);
    }
    return makespan;
}

} // namespace

TEST_SUITE("clustersim") {

TEST_CASE("parallelism level selection") {
    CHECK(select_parallelism_level(1, 4) == StrategyKind::Sequential);
    CHECK(select_parallelism_level(4, 4) == StrategyKind::SingleNodeDataParallel);
    CHECK(select_parallelism_level(2, 4) == StrategyKind::SingleNodeDataParallel);
    CHECK(select_parallelism_level(32, 4) == StrategyKind::MultiNodeDataParallel);
    CHECK_THROWS_AS(select_parallelism_level(0, 4), Error);
    CHECK_THROWS_AS(select_parallelism_level(4, 0), Error);
}

TEST_CASE("v100 preset sizes nodes in fours") {
    auto topo = ClusterTopology::v100_preset(32);
    CHECK(topo.node_count == 8);
    CHECK(topo.gpus_per_node == 4);
    CHECK(topo.total_gpus() == 32);
    auto small = ClusterTopology::v100_preset(2);
    CHECK(small.node_count == 1);
    CHECK(small.gpus_per_node == 2);
}

TEST_CASE("data-parallel plan serializes trials across all GPUs") {
    auto topo = topo_of(1, 4);
    auto specs = make_specs(3);
    auto schedule = plan_data_parallel(specs, topo, fixed_durations({10, 10, 10}));
    auto result = simulate(schedule, topo);
    CHECK(result.makespan == doctest::Approx(30.0));
    for (const auto& trial : schedule) CHECK(trial.gpus.size() == 4);
}

TEST_CASE("data-parallel start times are prefix sums") {
    auto topo = topo_of(2, 2);
    auto specs = make_specs(3);
    auto schedule = plan_data_parallel(specs, topo, fixed_durations({5, 7, 11}));
    CHECK(schedule[0].start == doctest::Approx(0.0));
    CHECK(schedule[1].start == doctest::Approx(5.0));
    CHECK(schedule[2].start == doctest::Approx(12.0));
    CHECK(simulate(schedule, topo).makespan == doctest::Approx(23.0));

    auto single = plan_data_parallel(make_specs(1), topo, fixed_durations({42}));
    CHECK(simulate(single, topo).makespan == doctest::Approx(42.0));
}

TEST_CASE("experiment-parallel waves") {
    auto topo = topo_of(1, 4);
    auto schedule = plan_experiment_parallel(make_specs(4), topo,
                                             fixed_durations({10, 10, 10, 10}),
                                             GpusPerTrialPolicy::fixed(1));
    CHECK(simulate(schedule, topo).makespan == doctest::Approx(10.0));

    auto two = topo_of(1, 2);
    auto waves = plan_experiment_parallel(make_specs(4), two, fixed_durations({10, 10, 10, 10}),
                                          GpusPerTrialPolicy::fixed(1));
    CHECK(simulate(waves, two).makespan == doctest::Approx(20.0));
}

TEST_CASE("greedy packing follows earliest availability") {
    auto topo = topo_of(1, 2);
    auto schedule = plan_experiment_parallel(make_specs(3), topo, fixed_durations({10, 6, 5}),
                                             GpusPerTrialPolicy::fixed(1));
    // gpu0 takes trial 0 (10), gpu1 takes trial 1 (6) then trial 2 at t=6
    CHECK(simulate(schedule, topo).makespan == doctest::Approx(11.0));
    CHECK(schedule[2].start == doctest::Approx(6.0));
    CHECK(schedule[2].gpus[0].slot == 1);
}

TEST_CASE("infeasible fixed group size") {
    auto topo = topo_of(1, 2);
    CHECK_THROWS_AS(plan_experiment_parallel(make_specs(2), topo, fixed_durations({1, 1}),
                                             GpusPerTrialPolicy::fixed(3)),
                    Error);
    try {
        plan_experiment_parallel(make_specs(2), topo, fixed_durations({1, 1}),
                                 GpusPerTrialPolicy::fixed(3));
        FAIL("expected InfeasibleAssignment");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InfeasibleAssignment);
    }
}

TEST_CASE("auto policy grows groups when GPUs outnumber experiments") {
    auto topo = topo_of(2, 4);
    auto schedule = plan_experiment_parallel(make_specs(4), topo, fixed_durations({1, 1, 1, 1}),
                                             GpusPerTrialPolicy::auto_size());
    for (const auto& trial : schedule) {
        CHECK(trial.gpus.size() == 2); // 8 GPUs / 4 experiments
        CHECK(trial.gpus[0].node == trial.gpus[1].node); // groups stay inside a node
    }
}

TEST_CASE("empty grids are rejected") {
    auto topo = topo_of(1, 2);
    CHECK_THROWS_AS(plan_data_parallel({}, topo, fixed_durations({})), Error);
    CHECK_THROWS_AS(plan_experiment_parallel({}, topo, fixed_durations({})), Error);
}

TEST_CASE("simulate on an empty schedule") {
    auto result = simulate({}, topo_of(1, 4));
    CHECK(result.makespan == 0.0);
    CHECK(result.trace.empty());
    for (double u : result.gpu_utilization) CHECK(u == 0.0);
}

TEST_CASE("serial chain trace has paired events in time order") {
    auto topo = topo_of(1, 2);
    auto schedule = plan_data_parallel(make_specs(3), topo, fixed_durations({5, 7, 11}));
    auto result = simulate(schedule, topo);
    REQUIRE(result.trace.size() == 6);
    CHECK(result.makespan == doctest::Approx(23.0));
    for (std::size_t i = 1; i < result.trace.size(); ++i)
        CHECK(result.trace[i].time >= result.trace[i - 1].time);
    // finish of trial i precedes start of trial i+1 at the shared instant
    CHECK_FALSE(result.trace[1].is_start);
    CHECK(result.trace[2].is_start);

    auto again = simulate(schedule, topo);
    REQUIRE(again.trace.size() == result.trace.size());
    for (std::size_t i = 0; i < result.trace.size(); ++i) {
        CHECK(again.trace[i].time == result.trace[i].time);
        CHECK(again.trace[i].experiment_id == result.trace[i].experiment_id);
        CHECK(again.trace[i].is_start == result.trace[i].is_start);
    }
}

TEST_CASE("double-booked GPUs are rejected") {
    auto topo = topo_of(1, 2);
    Schedule bad;
    bad.push_back({0, {{0, 0}}, 0.0, 10.0});
    bad.push_back({1, {{0, 0}}, 5.0, 10.0});
    try {
        simulate(bad, topo);
        FAIL("expected ScheduleConflict");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ScheduleConflict);
    }

    Schedule out_of_range;
    out_of_range.push_back({0, {{0, 5}}, 0.0, 1.0});
    CHECK_THROWS_AS(simulate(out_of_range, topo), Error);
}

TEST_CASE("touching intervals are not conflicts") {
    auto topo = topo_of(1, 1);
    Schedule chain;
    chain.push_back({0, {{0, 0}}, 0.0, 5.0});
    chain.push_back({1, {{0, 0}}, 5.0, 5.0});
    CHECK(simulate(chain, topo).makespan == doctest::Approx(10.0));
}

TEST_CASE("utilization accounts busy time per GPU") {
    auto topo = topo_of(1, 2);
    Schedule schedule;
    schedule.push_back({0, {{0, 0}}, 0.0, 10.0});
    schedule.push_back({1, {{0, 1}}, 0.0, 5.0});
    auto result = simulate(schedule, topo);
    CHECK(result.gpu_utilization[0] == doctest::Approx(1.0));
    CHECK(result.gpu_utilization[1] == doctest::Approx(0.5));
}

TEST_CASE("speedup arithmetic on the published rows") {
    using reference::parse_duration_seconds;
    CHECK(speedup(parse_duration_seconds("44:18:02"), parse_duration_seconds("7:41:12")) ==
          doctest::Approx(5.76).epsilon(0.01 / 5.76));
    CHECK(speedup(parse_duration_seconds("44:20:19"), parse_duration_seconds("2:55:06")) ==
          doctest::Approx(15.19).epsilon(0.01 / 15.19));
    CHECK(speedup(123.0, 123.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(speedup(0.0, 1.0), Error);
    CHECK_THROWS_AS(speedup(1.0, -2.0), Error);
    try {
        speedup(1.0, 0.0);
        FAIL("expected InvalidTime");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidTime);
    }
}

TEST_CASE("work conservation bounds hold on random schedules") {
    Rng rng(301);
    for (int trial = 0; trial < 60; ++trial) {
        int nodes = 1 + static_cast<int>(rng.next_below(3));
        int per_node = 1 + static_cast<int>(rng.next_below(4));
        auto topo = topo_of(nodes, per_node);
        int n = topo.total_gpus();
        auto e = 1 + static_cast<std::size_t>(rng.next_below(6));
        std::vector<double> durations;
        for (std::size_t i = 0; i < e; ++i) durations.push_back(rng.uniform(0.5, 20.0));
        int width = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));

        auto schedule = plan_experiment_parallel(make_specs(e), topo, fixed_durations(durations),
                                                 GpusPerTrialPolicy::fixed(width));
        auto result = simulate(schedule, topo);

        double work = 0.0, longest = 0.0;
        for (double d : durations) {
            work += d * width;
            longest = std::max(longest, d);
        }
        CHECK(work <= n * result.makespan + 1e-9);
        CHECK(result.makespan >= longest - 1e-12);
        CHECK(result.makespan >= work / n - 1e-9);
        for (double u : result.gpu_utilization) {
            CHECK(u >= 0.0);
            CHECK(u <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("simulated makespan equals the brute-force greedy re-enactment") {
    Rng rng(401);
    int cases = 0;
    while (cases < 200) {
        int nodes = 1 + static_cast<int>(rng.next_below(4));
        int per_node = 1 + static_cast<int>(rng.next_below(4));
        if (nodes * per_node > 4) continue;
        auto topo = topo_of(nodes, per_node);
        auto e = 1 + static_cast<std::size_t>(rng.next_below(6));
        std::vector<double> durations;
        for (std::size_t i = 0; i < e; ++i) durations.push_back(rng.uniform(0.25, 30.0));
        int width = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(topo.total_gpus())));

        auto schedule = plan_experiment_parallel(make_specs(e), topo, fixed_durations(durations),
                                                 GpusPerTrialPolicy::fixed(width));
        double simulated = simulate(schedule, topo).makespan;
        double reenacted = reenact_greedy(durations, topo, width);
        CHECK(simulated == reenacted); // exact, not approximate
        ++cases;
    }
}

TEST_CASE("one GPU degenerates both strategies to the same serial run") {
    auto topo = topo_of(1, 1);
    std::vector<double> durations = {3.5, 1.25, 8.0, 2.0};
    auto specs = make_specs(4);
    auto data = simulate(plan_data_parallel(specs, topo, fixed_durations(durations)), topo);
    auto exp = simulate(plan_experiment_parallel(specs, topo, fixed_durations(durations),
                                                 GpusPerTrialPolicy::auto_size()),
                        topo);
    CHECK(data.makespan == doctest::Approx(exp.makespan));
}

} // TEST_SUITE
