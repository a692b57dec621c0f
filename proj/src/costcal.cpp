#include "dmis/costcal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dmis/archmodel.hpp"

namespace dmis::costcal {

namespace {

constexpr double kBetaCeiling = 1.0e30;

std::int64_t default_grad_bytes() {
    static const std::int64_t bytes = [] {
        auto desc = archmodel::build_unet3d();
        return archmodel::count_params(desc, true).total * 4;
    }();
    return bytes;
}

int steps_per_epoch(int samples, int batch, int width) {
    std::int64_t global = static_cast<std::int64_t>(batch) * width;
    return static_cast<int>((samples + global - 1) / global);
}

} // namespace

void CostParams::validate() const {
    if (!(t_step_base > 0.0)) fail(ErrorKind::ModelError, "t_step_base must be positive");
    if (sync_overhead_intra < 0.0 || sync_overhead_inter < 0.0)
        fail(ErrorKind::ModelError, "sync overheads cannot be negative");
    if (!(beta_intra > 0.0) || !(beta_inter > 0.0))
        fail(ErrorKind::ModelError, "bandwidths must be positive");
    if (grid_size < 1) fail(ErrorKind::ModelError, "grid size must be >= 1");
    if (epochs < 1 || samples_train < 1)
        fail(ErrorKind::ModelError, "epochs and samples_train must be >= 1");
    if (grad_bytes < 0) fail(ErrorKind::ModelError, "grad_bytes cannot be negative");
    if (!heterogeneity.empty()) {
        if (heterogeneity.size() != static_cast<std::size_t>(grid_size))
            fail(ErrorKind::ModelError, "heterogeneity list must have one entry per experiment");
        double sum = 0.0;
        for (double h : heterogeneity) {
            if (!(h > 0.0)) fail(ErrorKind::ModelError, "heterogeneity multipliers must be positive");
            sum += h;
        }
        if (std::abs(sum / static_cast<double>(grid_size) - 1.0) > 1e-9)
            fail(ErrorKind::ModelError, "heterogeneity multipliers must average to 1");
    }
}

std::vector<double> heterogeneity_profile(int grid_size, double spread, double straggler) {
    if (grid_size < 1) fail(ErrorKind::ModelError, "grid size must be >= 1");
    if (!(spread > 0.0) || !(straggler > 0.0))
        fail(ErrorKind::ModelError, "profile parameters must be positive");
    std::vector<double> h(static_cast<std::size_t>(grid_size));
    double value = 1.0;
    for (auto& v : h) {
        v = value;
        value *= spread;
    }
    h.back() *= straggler;
    double mean = std::accumulate(h.begin(), h.end(), 0.0) / static_cast<double>(grid_size);
    for (auto& v : h) v /= mean;
    return h;
}

double allreduce_time(const CostParams& params, int n, const clustersim::ClusterTopology& topo,
                      std::int64_t grad_bytes) {
    if (n < 1) fail(ErrorKind::InvalidCount, "width must be >= 1");
    if (n == 1) return 0.0;
    double volume = static_cast<double>(grad_bytes);
    int m = topo.gpus_per_node;
    if (n <= m)
        return 2.0 * (n - 1) / n * volume / params.beta_intra + params.sync_overhead_intra;
    int k = (n + m - 1) / m; // participating nodes
    double intra = 2.0 * (m - 1) / m * volume / params.beta_intra + params.sync_overhead_intra;
    return intra + 2.0 * (k - 1) / k * volume / params.beta_inter + params.sync_overhead_inter;
}

double trial_duration(const CostParams& params, const hpgrid::ExperimentSpec& spec, int width,
                      const clustersim::ClusterTopology& topo) {
    params.validate();
    if (width < 1) fail(ErrorKind::InvalidCount, "width must be >= 1");
    if (spec.per_replica_batch < 1 || spec.epochs < 1)
        fail(ErrorKind::ModelError, "experiment spec has invalid batch or epochs");

    double multiplier = 1.0;
    if (!params.heterogeneity.empty()) {
        if (spec.id < 0 || spec.id >= static_cast<int>(params.heterogeneity.size()))
            fail(ErrorKind::ModelError,
                 "experiment id " + std::to_string(spec.id) + " has no heterogeneity entry");
        multiplier = params.heterogeneity[static_cast<std::size_t>(spec.id)];
    }
    int steps = steps_per_epoch(params.samples_train, spec.per_replica_batch, width);
    double step_time = params.t_step_base + allreduce_time(params, width, topo, params.grad_bytes);
    return static_cast<double>(spec.epochs) * steps * step_time * multiplier;
}

clustersim::DurationOracle duration_oracle(const CostParams& params,
                                           const clustersim::ClusterTopology& topo) {
    return [params, topo](const hpgrid::ExperimentSpec& spec, int width) {
        return trial_duration(params, spec, width, topo);
    };
}

namespace {

std::vector<hpgrid::ExperimentSpec> synthetic_specs(const CostParams& params) {
    std::vector<hpgrid::ExperimentSpec> specs(static_cast<std::size_t>(params.grid_size));
    for (int i = 0; i < params.grid_size; ++i) {
        specs[static_cast<std::size_t>(i)].id = i;
        specs[static_cast<std::size_t>(i)].epochs = params.epochs;
    }
    return specs;
}

double schedule_makespan(const clustersim::Schedule& schedule) {
    double makespan = 0.0;
    for (const auto& trial : schedule) makespan = std::max(makespan, trial.finish());
    return makespan;
}

struct MethodMakespans {
    std::vector<double> data;
    std::vector<double> experiment;
};

MethodMakespans makespans_for(const CostParams& params, std::span<const int> gpu_counts) {
    auto specs = synthetic_specs(params);
    MethodMakespans out;
    out.data.reserve(gpu_counts.size());
    out.experiment.reserve(gpu_counts.size());

    // Pre-computed per-width durations; same arithmetic as trial_duration.
    auto durations_at = [&](const clustersim::ClusterTopology& topo, int width) {
        int steps = steps_per_epoch(params.samples_train, 2, width);
        double step_time =
            params.t_step_base + allreduce_time(params, width, topo, params.grad_bytes);
        double base = static_cast<double>(params.epochs) * steps * step_time;
        std::vector<double> durations(specs.size(), base);
        if (!params.heterogeneity.empty())
            for (std::size_t i = 0; i < specs.size(); ++i)
                durations[i] = base * params.heterogeneity[i];
        return durations;
    };

    for (int n : gpu_counts) {
        auto topo = clustersim::ClusterTopology::v100_preset(n);
        auto data_durations = durations_at(topo, n);
        auto data_oracle = [&](const hpgrid::ExperimentSpec& spec, int) {
            return data_durations[static_cast<std::size_t>(spec.id)];
        };
        out.data.push_back(
            schedule_makespan(clustersim::plan_data_parallel(specs, topo, data_oracle)));

        int width = clustersim::GpusPerTrialPolicy::auto_size().group_size(n, specs.size());
        auto exp_durations = durations_at(topo, width);
        auto exp_oracle = [&](const hpgrid::ExperimentSpec& spec, int) {
            return exp_durations[static_cast<std::size_t>(spec.id)];
        };
        out.experiment.push_back(schedule_makespan(clustersim::plan_experiment_parallel(
            specs, topo, exp_oracle, clustersim::GpusPerTrialPolicy::auto_size())));
    }
    return out;
}

} // namespace

std::vector<TableRow> predict_table(const CostParams& params, std::span<const int> gpu_counts) {
    params.validate();
    std::vector<int> ns(gpu_counts.begin(), gpu_counts.end());
    if (ns.empty()) ns = reference::bundled_gpu_counts();

    // Each method is normalized to its own single-GPU baseline.
    std::vector<int> with_baseline = ns;
    if (std::find(with_baseline.begin(), with_baseline.end(), 1) == with_baseline.end())
        with_baseline.insert(with_baseline.begin(), 1);
    MethodMakespans m = makespans_for(params, with_baseline);

    double data_base = 0.0, exp_base = 0.0;
    for (std::size_t i = 0; i < with_baseline.size(); ++i)
        if (with_baseline[i] == 1) {
            data_base = m.data[i];
            exp_base = m.experiment[i];
        }

    std::vector<TableRow> rows;
    for (std::size_t i = 0; i < with_baseline.size(); ++i) {
        if (std::find(ns.begin(), ns.end(), with_baseline[i]) == ns.end()) continue;
        TableRow row;
        row.n_gpus = with_baseline[i];
        row.data_elapsed = m.data[i];
        row.exp_elapsed = m.experiment[i];
        row.data_speedup = data_base / m.data[i];
        row.exp_speedup = exp_base / m.experiment[i];
        rows.push_back(row);
    }
    return rows;
}

SearchConfig load_search_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoError, "cannot open bounds file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        fail(ErrorKind::InputError, "bounds parse error: " + std::string(e.what()));
    }
    SearchConfig cfg;
    auto range = [&](const char* key, SearchRange& r) {
        if (!j.contains(key)) return;
        r.lo = j[key].at(0).get<double>();
        r.hi = j[key].at(1).get<double>();
        if (!(r.lo <= r.hi)) fail(ErrorKind::InputError, std::string("bad range for ") + key);
    };
    range("volume_intra", cfg.volume_intra);
    range("overhead_intra", cfg.overhead_intra);
    range("volume_inter", cfg.volume_inter);
    range("overhead_inter", cfg.overhead_inter);
    range("spread", cfg.spread);
    range("straggler", cfg.straggler);
    if (j.contains("e_min")) cfg.e_min = j["e_min"].get<int>();
    if (j.contains("e_max")) cfg.e_max = j["e_max"].get<int>();
    if (j.contains("error_cap")) cfg.error_cap = j["error_cap"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (cfg.e_min < 1 || cfg.e_max < cfg.e_min)
        fail(ErrorKind::InputError, "grid-size search range is empty");
    return cfg;
}

namespace {

struct Targets {
    std::vector<int> ns; // ascending, first entry 1
    std::vector<double> data_speedup;
    std::vector<double> exp_speedup;
    double data_elapsed_base = 0.0;
};

Targets organize_reference(const std::vector<reference::Entry>& table) {
    Targets t;
    std::vector<std::pair<int, double>> data, exp;
    for (const auto& e : table) {
        if (e.method == reference::Method::DataParallel)
            data.emplace_back(e.n_gpus, e.speedup);
        else
            exp.emplace_back(e.n_gpus, e.speedup);
        if (e.method == reference::Method::DataParallel && e.n_gpus == 1)
            t.data_elapsed_base = static_cast<double>(e.elapsed_seconds);
    }
    std::sort(data.begin(), data.end());
    std::sort(exp.begin(), exp.end());
    if (data.size() != exp.size() || data.empty())
        fail(ErrorKind::InputError, "reference must list the same GPU counts for both methods");
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].first != exp[i].first)
            fail(ErrorKind::InputError, "reference must list the same GPU counts for both methods");
        if (!(data[i].second > 0.0) || !(exp[i].second > 0.0))
            fail(ErrorKind::InputError, "reference speedups must be positive");
        t.ns.push_back(data[i].first);
        t.data_speedup.push_back(data[i].second);
        t.exp_speedup.push_back(exp[i].second);
    }
    if (t.ns.front() != 1)
        fail(ErrorKind::InputError, "reference must include the single-GPU baseline");
    if (!(t.data_elapsed_base > 0.0))
        fail(ErrorKind::InputError, "reference needs a positive single-GPU elapsed time");
    return t;
}

// Candidate scalars in t_step units; the step time itself is fixed at 1
// while fitting speedups.
struct Candidate {
    double volume_intra = 0.0;
    double overhead_intra = 0.0;
    double volume_inter = 0.0;
    double overhead_inter = 0.0;
    double spread = 1.0;
    double straggler = 1.0;
};

CostParams normalized_params(const Candidate& c, int grid_size, std::int64_t grad_bytes) {
    CostParams p;
    p.t_step_base = 1.0;
    p.sync_overhead_intra = c.overhead_intra;
    p.sync_overhead_inter = c.overhead_inter;
    p.grad_bytes = grad_bytes;
    double volume = static_cast<double>(grad_bytes);
    p.beta_intra = std::min(kBetaCeiling, volume / std::max(c.volume_intra, volume / kBetaCeiling));
    p.beta_inter = std::min(kBetaCeiling, volume / std::max(c.volume_inter, volume / kBetaCeiling));
    p.grid_size = grid_size;
    p.heterogeneity = heterogeneity_profile(grid_size, c.spread, c.straggler);
    return p;
}

struct Evaluator {
    const Targets& targets;
    const SearchConfig& cfg;
    std::int64_t grad_bytes;
    mutable long evals = 0;

    // Closed-form data-parallel speedups; identical to the planner's serial
    // chain up to last-bit rounding and independent of E and heterogeneity.
    std::vector<double> data_speedups(const Candidate& c) const {
        CostParams p = normalized_params(c, 1, grad_bytes);
        std::vector<double> out(targets.ns.size());
        double base = 0.0;
        for (std::size_t i = 0; i < targets.ns.size(); ++i) {
            int n = targets.ns[i];
            auto topo = clustersim::ClusterTopology::v100_preset(n);
            double step = 1.0 + allreduce_time(p, n, topo, grad_bytes);
            double time = static_cast<double>(steps_per_epoch(p.samples_train, 2, n)) * step;
            if (n == 1) base = time;
            out[i] = base / time;
        }
        return out;
    }

    std::pair<std::vector<double>, std::vector<double>>
    both_speedups(const Candidate& c, int grid_size) const {
        CostParams p = normalized_params(c, grid_size, grad_bytes);
        MethodMakespans m = makespans_for(p, targets.ns);
        std::vector<double> data(targets.ns.size()), exp(targets.ns.size());
        double data_base = m.data.front(), exp_base = m.experiment.front();
        for (std::size_t i = 0; i < targets.ns.size(); ++i) {
            data[i] = data_base / m.data[i];
            exp[i] = exp_base / m.experiment[i];
        }
        return {data, exp};
    }

    double penalty(double worst_excess, double ordering_violation) const {
        double p = 0.0;
        if (worst_excess > 0.0) p += cfg.cap_weight * worst_excess * worst_excess;
        p += cfg.ordering_weight * ordering_violation;
        return p;
    }

    double data_objective(const Candidate& c) const {
        ++evals;
        auto pred = data_speedups(c);
        double ls = 0.0, worst = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            double e = pred[i] / targets.data_speedup[i] - 1.0;
            ls += e * e;
            worst = std::max(worst, std::abs(e) - cfg.error_cap);
        }
        return ls + penalty(worst, 0.0);
    }

    double full_objective(const Candidate& c, int grid_size) const {
        ++evals;
        auto [data, exp] = both_speedups(c, grid_size);
        double ls = 0.0, worst = 0.0, ordering = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            double ed = data[i] / targets.data_speedup[i] - 1.0;
            double ee = exp[i] / targets.exp_speedup[i] - 1.0;
            ls += ed * ed + ee * ee;
            worst = std::max({worst, std::abs(ed) - cfg.error_cap, std::abs(ee) - cfg.error_cap});
            if (targets.ns[i] >= 2 && data[i] > exp[i]) {
                double v = (data[i] - exp[i]) / targets.exp_speedup[i];
                ordering += v * v;
            }
        }
        return ls + penalty(worst, ordering);
    }
};

// Deterministic coordinate refinement with paired opposing moves, bounded by
// [lo, hi] per dimension. Step sizes halve down to a fixed floor; acceptance
// requires a relative improvement so the search cannot creep along flat
// valleys at microscopic step sizes.
template <typename Objective>
void refine(std::vector<double>& point, const std::vector<double>& lo,
            const std::vector<double>& hi, int sweeps, const Objective& objective) {
    constexpr double kFloor = 1e-9;
    constexpr int kMovesPerLevel = 32;
    double best = objective(point);
    std::size_t dims = point.size();
    auto accept = [&](double o) { return o < best - std::abs(best) * 1e-12; };

    for (int sweep = 0; sweep < sweeps; ++sweep) {
        double sweep_start = best;
        bool moved = false;
        for (std::size_t i = 0; i < dims; ++i) {
            double step = (hi[i] - lo[i]) / 8.0;
            while (step > kFloor) {
                bool improved = false;
                for (int moves = 0; moves < kMovesPerLevel; ++moves) {
                    bool hit = false;
                    for (double dir : {-step, step}) {
                        std::vector<double> c = point;
                        c[i] = std::clamp(point[i] + dir, lo[i], hi[i]);
                        double o = objective(c);
                        if (accept(o)) {
                            point = std::move(c);
                            best = o;
                            hit = true;
                        }
                    }
                    if (!hit) break;
                    improved = true;
                }
                step *= 0.5;
                moved |= improved;
            }
        }
        for (std::size_t i = 0; i < dims; ++i) {
            for (std::size_t j = i + 1; j < dims; ++j) {
                double scale = (hi[j] - lo[j]) / (hi[i] - lo[i]);
                double step = (hi[i] - lo[i]) / 16.0;
                while (step > kFloor) {
                    bool improved = false;
                    for (int moves = 0; moves < kMovesPerLevel; ++moves) {
                        bool hit = false;
                        for (auto [di, dj] : {std::pair{step, -step * scale},
                                              std::pair{-step, step * scale},
                                              std::pair{step, step * scale},
                                              std::pair{-step, -step * scale}}) {
                            std::vector<double> c = point;
                            c[i] = std::clamp(point[i] + di, lo[i], hi[i]);
                            c[j] = std::clamp(point[j] + dj, lo[j], hi[j]);
                            double o = objective(c);
                            if (accept(o)) {
                                point = std::move(c);
                                best = o;
                                hit = true;
                            }
                        }
                        if (!hit) break;
                        improved = true;
                    }
                    step *= 0.5;
                    moved |= improved;
                }
            }
        }
        if (!moved) break;
        if (sweep_start - best <= std::abs(sweep_start) * 1e-13) break;
    }
}

Candidate candidate_from(const std::vector<double>& v, const Candidate& base) {
    Candidate c = base;
    c.volume_intra = v[0];
    c.overhead_intra = v[1];
    c.volume_inter = v[2];
    c.overhead_inter = v[3];
    if (v.size() > 4) {
        c.spread = v[4];
        c.straggler = v[5];
    }
    return c;
}

// Inverts the target speedups into per-width overhead space and solves the
// linear model structure directly; exact when the reference was generated by
// the model itself.
Candidate analytic_start(const Targets& targets, int samples_train) {
    auto steps1 = static_cast<double>(steps_per_epoch(samples_train, 2, 1));
    std::vector<double> width_overhead(targets.ns.size(), 0.0);
    for (std::size_t i = 0; i < targets.ns.size(); ++i) {
        int n = targets.ns[i];
        double ideal = steps1 / static_cast<double>(steps_per_epoch(samples_train, 2, n));
        width_overhead[i] = std::max(0.0, ideal / targets.data_speedup[i] - 1.0);
    }
    auto overhead_at = [&](int n) {
        for (std::size_t i = 0; i < targets.ns.size(); ++i)
            if (targets.ns[i] == n) return width_overhead[i];
        return 0.0;
    };

    Candidate c;
    double a2 = overhead_at(2), a4 = overhead_at(4);
    c.volume_intra = std::max(0.0, 2.0 * (a4 - a2));
    c.overhead_intra = std::max(0.0, a2 - c.volume_intra);
    double base = 1.5 * c.volume_intra + c.overhead_intra;

    // least squares over the multi-node rows
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < targets.ns.size(); ++i) {
        int n = targets.ns[i];
        if (n <= 4) continue;
        int k = (n + 3) / 4;
        double x = 2.0 * (k - 1) / k;
        double y = width_overhead[i] - base;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++count;
    }
    if (count >= 2) {
        double det = count * sxx - sx * sx;
        if (det > 0.0) {
            c.volume_inter = std::max(0.0, (count * sxy - sx * sy) / det);
            c.overhead_inter = std::max(0.0, (sy - c.volume_inter * sx) / count);
        }
    }
    return c;
}

} // namespace

CalibrationResult calibrate(const std::vector<reference::Entry>& table,
                            const SearchConfig& cfg) {
    Targets targets = organize_reference(table);
    std::int64_t grad_bytes = default_grad_bytes();
    Evaluator eval{targets, cfg, grad_bytes};

    const std::vector<double> lo4 = {cfg.volume_intra.lo, cfg.overhead_intra.lo,
                                     cfg.volume_inter.lo, cfg.overhead_inter.lo};
    const std::vector<double> hi4 = {cfg.volume_intra.hi, cfg.overhead_intra.hi,
                                     cfg.volume_inter.hi, cfg.overhead_inter.hi};

    // Stage 1: communication scalars against the data-parallel column.
    auto data_obj = [&](const std::vector<double>& v) {
        return eval.data_objective(candidate_from(v, Candidate{}));
    };
    std::vector<double> grid_best;
    double grid_best_obj = std::numeric_limits<double>::max();
    int k = std::max(2, cfg.coarse_points);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
            for (int c = 0; c < k; ++c)
                for (int d = 0; d < k; ++d) {
                    std::vector<double> v = {
                        lo4[0] + (hi4[0] - lo4[0]) * a / (k - 1),
                        lo4[1] + (hi4[1] - lo4[1]) * b / (k - 1),
                        lo4[2] + (hi4[2] - lo4[2]) * c / (k - 1),
                        lo4[3] + (hi4[3] - lo4[3]) * d / (k - 1)};
                    double o = data_obj(v);
                    if (o < grid_best_obj) {
                        grid_best_obj = o;
                        grid_best = v;
                    }
                }

    Candidate warm = analytic_start(targets, CostParams{}.samples_train);
    std::vector<std::vector<double>> starts = {
        {warm.volume_intra, warm.overhead_intra, warm.volume_inter, warm.overhead_inter},
        grid_best};
    std::uint64_t jitter_state = cfg.seed * 6364136223846793005ull + 1442695040888963407ull;
    auto next_jitter = [&]() {
        jitter_state = jitter_state * 6364136223846793005ull + 1442695040888963407ull;
        return (static_cast<double>(jitter_state >> 11) * 0x1.0p-53 - 0.5) * 0.1;
    };
    for (int j = 0; j < cfg.jitter_starts; ++j) {
        std::vector<double> v = grid_best;
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = std::clamp(v[i] + next_jitter() * (hi4[i] - lo4[i]), lo4[i], hi4[i]);
        starts.push_back(std::move(v));
    }

    std::vector<double> best4;
    double best4_obj = std::numeric_limits<double>::max();
    for (auto& start : starts) {
        for (std::size_t i = 0; i < start.size(); ++i)
            start[i] = std::clamp(start[i], lo4[i], hi4[i]);
        refine(start, lo4, hi4, cfg.refine_sweeps, data_obj);
        double o = data_obj(start);
        if (o < best4_obj) {
            best4_obj = o;
            best4 = start;
        }
    }
    Candidate comm = candidate_from(best4, Candidate{});

    // Stage 2: scan the integer grid size with a coarse profile grid.
    struct EChoice {
        double objective;
        int grid_size;
        Candidate candidate;
    };
    std::vector<EChoice> choices;
    for (int e = cfg.e_min; e <= cfg.e_max; ++e) {
        EChoice best{std::numeric_limits<double>::max(), e, comm};
        for (int qi = 0; qi <= 10; ++qi) {
            double q = cfg.spread.lo + (cfg.spread.hi - cfg.spread.lo) * qi / 10.0;
            for (int si = 0; si <= 15; ++si) {
                double s = cfg.straggler.lo + (cfg.straggler.hi - cfg.straggler.lo) * si / 15.0;
                Candidate c = comm;
                c.spread = q;
                c.straggler = s;
                double o = eval.full_objective(c, e);
                if (o < best.objective) best = {o, e, c};
            }
        }
        choices.push_back(best);
    }
    std::sort(choices.begin(), choices.end(), [](const EChoice& a, const EChoice& b) {
        return a.objective != b.objective ? a.objective < b.objective
                                          : a.grid_size < b.grid_size;
    });

    // Stage 3: refine the profile for the leading grid sizes.
    EChoice incumbent{std::numeric_limits<double>::max(), cfg.e_min, comm};
    int shortlist = std::min<std::size_t>(3, choices.size());
    for (int rank = 0; rank < shortlist; ++rank) {
        EChoice choice = choices[static_cast<std::size_t>(rank)];
        std::vector<double> qs = {choice.candidate.spread, choice.candidate.straggler};
        auto profile_obj = [&](const std::vector<double>& v) {
            Candidate c = choice.candidate;
            c.spread = v[0];
            c.straggler = v[1];
            return eval.full_objective(c, choice.grid_size);
        };
        refine(qs, {cfg.spread.lo, cfg.straggler.lo}, {cfg.spread.hi, cfg.straggler.hi},
               cfg.refine_sweeps, profile_obj);
        choice.candidate.spread = qs[0];
        choice.candidate.straggler = qs[1];
        choice.objective = eval.full_objective(choice.candidate, choice.grid_size);
        if (choice.objective < incumbent.objective) incumbent = choice;
    }

    // Stage 4: joint polish over all six scalars.
    std::vector<double> point = {incumbent.candidate.volume_intra,
                                 incumbent.candidate.overhead_intra,
                                 incumbent.candidate.volume_inter,
                                 incumbent.candidate.overhead_inter,
                                 incumbent.candidate.spread,
                                 incumbent.candidate.straggler};
    std::vector<double> lo6 = lo4, hi6 = hi4;
    lo6.push_back(cfg.spread.lo);
    lo6.push_back(cfg.straggler.lo);
    hi6.push_back(cfg.spread.hi);
    hi6.push_back(cfg.straggler.hi);
    auto joint_obj = [&](const std::vector<double>& v) {
        return eval.full_objective(candidate_from(v, Candidate{}), incumbent.grid_size);
    };
    refine(point, lo6, hi6, cfg.refine_sweeps, joint_obj);
    Candidate fitted = candidate_from(point, Candidate{});
    double penalized = eval.full_objective(fitted, incumbent.grid_size);

    // Scale from step units to seconds using the single-GPU baseline.
    CostParams params = normalized_params(fitted, incumbent.grid_size, grad_bytes);
    MethodMakespans normalized = makespans_for(params, std::vector<int>{1});
    double t_step = targets.data_elapsed_base / normalized.data.front();
    params.t_step_base = t_step;
    params.sync_overhead_intra *= t_step;
    params.sync_overhead_inter *= t_step;
    double volume = static_cast<double>(grad_bytes);
    params.beta_intra =
        std::min(kBetaCeiling, volume / std::max(fitted.volume_intra * t_step, volume / kBetaCeiling));
    params.beta_inter =
        std::min(kBetaCeiling, volume / std::max(fitted.volume_inter * t_step, volume / kBetaCeiling));

    CalibrationResult result;
    result.params = params;
    result.spread = fitted.spread;
    result.straggler = fitted.straggler;
    result.penalized_objective = penalized;

    auto rows = predict_table(params, targets.ns);
    result.residuals.resize(targets.ns.size() * 2);
    result.objective = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double ed = rows[i].data_speedup / targets.data_speedup[i] - 1.0;
        double ee = rows[i].exp_speedup / targets.exp_speedup[i] - 1.0;
        result.residuals[i] = ed;
        result.residuals[targets.ns.size() + i] = ee;
        result.objective += ed * ed + ee * ee;
    }

    std::ostringstream trace;
    trace << "grid=" << k << "^4 starts=" << starts.size() << " e_scan=[" << cfg.e_min << ","
          << cfg.e_max << "] shortlist=" << shortlist << " fitted_e=" << incumbent.grid_size
          << " evals=" << eval.evals << " ls=" << result.objective << " penalized=" << penalized;
    result.trace_summary = trace.str();
    return result;
}

void save_cost_params(const CostParams& params, const std::string& path) {
    nlohmann::ordered_json j;
    j["t_step_base"] = params.t_step_base;
    j["sync_overhead_intra"] = params.sync_overhead_intra;
    j["sync_overhead_inter"] = params.sync_overhead_inter;
    j["beta_intra"] = params.beta_intra;
    j["beta_inter"] = params.beta_inter;
    j["grid_size"] = params.grid_size;
    j["heterogeneity"] = params.heterogeneity;
    j["epochs"] = params.epochs;
    j["samples_train"] = params.samples_train;
    j["grad_bytes"] = params.grad_bytes;
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

CostParams load_cost_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoError, "cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        fail(ErrorKind::InputError, "cost-params parse error: " + std::string(e.what()));
    }
    CostParams params;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "t_step_base") params.t_step_base = value.get<double>();
            else if (key == "sync_overhead_intra") params.sync_overhead_intra = value.get<double>();
            else if (key == "sync_overhead_inter") params.sync_overhead_inter = value.get<double>();
            else if (key == "beta_intra") params.beta_intra = value.get<double>();
            else if (key == "beta_inter") params.beta_inter = value.get<double>();
            else if (key == "grid_size") params.grid_size = value.get<int>();
            else if (key == "heterogeneity") params.heterogeneity = value.get<std::vector<double>>();
            else if (key == "epochs") params.epochs = value.get<int>();
            else if (key == "samples_train") params.samples_train = value.get<int>();
            else if (key == "grad_bytes") params.grad_bytes = value.get<std::int64_t>();
            else fail(ErrorKind::InputError, "unknown cost-params key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::InputError, "cost-params field error: " + std::string(e.what()));
    }
    params.validate();
    return params;
}

} // namespace dmis::costcal
