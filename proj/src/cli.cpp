#include "dmis/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dmis/archmodel.hpp"
#include "dmis/clustersim.hpp"
#include "dmis/config.hpp"
#include "dmis/costcal.hpp"
#include "dmis/datapipe.hpp"
#include "dmis/format.hpp"
#include "dmis/lossmath.hpp"
#include "dmis/record_io.hpp"
#include "dmis/report.hpp"
#include "dmis/rng.hpp"

namespace dmis::cli {

namespace fs = std::filesystem;

namespace {

std::string default_output_dir() {
    if (const char* env = std::getenv("DMIS_OUTPUT_DIR")) return env;
    return ".";
}

std::vector<std::int64_t> parse_int_list(const std::string& text, std::size_t expected,
                                         const char* what) {
    std::vector<std::int64_t> values;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) values.push_back(std::stoll(item));
    if (values.size() != expected)
        fail(ErrorKind::InputError,
             std::string(what) + " needs " + std::to_string(expected) + " comma-separated values");
    return values;
}

std::array<double, 3> parse_ratios(const std::string& text) {
    std::array<double, 3> ratios{};
    std::istringstream in(text);
    std::string item;
    for (auto& r : ratios) {
        if (!std::getline(in, item, ','))
            fail(ErrorKind::InputError, "ratios need 3 comma-separated values");
        r = std::stod(item);
    }
    return ratios;
}

// ---- grid ----------------------------------------------------------------

int cmd_grid(const std::string& config_path, const std::string& out_path) {
    auto cfg = config::RunConfig::from_file(config_path);
    if (!cfg.grid) fail(ErrorKind::InputError, "config has no 'grid' section");

    auto specs = hpgrid::cross_product(*cfg.grid);
    int n_gpus = cfg.topology.total_gpus();

    std::ostringstream csv;
    csv << "id";
    for (const auto& axis : cfg.grid->axes()) csv << "," << axis.name;
    csv << ",global_batch,lr\n";
    for (const auto& spec : specs) {
        csv << spec.id;
        for (const auto& [name, value] : spec.assignment) csv << "," << value.repr();
        csv << "," << hpgrid::scale_global_batch(spec.per_replica_batch, n_gpus) << ","
            << format_double(hpgrid::scale_lr(spec.base_lr, n_gpus)) << "\n";
    }

    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) fail(ErrorKind::IoError, "cannot open " + out_path + " for writing");
        out << csv.str();
    }
    std::cout << csv.str();
    return 0;
}

// ---- arch ----------------------------------------------------------------

int cmd_arch(int base_filters, int steps, int in_channels, int out_channels, bool no_bias,
             bool no_bn_stats, bool transposed_same, const std::string& input_dims, bool as_csv,
             const std::string& json_path, std::int64_t memory_batch,
             std::int64_t gpu_memory_bytes) {
    archmodel::UnetOptions options;
    options.conv_bias = !no_bias;
    options.transposed_same_width = transposed_same;
    auto desc = archmodel::build_unet3d(base_filters, steps, in_channels, out_channels, options);

    auto dims = parse_int_list(input_dims, 4, "--input");
    archmodel::TensorShape input{dims[0], dims[1], dims[2], dims[3]};
    auto trace = archmodel::propagate_shapes(desc, input);
    auto params = archmodel::count_params(desc, !no_bn_stats);

    if (as_csv) {
        std::cout << "layer,label,kind,output_shape,params\n";
        for (std::size_t i = 0; i < desc.layers.size(); ++i)
            std::cout << i << "," << desc.layers[i].label << ","
                      << archmodel::to_string(desc.layers[i].kind) << ","
                      << trace.per_layer[i].str() << "," << params.per_layer[i].total() << "\n";
    } else {
        std::printf("%-5s %-16s %-18s %-22s %12s\n", "layer", "label", "kind", "output", "params");
        for (std::size_t i = 0; i < desc.layers.size(); ++i)
            std::printf("%-5zu %-16s %-18s %-22s %12lld\n", i, desc.layers[i].label.c_str(),
                        archmodel::to_string(desc.layers[i].kind),
                        trace.per_layer[i].str().c_str(),
                        static_cast<long long>(params.per_layer[i].total()));
    }
    std::cout << "total_params," << params.total << "\n";

    if (!json_path.empty()) {
        nlohmann::ordered_json j;
        j["total"] = params.total;
        j["weights"] = params.sums.weights;
        j["biases"] = params.sums.biases;
        j["bn_scale_shift"] = params.sums.bn_scale_shift;
        j["bn_running_stats"] = params.sums.bn_running_stats;
        j["per_layer"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < desc.layers.size(); ++i)
            j["per_layer"].push_back({{"label", desc.layers[i].label},
                                      {"kind", archmodel::to_string(desc.layers[i].kind)},
                                      {"weights", params.per_layer[i].weights},
                                      {"biases", params.per_layer[i].biases},
                                      {"bn_scale_shift", params.per_layer[i].bn_scale_shift},
                                      {"bn_running_stats", params.per_layer[i].bn_running_stats}});
        std::ofstream out(json_path, std::ios::trunc);
        if (!out) fail(ErrorKind::IoError, "cannot open " + json_path + " for writing");
        out << j.dump(2) << "\n";
    }

    if (memory_batch > 0) {
        clustersim::ClusterTopology topo;
        topo.gpu_memory_bytes = gpu_memory_bytes;
        auto check = report::memory_feasibility_check(desc, input, memory_batch, topo);
        std::cout << "memory_check," << (check.pass ? "pass" : "fail") << ",estimate_bytes,"
                  << check.estimate_bytes << ",headroom_bytes," << check.headroom_bytes << "\n";
    }
    return 0;
}

// ---- dice-check ----------------------------------------------------------

int cmd_dice_check(std::uint64_t seed, int cases, double epsilon, double step) {
    Rng rng(seed);
    double worst = 0.0;
    for (int c = 0; c < cases; ++c) {
        std::array<std::int64_t, 3> dims{2, 2, 2};
        std::size_t n = 8;
        std::vector<double> pred(n), truth(n);
        for (auto& p : pred) p = rng.uniform(0.02, 0.98);
        for (auto& t : truth) t = rng.next_double() < 0.5 ? 0.0 : 1.0;
        lossmath::VolumePair pair(pred, truth, dims);
        auto grad = lossmath::dice_loss_grad(pair, epsilon);

        for (std::size_t k = 0; k < n; ++k) {
            double saved = pred[k];
            pair.set_pred(k, saved + step);
            double up = lossmath::dice_loss(pair, epsilon);
            pair.set_pred(k, saved - step);
            double down = lossmath::dice_loss(pair, epsilon);
            pair.set_pred(k, saved);
            double numeric = (up - down) / (2.0 * step);
            double denom = std::max(std::abs(numeric), std::abs(grad[k]));
            if (denom > 0.0) worst = std::max(worst, std::abs(numeric - grad[k]) / denom);
        }
    }
    std::cout << "cases," << cases << ",max_relative_deviation," << format_double(worst) << "\n";
    if (worst >= 1e-5)
        fail(ErrorKind::ModelError,
             "dice_loss_grad deviates from finite differences by " + format_double(worst));
    std::cout << "gradient check passed\n";
    return 0;
}

// ---- pack ----------------------------------------------------------------

int cmd_pack(const std::string& out_dir, int count, const std::string& dims_text,
             std::uint64_t seed, int workers, const std::string& ratios_text,
             const std::string& crop_mode, std::int64_t crop_depth, int blobs) {
    auto dims_list = parse_int_list(dims_text, 3, "--dims");
    std::array<std::int64_t, 3> dims{dims_list[0], dims_list[1], dims_list[2]};
    auto ratios = parse_ratios(ratios_text);
    datapipe::CropMode mode;
    if (crop_mode == "leading") mode = datapipe::CropMode::Leading;
    else if (crop_mode == "center") mode = datapipe::CropMode::Center;
    else fail(ErrorKind::InputError, "crop mode must be 'leading' or 'center'");

    std::vector<datapipe::ProcessedSample> samples;
    for (int i = 0; i < count; ++i) {
        auto volume = datapipe::synth_volume(seed + static_cast<std::uint64_t>(i), dims, blobs,
                                             "sample-" + std::to_string(i));
        volume = datapipe::standardize(std::move(volume));
        if (crop_depth > 0) volume = datapipe::crop_depth(std::move(volume), crop_depth, mode);
        samples.push_back(datapipe::to_channels_first(volume));
    }

    fs::create_directories(out_dir);
    fs::path data_path = fs::path(out_dir) / "dataset.dmis";
    datapipe::PackOptions options;
    options.split_ratios = ratios;
    options.split_seed = seed;
    auto manifest = datapipe::pack_records(samples, workers, data_path, options);
    datapipe::save_manifest(manifest, fs::path(out_dir) / "manifest.json");

    std::cout << "packed," << samples.size() << ",bytes," << fs::file_size(data_path)
              << ",train," << manifest.split.train.size() << ",val,"
              << manifest.split.val.size() << ",test," << manifest.split.test.size() << "\n";
    return 0;
}

// ---- simulate ------------------------------------------------------------

void write_simulation(const clustersim::MakespanResult& result,
                      const clustersim::ClusterTopology& topo, const std::string& out_dir) {
    fs::create_directories(out_dir);
    {
        std::ofstream out(fs::path(out_dir) / "makespan.csv", std::ios::trunc);
        out << "trial,width,start,duration,finish\n";
        for (const auto& trial : result.assignments)
            out << trial.experiment_id << "," << trial.gpus.size() << ","
                << format_double(trial.start) << "," << format_double(trial.duration) << ","
                << format_double(trial.finish()) << "\n";
        out << "makespan," << format_double(result.makespan) << ",,,\n";
    }
    {
        std::ofstream out(fs::path(out_dir) / "trace.txt", std::ios::trunc);
        for (const auto& event : result.trace)
            out << format_double(event.time) << " gpu" << event.gpu.node << "." << event.gpu.slot
                << " trial" << event.experiment_id << " " << (event.is_start ? "start" : "finish")
                << "\n";
    }
    {
        std::ofstream out(fs::path(out_dir) / "utilization.csv", std::ios::trunc);
        out << "node,slot,utilization\n";
        for (std::size_t i = 0; i < result.gpu_utilization.size(); ++i)
            out << i / static_cast<std::size_t>(topo.gpus_per_node) << ","
                << i % static_cast<std::size_t>(topo.gpus_per_node) << ","
                << format_double(result.gpu_utilization[i]) << "\n";
    }
}

int cmd_simulate(const std::string& config_path, const std::string& strategy, int nodes,
                 int gpus_per_node, int fixed_gpus, const std::string& cost_params_path,
                 const std::string& out_dir) {
    config::RunConfig cfg;
    if (!config_path.empty()) cfg = config::RunConfig::from_file(config_path);
    if (nodes > 0) cfg.topology.node_count = nodes;
    if (gpus_per_node > 0) cfg.topology.gpus_per_node = gpus_per_node;
    cfg.topology.validate();

    if (cfg.injected_schedule) {
        auto result = clustersim::simulate(*cfg.injected_schedule, cfg.topology);
        write_simulation(result, cfg.topology, out_dir);
        std::cout << "makespan," << format_double(result.makespan) << "\n";
        return 0;
    }

    costcal::CostParams cost = cfg.cost;
    if (!cost_params_path.empty()) cost = costcal::load_cost_params(cost_params_path);

    std::vector<hpgrid::ExperimentSpec> specs;
    if (cfg.grid) {
        specs = hpgrid::cross_product(*cfg.grid);
    } else {
        specs.resize(static_cast<std::size_t>(cost.grid_size));
        for (int i = 0; i < cost.grid_size; ++i) {
            specs[static_cast<std::size_t>(i)].id = i;
            specs[static_cast<std::size_t>(i)].epochs = cost.epochs;
        }
    }
    if (!cost.heterogeneity.empty() &&
        cost.heterogeneity.size() != specs.size())
        cost.heterogeneity.clear(); // grid overrides a mismatched profile

    auto oracle = costcal::duration_oracle(cost, cfg.topology);
    clustersim::Schedule schedule;
    if (strategy == "data") {
        std::cout << "strategy,"
                  << clustersim::to_string(clustersim::select_parallelism_level(
                         cfg.topology.total_gpus(), cfg.topology.gpus_per_node))
                  << "\n";
        schedule = clustersim::plan_data_parallel(specs, cfg.topology, oracle);
    } else if (strategy == "experiment") {
        std::cout << "strategy," << clustersim::to_string(clustersim::StrategyKind::ExperimentParallel)
                  << "\n";
        auto policy = fixed_gpus > 0 ? clustersim::GpusPerTrialPolicy::fixed(fixed_gpus)
                                     : clustersim::GpusPerTrialPolicy::auto_size();
        schedule = clustersim::plan_experiment_parallel(specs, cfg.topology, oracle, policy);
    } else {
        fail(ErrorKind::InputError, "strategy must be 'data' or 'experiment'");
    }

    auto result = clustersim::simulate(schedule, cfg.topology);
    write_simulation(result, cfg.topology, out_dir);
    std::cout << "makespan," << format_double(result.makespan) << "\n";
    return 0;
}

// ---- calibrate -----------------------------------------------------------

int cmd_calibrate(const std::string& reference_path, std::uint64_t seed,
                  const std::string& bounds_path, const std::string& out_dir) {
    auto table = reference::load_table_csv(reference_path);
    costcal::SearchConfig cfg;
    if (!bounds_path.empty()) cfg = costcal::load_search_config(bounds_path);
    cfg.seed = seed;

    auto result = costcal::calibrate(table, cfg);

    fs::create_directories(out_dir);
    costcal::save_cost_params(result.params, (fs::path(out_dir) / "cost_params.json").string());
    {
        std::ofstream out(fs::path(out_dir) / "residuals.csv", std::ios::trunc);
        out << "method,n,residual\n";
        std::size_t half = result.residuals.size() / 2;
        auto rows = costcal::predict_table(result.params);
        for (std::size_t i = 0; i < half; ++i)
            out << "data," << rows[i].n_gpus << "," << format_double(result.residuals[i]) << "\n";
        for (std::size_t i = 0; i < half; ++i)
            out << "experiment," << rows[i].n_gpus << ","
                << format_double(result.residuals[half + i]) << "\n";
    }
    double worst = 0.0;
    for (double r : result.residuals) worst = std::max(worst, std::abs(r));
    std::cout << "fitted_grid_size," << result.params.grid_size << ",objective,"
              << format_double(result.objective) << ",max_residual," << format_double(worst)
              << "\n";
    std::cout << "trace," << result.trace_summary << "\n";
    return 0;
}

// ---- report --------------------------------------------------------------

int cmd_report(const std::string& reference_path, const std::string& params_path,
               const std::string& out_dir) {
    auto table = reference::load_table_csv(reference_path);
    report::Report rep;
    if (params_path.empty())
        rep = report::reference_report(table);
    else
        rep = report::predicted_report(costcal::load_cost_params(params_path), table);

    fs::create_directories(out_dir);
    report::write_report_csv(rep, fs::path(out_dir) / "report.csv");
    auto files = report::emit_plot_data(rep, out_dir);
    std::cout << "report_rows," << rep.rows.size() << ",files," << files.size() + 1 << "\n";
    return 0;
}

} // namespace

int run_command(const std::vector<std::string>& args) {
    CLI::App app{"Distributed training study toolkit for 3D segmentation workloads"};
    app.require_subcommand(1);

    std::string config_path, out_path, out_dir = default_output_dir();

    auto* grid = app.add_subcommand("grid", "Expand the hyper-parameter grid to CSV");
    grid->add_option("--config", config_path, "Run configuration (JSON)")->required();
    grid->add_option("--out", out_path, "Also write the CSV to this path");

    int base_filters = 8, steps = 4, in_channels = 4, out_channels = 1;
    bool no_bias = false, no_bn_stats = false, transposed_same = false, arch_csv = false;
    std::string input_dims = "4,240,240,152", json_path;
    std::int64_t memory_batch = 0, gpu_memory = 16ll * 1024 * 1024 * 1024;
    auto* arch = app.add_subcommand("arch", "Print the network layer table and parameter counts");
    arch->add_option("--base-filters", base_filters);
    arch->add_option("--steps", steps);
    arch->add_option("--in-channels", in_channels);
    arch->add_option("--out-channels", out_channels);
    arch->add_flag("--no-bias", no_bias, "Build convolutions without bias terms");
    arch->add_flag("--no-bn-stats", no_bn_stats, "Exclude batchnorm running statistics");
    arch->add_flag("--transposed-same-width", transposed_same,
                   "Transposed convolutions keep the source step's filter count");
    arch->add_option("--input", input_dims, "Input shape C,H,W,D");
    arch->add_flag("--csv", arch_csv, "Emit the layer table as CSV");
    arch->add_option("--json", json_path, "Write the parameter breakdown as JSON");
    arch->add_option("--memory-batch", memory_batch,
                     "Run the memory feasibility check at this per-replica batch");
    arch->add_option("--gpu-memory", gpu_memory, "GPU memory bytes for the check");

    std::uint64_t seed = 0;
    int cases = 100;
    double epsilon = 0.1, fd_step = 1e-6;
    auto* dice = app.add_subcommand("dice-check", "Verify the loss gradient by finite differences");
    dice->add_option("--seed", seed);
    dice->add_option("--cases", cases);
    dice->add_option("--epsilon", epsilon);
    dice->add_option("--step", fd_step);

    int count = 16, workers = 1, blobs = 2;
    std::string dims_text = "24,24,16", ratios_text = "0.70,0.15,0.15", crop_mode = "leading";
    std::int64_t crop_depth_opt = 0;
    std::uint64_t pack_seed = 7;
    auto* pack = app.add_subcommand("pack", "Generate, preprocess and binarize synthetic volumes");
    pack->add_option("--out", out_dir, "Output directory");
    pack->add_option("--count", count);
    pack->add_option("--dims", dims_text, "Volume dims H,W,D");
    pack->add_option("--seed", pack_seed);
    pack->add_option("--workers", workers);
    pack->add_option("--ratios", ratios_text);
    pack->add_option("--crop", crop_mode, "leading|center");
    pack->add_option("--crop-depth", crop_depth_opt, "Crop target depth (0 keeps full depth)");
    pack->add_option("--blobs", blobs, "Foreground blobs per synthetic volume");

    std::string strategy = "data", cost_params_path;
    int nodes = 0, gpus_per_node = 0, fixed_gpus = 0;
    auto* sim = app.add_subcommand("simulate", "Plan and simulate a training schedule");
    sim->add_option("--config", config_path, "Run configuration (JSON)");
    sim->add_option("--strategy", strategy, "data|experiment");
    sim->add_option("--nodes", nodes, "Override node count");
    sim->add_option("--gpus-per-node", gpus_per_node, "Override GPUs per node (default 4)");
    sim->add_option("--fixed-gpus", fixed_gpus, "Fixed GPUs per trial (experiment strategy)");
    sim->add_option("--cost-params", cost_params_path, "Fitted cost parameters (JSON)");
    sim->add_option("--out", out_dir, "Output directory");

    std::string reference_path = "bundled", bounds_path;
    auto* cal = app.add_subcommand("calibrate", "Fit the cost model to a reference table");
    cal->add_option("--reference", reference_path, "'bundled' or a CSV path");
    cal->add_option("--seed", seed);
    cal->add_option("--bounds", bounds_path, "Search bounds (JSON)");
    cal->add_option("--out", out_dir, "Output directory");

    std::string params_path;
    auto* rep = app.add_subcommand("report", "Emit the comparison table and plot data");
    rep->add_option("--reference", reference_path, "'bundled' or a CSV path");
    rep->add_option("--params", params_path, "Fitted cost parameters (JSON)");
    rep->add_option("--out", out_dir, "Output directory");

    std::vector<const char*> argv;
    argv.push_back("dmis");
    for (const auto& a : args) argv.push_back(a.c_str());

    std::string active = "dmis";
    try {
        try {
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e);
        } catch (const CLI::CallForAllHelp& e) {
            return app.exit(e);
        } catch (const CLI::ParseError& e) {
            std::cerr << "usage error: " << e.what() << "\n";
            std::cerr << app.help() << "\n";
            return 2;
        }

        if (grid->parsed()) {
            active = "grid";
            return cmd_grid(config_path, out_path);
        }
        if (arch->parsed()) {
            active = "arch";
            return cmd_arch(base_filters, steps, in_channels, out_channels, no_bias, no_bn_stats,
                            transposed_same, input_dims, arch_csv, json_path, memory_batch,
                            gpu_memory);
        }
        if (dice->parsed()) {
            active = "dice-check";
            return cmd_dice_check(seed, cases, epsilon, fd_step);
        }
        if (pack->parsed()) {
            active = "pack";
            return cmd_pack(out_dir, count, dims_text, pack_seed, workers, ratios_text, crop_mode,
                            crop_depth_opt, blobs);
        }
        if (sim->parsed()) {
            active = "simulate";
            return cmd_simulate(config_path, strategy, nodes, gpus_per_node, fixed_gpus,
                                cost_params_path, out_dir);
        }
        if (cal->parsed()) {
            active = "calibrate";
            return cmd_calibrate(reference_path, seed, bounds_path, out_dir);
        }
        if (rep->parsed()) {
            active = "report";
            return cmd_report(reference_path, params_path, out_dir);
        }
        std::cerr << "usage error: no subcommand\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << active << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << active << ": " << e.what() << "\n";
        return 1;
    }
}

} // namespace dmis::cli
