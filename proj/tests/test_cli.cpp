#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dmis/cli.hpp"
#include "dmis/config.hpp"
#include "dmis/format.hpp"
#include "dmis/reference.hpp"
#include "dmis/report.hpp"

using namespace dmis;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& leaf) {
    auto dir = fs::temp_directory_path() / "dmis_cli_tests" / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    out << text;
    return path;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<char> slurp_binary(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// stdout capture around a CLI invocation
struct CoutCapture {
    std::ostringstream buffer;
    std::streambuf* saved;
    CoutCapture() : saved(std::cout.rdbuf(buffer.rdbuf())) {}
    ~CoutCapture() { std::cout.rdbuf(saved); }
    std::string text() const { return buffer.str(); }
};

} // namespace

TEST_SUITE("cli") {

TEST_CASE("grid expands a config to CSV") {
    auto dir = temp_dir("grid");
    auto config = write_file(dir / "run.json", R"({
      "grid": {"lr": [0.0001, 0.001], "opt": ["adam", "sgd"]},
      "topology": {"nodes": 4, "gpus_per_node": 4}
    })");
    auto out = dir / "grid.csv";
    CoutCapture capture;
    int rc = cli::run_command({"grid", "--config", config.string(), "--out", out.string()});
    CHECK(rc == 0);
    std::string csv = slurp(out);
    CHECK(csv.find("id,lr,opt,global_batch,lr\n") == 0);
    CHECK(csv.find("0,0.0001,adam,32,0.0016") != std::string::npos);
    CHECK(csv.find("3,0.001,sgd,32,0.0016") != std::string::npos);
}

TEST_CASE("unknown subcommands are usage errors") {
    CHECK(cli::run_command({"frobnicate"}) == 2);
    CHECK(cli::run_command({}) == 2);
    CHECK(cli::run_command({"--help"}) == 0);
}

TEST_CASE("strict configs reject unknown keys") {
    auto dir = temp_dir("strict");
    auto config = write_file(dir / "bad.json", R"({"topology": {"nodez": 4}})");
    CoutCapture capture;
    CHECK(cli::run_command({"grid", "--config", config.string()}) == 1);

    CHECK_THROWS_AS(config::RunConfig::from_json_text(R"({"unknown_section": 1})"), Error);
    try {
        config::RunConfig::from_json_text(R"({"pipeline": {"blobs": 2}})");
        FAIL("expected InputError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InputError);
    }
}

TEST_CASE("config defaults reproduce the deployment constants") {
    auto cfg = config::RunConfig::from_json_text("{}");
    CHECK(cfg.topology.gpus_per_node == 4);
    CHECK(cfg.cost.epochs == 250);
    CHECK(cfg.loss_epsilon == 0.1);
    CHECK(cfg.pipeline.ratios == std::array<double, 3>{0.70, 0.15, 0.15});
}

TEST_CASE("simulate reports schedule conflicts from a crafted config") {
    auto dir = temp_dir("conflict");
    auto config = write_file(dir / "run.json", R"({
      "topology": {"nodes": 1, "gpus_per_node": 2},
      "schedule": [
        {"experiment": 0, "gpus": [[0, 0]], "start": 0, "duration": 10},
        {"experiment": 1, "gpus": [[0, 0]], "start": 5, "duration": 10}
      ]
    })");
    CoutCapture capture;
    int rc = cli::run_command({"simulate", "--config", config.string(), "--out",
                               (dir / "out").string()});
    CHECK(rc == 1);
}

TEST_CASE("simulate writes a makespan table and event trace") {
    auto dir = temp_dir("simulate");
    auto config = write_file(dir / "run.json", R"({
      "grid": {"lr": [0.0001, 0.001, 0.01]},
      "topology": {"nodes": 1, "gpus_per_node": 2},
      "cost": {"t_step_base": 0.001, "samples_train": 32, "epochs": 1}
    })");
    CoutCapture capture;
    int rc = cli::run_command({"simulate", "--config", config.string(), "--strategy",
                               "experiment", "--fixed-gpus", "1", "--out",
                               (dir / "out").string()});
    CHECK(rc == 0);
    CHECK(capture.text().find("strategy,experiment_parallel") != std::string::npos);
    std::string makespan = slurp(dir / "out" / "makespan.csv");
    CHECK(makespan.find("trial,width,start,duration,finish") == 0);
    std::string trace = slurp(dir / "out" / "trace.txt");
    CHECK(trace.find("trial0 start") != std::string::npos);
    CHECK(trace.find("trial2 finish") != std::string::npos);
}

TEST_CASE("report --reference bundled passes the table through verbatim") {
    auto dir = temp_dir("report");
    CoutCapture capture;
    int rc = cli::run_command({"report", "--out", dir.string()});
    CHECK(rc == 0);

    std::string report = slurp(dir / "report.csv");
    CHECK(report.find("data,1,159482,1.00\n") != std::string::npos);
    CHECK(report.find("data,32,12104,13.18\n") != std::string::npos);
    CHECK(report.find("experiment,32,10506,15.19\n") != std::string::npos);

    std::string speedup = slurp(dir / "speedup.csv");
    CHECK(speedup.find("32,13.18,15.19") != std::string::npos);
    CHECK(slurp(dir / "elapsed.csv").find("32,12104,10506") != std::string::npos);
    CHECK(fs::exists(dir / "speedup.svg"));
    CHECK(fs::exists(dir / "elapsed.svg"));
}

TEST_CASE("pack artifacts are byte-identical across runs and worker counts") {
    auto dir_a = temp_dir("pack_a");
    auto dir_b = temp_dir("pack_b");
    CoutCapture capture;
    CHECK(cli::run_command({"pack", "--out", dir_a.string(), "--count", "6", "--dims", "12,12,10",
                            "--seed", "5", "--workers", "1"}) == 0);
    CHECK(cli::run_command({"pack", "--out", dir_b.string(), "--count", "6", "--dims", "12,12,10",
                            "--seed", "5", "--workers", "4"}) == 0);
    CHECK(slurp_binary(dir_a / "dataset.dmis") == slurp_binary(dir_b / "dataset.dmis"));
    CHECK(slurp(dir_a / "manifest.json") == slurp(dir_b / "manifest.json"));
}

TEST_CASE("dice-check passes at the default tolerance") {
    CoutCapture capture;
    CHECK(cli::run_command({"dice-check", "--seed", "9", "--cases", "25"}) == 0);
    CHECK(capture.text().find("gradient check passed") != std::string::npos);
}

TEST_CASE("arch emits the frozen parameter totals") {
    CoutCapture capture;
    CHECK(cli::run_command({"arch", "--csv"}) == 0);
    CHECK(capture.text().find("total_params,352513") != std::string::npos);

    CoutCapture capture2;
    CHECK(cli::run_command({"arch", "--csv", "--no-bias", "--no-bn-stats",
                            "--transposed-same-width"}) == 0);
    CHECK(capture2.text().find("total_params,409192") != std::string::npos);
}

TEST_CASE("memory feasibility check at reference scale") {
    auto desc = archmodel::build_unet3d();
    clustersim::ClusterTopology topo; // 16 GiB

    auto toy = archmodel::build_unet3d(8, 2, 4, 1);
    auto small = report::memory_feasibility_check(toy, {4, 16, 16, 16}, 2, topo);
    CHECK(small.pass);
    CHECK(small.headroom_bytes > topo.gpu_memory_bytes / 2);

    auto big = report::memory_feasibility_check(desc, {4, 240, 240, 152}, 1024, topo);
    CHECK_FALSE(big.pass);
    CHECK(big.headroom_bytes < 0);
}

TEST_CASE("bundled durations round-trip through the formatter") {
    for (const auto& entry : reference::bundled_table()) {
        auto text = reference::format_duration(entry.elapsed_seconds);
        CHECK(reference::parse_duration_seconds(text) == entry.elapsed_seconds);
    }
    CHECK(reference::parse_duration_seconds("44:18:02") == 159482);
    CHECK(reference::format_duration(159482) == "44:18:02");
    CHECK_THROWS_AS(reference::parse_duration_seconds("44:61:02"), Error);
    CHECK_THROWS_AS(reference::parse_duration_seconds("nonsense"), Error);
}

TEST_CASE("plot data round-trips numerically") {
    auto dir = temp_dir("plots");
    report::Report rep;
    rep.predicted = true;
    report::ReportRow row;
    row.n_gpus = 4;
    row.data_elapsed = 54575.125;
    row.data_speedup = 2.9224517891330602;
    row.exp_elapsed = 41540.0;
    row.exp_speedup = 3.8424531535387578;
    rep.rows.push_back(row);
    auto files = report::emit_plot_data(rep, dir);
    CHECK(files.size() == 4);

    std::string speedup_csv = slurp(dir / "speedup.csv");
    std::istringstream lines(speedup_csv);
    std::string header, data_line;
    std::getline(lines, header);
    std::getline(lines, data_line);
    double n, data_speedup, exp_speedup;
    char comma;
    std::istringstream parse(data_line);
    parse >> n >> comma >> data_speedup >> comma >> exp_speedup;
    CHECK(data_speedup == row.data_speedup); // exact decimal round-trip
    CHECK(exp_speedup == row.exp_speedup);

    // single point: circles but no connecting polyline
    std::string svg = slurp(dir / "speedup.svg");
    CHECK(svg.find("<circle") != std::string::npos);
    CHECK(svg.find("<polyline") == std::string::npos);
}

TEST_CASE("calibrate writes reusable cost parameters") {
    auto dir = temp_dir("calibrate");
    CoutCapture capture;
    CHECK(cli::run_command({"calibrate", "--out", dir.string()}) == 0);
    CHECK(fs::exists(dir / "cost_params.json"));
    CHECK(fs::exists(dir / "residuals.csv"));

    auto params = costcal::load_cost_params((dir / "cost_params.json").string());
    CHECK(params.grid_size >= 4);

    auto report_dir = temp_dir("calibrated_report");
    CoutCapture capture2;
    CHECK(cli::run_command({"report", "--params", (dir / "cost_params.json").string(), "--out",
                            report_dir.string()}) == 0);
    std::string report = slurp(report_dir / "report.csv");
    CHECK(report.find("residual") != std::string::npos);
}

} // TEST_SUITE
