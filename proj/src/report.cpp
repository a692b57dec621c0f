#include "dmis/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "dmis/format.hpp"

namespace dmis::report {

namespace {

std::map<int, ReportRow> rows_by_n(const std::vector<reference::Entry>& table) {
    std::map<int, ReportRow> rows;
    for (const auto& e : table) {
        ReportRow& row = rows[e.n_gpus];
        row.n_gpus = e.n_gpus;
        if (e.method == reference::Method::DataParallel) {
            row.data_elapsed = static_cast<double>(e.elapsed_seconds);
            row.data_speedup = e.speedup;
        } else {
            row.exp_elapsed = static_cast<double>(e.elapsed_seconds);
            row.exp_speedup = e.speedup;
        }
    }
    return rows;
}

} // namespace

Report reference_report(const std::vector<reference::Entry>& table) {
    Report report;
    for (auto& [n, row] : rows_by_n(table)) report.rows.push_back(row);
    return report;
}

Report predicted_report(const costcal::CostParams& params,
                        const std::vector<reference::Entry>& table) {
    auto ref_rows = rows_by_n(table);
    std::vector<int> ns;
    for (const auto& [n, row] : ref_rows) ns.push_back(n);

    Report report;
    report.predicted = true;
    auto predicted = costcal::predict_table(params, ns);
    auto specs_count = params.grid_size;
    for (const auto& p : predicted) {
        ReportRow row;
        row.n_gpus = p.n_gpus;
        row.data_elapsed = p.data_elapsed;
        row.data_speedup = p.data_speedup;
        row.exp_elapsed = p.exp_elapsed;
        row.exp_speedup = p.exp_speedup;

        auto it = ref_rows.find(p.n_gpus);
        if (it != ref_rows.end()) {
            row.data_residual = p.data_speedup / it->second.data_speedup - 1.0;
            row.exp_residual = p.exp_speedup / it->second.exp_speedup - 1.0;
        }

        // Utilization of the simulated schedules at this width.
        auto topo = clustersim::ClusterTopology::v100_preset(p.n_gpus);
        auto oracle = costcal::duration_oracle(params, topo);
        std::vector<hpgrid::ExperimentSpec> specs(static_cast<std::size_t>(specs_count));
        for (int i = 0; i < specs_count; ++i) {
            specs[static_cast<std::size_t>(i)].id = i;
            specs[static_cast<std::size_t>(i)].epochs = params.epochs;
        }
        auto mean_util = [&](const clustersim::Schedule& schedule) {
            auto sim = clustersim::simulate(schedule, topo);
            double sum = 0.0;
            for (double u : sim.gpu_utilization) sum += u;
            return sim.gpu_utilization.empty() ? 0.0 : sum / double(sim.gpu_utilization.size());
        };
        row.data_utilization = mean_util(clustersim::plan_data_parallel(specs, topo, oracle));
        row.exp_utilization = mean_util(clustersim::plan_experiment_parallel(specs, topo, oracle));
        report.rows.push_back(std::move(row));
    }
    return report;
}

void write_report_csv(const Report& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    out << "method,n,elapsed_s,speedup";
    if (report.predicted) out << ",residual,mean_utilization";
    out << "\n";
    auto emit = [&](const char* method, int n, double elapsed, double speedup,
                    const std::optional<double>& residual, const std::optional<double>& util) {
        out << method << "," << n << ",";
        if (report.predicted)
            out << format_double(elapsed) << "," << format_double(speedup);
        else
            out << static_cast<long>(elapsed) << "," << format_fixed(speedup, 2);
        if (report.predicted) {
            out << "," << (residual ? format_double(*residual) : "");
            out << "," << (util ? format_double(*util) : "");
        }
        out << "\n";
    };
    for (const auto& r : report.rows)
        emit("data", r.n_gpus, r.data_elapsed, r.data_speedup, r.data_residual,
             r.data_utilization);
    for (const auto& r : report.rows)
        emit("experiment", r.n_gpus, r.exp_elapsed, r.exp_speedup, r.exp_residual,
             r.exp_utilization);
}

namespace {

// Minimal line chart: two polylines with circle markers on a framed plot
// area, no interpolation beyond straight segments.
void write_svg(const std::filesystem::path& path, const std::string& title,
               const std::vector<int>& xs, const std::vector<double>& series_a,
               const std::vector<double>& series_b, const char* label_a, const char* label_b) {
    constexpr int kWidth = 640, kHeight = 420, kMargin = 56;
    double x_max = xs.empty() ? 1.0 : static_cast<double>(*std::max_element(xs.begin(), xs.end()));
    double y_max = 1.0;
    for (double v : series_a) y_max = std::max(y_max, v);
    for (double v : series_b) y_max = std::max(y_max, v);

    auto px = [&](double x) {
        return kMargin + (kWidth - 2 * kMargin) * (x_max > 0 ? x / x_max : 0.0);
    };
    auto py = [&](double y) {
        return kHeight - kMargin - (kHeight - 2 * kMargin) * (y / y_max);
    };

    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "  <text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << title << "</text>\n";
    out << "  <line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\""
        << kWidth - kMargin << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";
    out << "  <line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin
        << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";

    auto draw_series = [&](const std::vector<double>& ys, const char* colour, const char* label,
                           int legend_y) {
        if (xs.size() > 1) {
            out << "  <polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
            for (std::size_t i = 0; i < xs.size(); ++i)
                out << format_fixed(px(xs[i]), 1) << "," << format_fixed(py(ys[i]), 1) << " ";
            out << "\"/>\n";
        }
        for (std::size_t i = 0; i < xs.size(); ++i)
            out << "  <circle cx=\"" << format_fixed(px(xs[i]), 1) << "\" cy=\""
                << format_fixed(py(ys[i]), 1) << "\" r=\"3\" fill=\"" << colour << "\"/>\n";
        out << "  <text x=\"" << kWidth - kMargin - 150 << "\" y=\"" << legend_y
            << "\" font-size=\"12\" fill=\"" << colour << "\">" << label << "</text>\n";
    };
    draw_series(series_a, "#1f77b4", label_a, kMargin + 6);
    draw_series(series_b, "#d62728", label_b, kMargin + 22);

    for (std::size_t i = 0; i < xs.size(); ++i)
        out << "  <text x=\"" << format_fixed(px(xs[i]), 1) << "\" y=\"" << kHeight - kMargin + 16
            << "\" text-anchor=\"middle\" font-size=\"10\">" << xs[i] << "</text>\n";
    out << "  <text x=\"" << format_fixed(double(kMargin), 1) << "\" y=\"" << kMargin - 8
        << "\" font-size=\"10\">" << format_fixed(y_max, 1) << "</text>\n";
    out << "</svg>\n";
}

} // namespace

std::vector<std::filesystem::path> emit_plot_data(const Report& report,
                                                  const std::filesystem::path& out_dir) {
    if (report.rows.empty()) fail(ErrorKind::InputError, "report has no rows");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);

    std::vector<int> ns;
    std::vector<double> data_elapsed, exp_elapsed, data_speedup, exp_speedup;
    for (const auto& r : report.rows) {
        ns.push_back(r.n_gpus);
        data_elapsed.push_back(r.data_elapsed);
        exp_elapsed.push_back(r.exp_elapsed);
        data_speedup.push_back(r.data_speedup);
        exp_speedup.push_back(r.exp_speedup);
    }

    std::vector<std::filesystem::path> written;
    auto csv = [&](const std::string& name, const char* header, const std::vector<double>& a,
                   const std::vector<double>& b, bool fixed2) {
        std::filesystem::path p = out_dir / name;
        std::ofstream out(p, std::ios::trunc);
        if (!out) fail(ErrorKind::IoError, "cannot open " + p.string() + " for writing");
        out << header << "\n";
        for (std::size_t i = 0; i < ns.size(); ++i) {
            out << ns[i] << ",";
            if (fixed2)
                out << format_fixed(a[i], 2) << "," << format_fixed(b[i], 2) << "\n";
            else
                out << format_double(a[i]) << "," << format_double(b[i]) << "\n";
        }
        written.push_back(p);
    };
    // Reference speedups are published with two decimals; predictions keep
    // full round-trip precision.
    csv("elapsed.csv", "n,data_elapsed_s,experiment_elapsed_s", data_elapsed, exp_elapsed, false);
    csv("speedup.csv", "n,data_speedup,experiment_speedup", data_speedup, exp_speedup,
        !report.predicted);

    std::filesystem::path elapsed_svg = out_dir / "elapsed.svg";
    write_svg(elapsed_svg, "Elapsed time by GPU count", ns, data_elapsed, exp_elapsed,
              "data parallel", "experiment parallel");
    written.push_back(elapsed_svg);
    std::filesystem::path speedup_svg = out_dir / "speedup.svg";
    write_svg(speedup_svg, "Speedup by GPU count", ns, data_speedup, exp_speedup,
              "data parallel", "experiment parallel");
    written.push_back(speedup_svg);
    return written;
}

MemoryFeasibility memory_feasibility_check(const archmodel::ArchDescriptor& desc,
                                           const archmodel::TensorShape& input,
                                           std::int64_t per_replica_batch,
                                           const clustersim::ClusterTopology& topo) {
    MemoryFeasibility result;
    result.estimate_bytes = archmodel::estimate_activation_memory(desc, input, per_replica_batch);
    result.capacity_bytes = topo.gpu_memory_bytes;
    result.headroom_bytes = result.capacity_bytes - result.estimate_bytes;
    result.pass = result.headroom_bytes >= 0;
    return result;
}

} // namespace dmis::report
