#include "dmis/reference.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dmis::reference {

const char* to_string(Method method) {
    return method == Method::DataParallel ? "data" : "experiment";
}

namespace {

std::vector<Entry> build_table() {
    struct Row {
        int n;
        const char* data_elapsed;
        double data_speedup;
        const char* exp_elapsed;
        double exp_speedup;
    };
    static constexpr Row rows[] = {
        {1, "44:18:02", 1.00, "44:20:19", 1.00},
        {2, "23:09:28", 1.91, "22:24:39", 1.98},
        {4, "15:09:35", 2.92, "11:32:20", 3.84},
        {8, "7:41:12", 5.76, "7:03:17", 6.28},
        {12, "5:59:59", 7.38, "5:35:22", 7.93},
        {16, "4:26:50", 9.96, "4:11:54", 10.56},
        {32, "3:21:44", 13.18, "2:55:06", 15.19},
    };
    std::vector<Entry> table;
    for (const Row& r : rows)
        table.push_back({Method::DataParallel, r.n, parse_duration_seconds(r.data_elapsed),
                         r.data_speedup});
    for (const Row& r : rows)
        table.push_back({Method::ExperimentParallel, r.n, parse_duration_seconds(r.exp_elapsed),
                         r.exp_speedup});
    return table;
}

} // namespace

const std::vector<Entry>& bundled_table() {
    static const std::vector<Entry> table = build_table();
    return table;
}

const std::vector<int>& bundled_gpu_counts() {
    static const std::vector<int> ns = {1, 2, 4, 8, 12, 16, 32};
    return ns;
}

long parse_duration_seconds(std::string_view hms) {
    long parts[3] = {0, 0, 0};
    int count = 0;
    const char* p = hms.data();
    const char* end = p + hms.size();
    while (p < end && count < 3) {
        long value = 0;
        auto [next, ec] = std::from_chars(p, end, value);
        if (ec != std::errc() || value < 0)
            fail(ErrorKind::InvalidTime, "bad duration '" + std::string(hms) + "'");
        parts[count++] = value;
        p = next;
        if (p < end) {
            if (*p != ':') fail(ErrorKind::InvalidTime, "bad duration '" + std::string(hms) + "'");
            ++p;
        }
    }
    if (count != 3 || p != end)
        fail(ErrorKind::InvalidTime, "duration must be H:MM:SS, got '" + std::string(hms) + "'");
    if (parts[1] > 59 || parts[2] > 59)
        fail(ErrorKind::InvalidTime, "minutes and seconds must be < 60 in '" + std::string(hms) + "'");
    return parts[0] * 3600 + parts[1] * 60 + parts[2];
}

std::string format_duration(long seconds) {
    if (seconds < 0) fail(ErrorKind::InvalidTime, "negative duration");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%ld:%02ld:%02ld", seconds / 3600, (seconds / 60) % 60,
                  seconds % 60);
    return buf;
}

std::vector<Entry> load_table_csv(const std::string& path_or_bundled) {
    if (path_or_bundled.empty() || path_or_bundled == "bundled") return bundled_table();

    std::ifstream in(path_or_bundled);
    if (!in) fail(ErrorKind::IoError, "cannot open reference table " + path_or_bundled);

    std::vector<Entry> table;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::istringstream row(line);
        std::string method, n, elapsed, speedup;
        if (!std::getline(row, method, ',') || !std::getline(row, n, ',') ||
            !std::getline(row, elapsed, ',') || !std::getline(row, speedup))
            fail(ErrorKind::InputError, "reference row '" + line + "' is malformed");
        Entry e;
        if (method == "data")
            e.method = Method::DataParallel;
        else if (method == "experiment")
            e.method = Method::ExperimentParallel;
        else
            fail(ErrorKind::InputError, "unknown method '" + method + "'");
        try {
            e.n_gpus = std::stoi(n);
            e.elapsed_seconds = elapsed.find(':') != std::string::npos
                                    ? parse_duration_seconds(elapsed)
                                    : std::stol(elapsed);
            e.speedup = std::stod(speedup);
        } catch (const std::exception&) {
            fail(ErrorKind::InputError, "reference row '" + line + "' is malformed");
        }
        table.push_back(e);
    }
    if (table.empty()) fail(ErrorKind::InputError, "reference table is empty");
    return table;
}

} // namespace dmis::reference
