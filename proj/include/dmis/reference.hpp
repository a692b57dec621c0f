#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dmis/error.hpp"

namespace dmis::reference {

enum class Method { DataParallel, ExperimentParallel };

const char* to_string(Method method);

struct Entry {
    Method method = Method::DataParallel;
    int n_gpus = 1;
    long elapsed_seconds = 0;
    double speedup = 1.0;
};

// The published benchmark: elapsed wall-clock and speedup for both
// distribution methods at 1..32 GPUs, 14 entries total.
const std::vector<Entry>& bundled_table();

// GPU counts covered by the reference, ascending.
const std::vector<int>& bundled_gpu_counts();

// Parses "H:MM:SS" with unbounded hours (e.g. "44:18:02") to seconds.
long parse_duration_seconds(std::string_view hms);

std::string format_duration(long seconds);

// Loads a reference table from CSV with header method,n,elapsed_s,speedup.
// "bundled" or an empty path returns the built-in table.
std::vector<Entry> load_table_csv(const std::string& path_or_bundled);

} // namespace dmis::reference
