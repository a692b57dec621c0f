#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dmis/datapipe.hpp"

namespace dmis::datapipe {

// Offline dataset container. The byte layout is normative:
//
//   file   := magic "DMIS" | version u16 | record*
//   record := id_len u32 | id bytes | dtype u8 (1 = f32)
//           | image dims 4 x u32 (C,H,W,D) | mask dims 4 x u32
//           | payload_len u64 | payload | crc32 u32
//
// All integers little-endian. The payload is the image tensor followed by
// the mask tensor, both stored as little-endian f32. The CRC covers the
// payload only.
inline constexpr char kRecordMagic[4] = {'D', 'M', 'I', 'S'};
inline constexpr std::uint16_t kRecordVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;

struct ManifestEntry {
    std::string id;
    std::uint64_t offset = 0; // start of the record, from the file head
    std::uint64_t length = 0; // full record length in bytes
};

struct DatasetManifest {
    std::vector<ManifestEntry> records;
    SplitIndices split;
    std::array<double, 3> ratios{0.70, 0.15, 0.15};
    std::uint64_t shuffle_seed = 0;
};

struct PackOptions {
    std::array<double, 3> split_ratios{0.70, 0.15, 0.15};
    std::uint64_t split_seed = 0;
    bool with_split = true; // disabled for fewer than 3 samples
};

// Serializes samples into the record file at `path`, fanning the per-sample
// encoding across `workers` threads. Records land in input order and the
// output bytes are identical for every worker count.
DatasetManifest pack_records(const std::vector<ProcessedSample>& samples, int workers,
                             const std::filesystem::path& path, PackOptions options = {});

// Reads all records back in manifest order, verifying each CRC.
std::vector<ProcessedSample> read_records(const std::filesystem::path& path,
                                          const DatasetManifest& manifest);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

} // namespace dmis::datapipe
