#include "dmis/record_io.hpp"

#include <atomic>
#include <cstring>
#include <fstream>
#include <thread>

#include <zlib.h>
#include <nlohmann/json.hpp>

namespace dmis::datapipe {

namespace {

using ordered_json = nlohmann::ordered_json;

void append_bytes(std::vector<std::uint8_t>& out, const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + size);
}

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xff));
}

template <typename T>
T read_le(const std::uint8_t* p) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        value |= static_cast<T>(p[i]) << (8 * i);
    return value;
}

std::uint32_t payload_crc(const std::uint8_t* data, std::size_t size) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(size)));
}

void append_f32_le(std::vector<std::uint8_t>& out, const std::vector<float>& values) {
    static_assert(sizeof(float) == 4);
    for (float v : values) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        append_le(out, bits);
    }
}

std::vector<std::uint8_t> encode_record(const ProcessedSample& sample) {
    std::vector<std::uint8_t> rec;
    append_le(rec, static_cast<std::uint32_t>(sample.id.size()));
    append_bytes(rec, sample.id.data(), sample.id.size());
    rec.push_back(kDtypeF32);
    for (std::int64_t d : sample.image_dims) append_le(rec, static_cast<std::uint32_t>(d));
    for (std::int64_t d : sample.mask_dims) append_le(rec, static_cast<std::uint32_t>(d));

    std::vector<std::uint8_t> payload;
    payload.reserve((sample.image.size() + sample.mask.size()) * 4);
    append_f32_le(payload, sample.image);
    append_f32_le(payload, sample.mask);

    append_le(rec, static_cast<std::uint64_t>(payload.size()));
    append_bytes(rec, payload.data(), payload.size());
    append_le(rec, payload_crc(payload.data(), payload.size()));
    return rec;
}

} // namespace

DatasetManifest pack_records(const std::vector<ProcessedSample>& samples, int workers,
                             const std::filesystem::path& path, PackOptions options) {
    if (workers < 1) fail(ErrorKind::InvalidCount, "workers must be >= 1");

    // Encode in parallel, write in input order.
    std::vector<std::vector<std::uint8_t>> encoded(samples.size());
    if (!samples.empty()) {
        std::atomic<std::size_t> next{0};
        auto encode_loop = [&]() {
            for (std::size_t i = next.fetch_add(1); i < samples.size(); i = next.fetch_add(1))
                encoded[i] = encode_record(samples[i]);
        };
        int pool = std::min<int>(workers, static_cast<int>(samples.size()));
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(pool) - 1);
        for (int t = 1; t < pool; ++t) threads.emplace_back(encode_loop);
        encode_loop();
        for (auto& t : threads) t.join();
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    out.write(kRecordMagic, 4);
    std::uint8_t version_le[2] = {kRecordVersion & 0xff, kRecordVersion >> 8};
    out.write(reinterpret_cast<const char*>(version_le), 2);

    DatasetManifest manifest;
    manifest.ratios = options.split_ratios;
    manifest.shuffle_seed = options.split_seed;
    std::uint64_t offset = 6;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        out.write(reinterpret_cast<const char*>(encoded[i].data()),
                  static_cast<std::streamsize>(encoded[i].size()));
        manifest.records.push_back({samples[i].id, offset, encoded[i].size()});
        offset += encoded[i].size();
    }
    out.flush();
    if (!out) fail(ErrorKind::IoError, "write to " + path.string() + " failed");

    if (options.with_split && samples.size() >= 3)
        manifest.split = split_dataset(static_cast<int>(samples.size()), options.split_ratios,
                                       options.split_seed);
    return manifest;
}

std::vector<ProcessedSample> read_records(const std::filesystem::path& path,
                                          const DatasetManifest& manifest) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());

    char magic[4];
    std::uint8_t version_raw[2];
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(version_raw), 2);
    if (!in || std::memcmp(magic, kRecordMagic, 4) != 0)
        fail(ErrorKind::IoError, path.string() + " is not a DMIS record file");
    if (read_le<std::uint16_t>(version_raw) != kRecordVersion)
        fail(ErrorKind::IoError, "unsupported record format version");

    std::vector<ProcessedSample> samples;
    samples.reserve(manifest.records.size());
    for (const ManifestEntry& entry : manifest.records) {
        std::vector<std::uint8_t> rec(entry.length);
        in.seekg(static_cast<std::streamoff>(entry.offset));
        in.read(reinterpret_cast<char*>(rec.data()), static_cast<std::streamsize>(entry.length));
        if (!in) fail(ErrorKind::IoError, "record '" + entry.id + "' is truncated");

        const std::uint8_t* p = rec.data();
        const std::uint8_t* end = rec.data() + rec.size();
        auto need = [&](std::size_t bytes) {
            if (p + bytes > end)
                fail(ErrorKind::IoError, "record '" + entry.id + "' is truncated");
        };

        need(4);
        auto id_len = read_le<std::uint32_t>(p);
        p += 4;
        need(id_len);
        ProcessedSample sample;
        sample.id.assign(reinterpret_cast<const char*>(p), id_len);
        p += id_len;

        need(1 + 8 * 4 + 8);
        if (*p != kDtypeF32)
            fail(ErrorKind::IoError, "record '" + entry.id + "' has unknown dtype");
        ++p;
        for (auto& d : sample.image_dims) {
            d = read_le<std::uint32_t>(p);
            p += 4;
        }
        for (auto& d : sample.mask_dims) {
            d = read_le<std::uint32_t>(p);
            p += 4;
        }
        auto payload_len = read_le<std::uint64_t>(p);
        p += 8;

        std::uint64_t image_elems = 1, mask_elems = 1;
        for (std::int64_t d : sample.image_dims) image_elems *= static_cast<std::uint64_t>(d);
        for (std::int64_t d : sample.mask_dims) mask_elems *= static_cast<std::uint64_t>(d);
        if ((image_elems + mask_elems) * 4 != payload_len)
            fail(ErrorKind::CorruptRecord,
                 "record '" + entry.id + "': dims do not match payload length");

        need(payload_len + 4);
        std::uint32_t stored_crc = read_le<std::uint32_t>(p + payload_len);
        if (payload_crc(p, payload_len) != stored_crc)
            fail(ErrorKind::CorruptRecord, "record '" + entry.id + "' failed its CRC check");

        auto read_f32 = [&](std::vector<float>& dst, std::uint64_t count) {
            dst.resize(count);
            for (std::uint64_t i = 0; i < count; ++i) {
                std::uint32_t bits = read_le<std::uint32_t>(p);
                p += 4;
                std::memcpy(&dst[i], &bits, 4);
            }
        };
        read_f32(sample.image, image_elems);
        read_f32(sample.mask, mask_elems);
        samples.push_back(std::move(sample));
    }
    return samples;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    ordered_json j;
    j["format"] = "dmis-manifest";
    j["version"] = kRecordVersion;
    j["ratios"] = manifest.ratios;
    j["shuffle_seed"] = manifest.shuffle_seed;
    j["records"] = ordered_json::array();
    for (const auto& r : manifest.records)
        j["records"].push_back({{"id", r.id}, {"offset", r.offset}, {"length", r.length}});
    j["split"] = {{"train", manifest.split.train},
                  {"val", manifest.split.val},
                  {"test", manifest.split.test}};

    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        fail(ErrorKind::InputError, "manifest parse error: " + std::string(e.what()));
    }
    DatasetManifest manifest;
    try {
        manifest.ratios = j.at("ratios").get<std::array<double, 3>>();
        manifest.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
        for (const auto& r : j.at("records"))
            manifest.records.push_back({r.at("id").get<std::string>(),
                                        r.at("offset").get<std::uint64_t>(),
                                        r.at("length").get<std::uint64_t>()});
        manifest.split.train = j.at("split").at("train").get<std::vector<int>>();
        manifest.split.val = j.at("split").at("val").get<std::vector<int>>();
        manifest.split.test = j.at("split").at("test").get<std::vector<int>>();
    } catch (const ordered_json::exception& e) {
        fail(ErrorKind::InputError, "manifest field error: " + std::string(e.what()));
    }
    return manifest;
}

} // namespace dmis::datapipe
