#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tamperlab/types.hpp"

namespace tamperlab {

static_assert(std::endian::native == std::endian::little,
              "raw-f64 record files are little-endian; big-endian hosts are unsupported");

enum class RecordFormat { Csv, RawF64 };

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    return out;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& data_path) {
    std::filesystem::path p = data_path;
    p.replace_extension(".meta.json");
    return p;
}

} // namespace detail

inline constexpr const char* kCsvHeader = "subject,activity,fs,sample";

inline EcgRecord load_record_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open record file: " + path.string());

    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != kCsvHeader)
        throw std::runtime_error("malformed CSV header in " + path.string() +
                                 " (expected '" + kCsvHeader + "')");

    EcgRecord rec;
    bool first = true;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_row(line);
        if (fields.size() != 4)
            throw std::runtime_error("malformed CSV row " + std::to_string(row) + " in " + path.string());
        const int fs = std::stoi(fields[2]);
        if (fs != kSampleRateHz)
            throw std::runtime_error("unsupported sample rate " + std::to_string(fs) + " in " + path.string());
        if (first) {
            rec.subject_id = fields[0];
            rec.activity = activity_from_string(fields[1]);
            rec.sample_rate = fs;
            first = false;
        } else if (fields[0] != rec.subject_id || activity_from_string(fields[1]) != rec.activity) {
            throw std::runtime_error("inconsistent subject/activity at row " + std::to_string(row));
        }
        const double v = std::stod(fields[3]);
        if (!std::isfinite(v))
            throw std::runtime_error("non-finite sample at row " + std::to_string(row));
        rec.samples.push_back(v);
    }
    rec.validate();
    return rec;
}

inline EcgRecord load_record_raw(const std::filesystem::path& path) {
    std::ifstream meta_in(detail::sidecar_path(path));
    if (!meta_in)
        throw std::runtime_error("missing sidecar metadata: " + detail::sidecar_path(path).string());
    nlohmann::json meta = nlohmann::json::parse(meta_in);

    EcgRecord rec;
    rec.subject_id = meta.at("subject").get<std::string>();
    rec.activity = activity_from_string(meta.at("activity").get<std::string>());
    rec.sample_rate = meta.at("fs").get<int>();
    if (rec.sample_rate != kSampleRateHz)
        throw std::runtime_error("unsupported sample rate " + std::to_string(rec.sample_rate));

    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open record file: " + path.string());
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    if (bytes % sizeof(double) != 0)
        throw std::runtime_error("raw-f64 file size not a multiple of 8: " + path.string());
    rec.samples.resize(bytes / sizeof(double));
    in.read(reinterpret_cast<char*>(rec.samples.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw std::runtime_error("short read on " + path.string());
    rec.validate();
    return rec;
}

inline EcgRecord load_record(const std::filesystem::path& path, RecordFormat format) {
    if (!std::filesystem::exists(path))
        throw std::runtime_error("record file does not exist: " + path.string());
    return format == RecordFormat::Csv ? load_record_csv(path) : load_record_raw(path);
}

inline void save_record_csv(const EcgRecord& rec, const std::filesystem::path& path) {
    rec.validate();
    std::ofstream out(path, std::ios::binary); // binary: LF line endings everywhere
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << kCsvHeader << "\n";
    char buf[64];
    for (double v : rec.samples) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << rec.subject_id << ',' << to_string(rec.activity) << ',' << rec.sample_rate << ','
            << buf << "\n";
    }
}

// --- synthetic dataset manifest ---

struct DatasetManifest {
    std::uint64_t seed = 0;
    double duration_s = 0.0;
    struct Entry {
        std::string subject;
        Activity activity = Activity::Sitting;
        std::string file; // relative to the manifest directory
        RecordFormat format = RecordFormat::RawF64;
    };
    std::vector<Entry> records;
};

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& dir) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["fs"] = kSampleRateHz;
    j["seed"] = m.seed;
    j["duration_s"] = m.duration_s;
    auto& recs = j["records"] = nlohmann::ordered_json::array();
    for (const auto& e : m.records)
        recs.push_back({{"subject", e.subject},
                        {"activity", to_string(e.activity)},
                        {"file", e.file},
                        {"format", e.format == RecordFormat::Csv ? "csv" : "raw-f64"}});
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
    out << j.dump(2) << "\n";
}

inline DatasetManifest load_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw std::runtime_error("missing manifest.json in " + dir.string());
    const nlohmann::json j = nlohmann::json::parse(in);
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.duration_s = j.at("duration_s").get<double>();
    for (const auto& r : j.at("records")) {
        DatasetManifest::Entry e;
        e.subject = r.at("subject").get<std::string>();
        e.activity = activity_from_string(r.at("activity").get<std::string>());
        e.file = r.at("file").get<std::string>();
        e.format = r.at("format").get<std::string>() == "csv" ? RecordFormat::Csv : RecordFormat::RawF64;
        m.records.push_back(std::move(e));
    }
    return m;
}

inline std::vector<EcgRecord> load_manifest_records(const std::filesystem::path& dir) {
    const auto m = load_manifest(dir);
    std::vector<EcgRecord> out;
    out.reserve(m.records.size());
    for (const auto& e : m.records) out.push_back(load_record(dir / e.file, e.format));
    return out;
}

inline void save_record_raw(const EcgRecord& rec, const std::filesystem::path& path) {
    rec.validate();
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out.write(reinterpret_cast<const char*>(rec.samples.data()),
                  static_cast<std::streamsize>(rec.samples.size() * sizeof(double)));
    }
    nlohmann::ordered_json meta;
    meta["subject"] = rec.subject_id;
    meta["activity"] = to_string(rec.activity);
    meta["fs"] = rec.sample_rate;
    std::ofstream mout(detail::sidecar_path(path), std::ios::binary);
    mout << meta.dump(2) << "\n";
}

} // namespace tamperlab
