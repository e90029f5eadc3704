#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace armo {

enum class RecordKind : std::uint8_t { rated = 0, pair = 1 };

/// Header of an AFS1 feature-store file.
struct StoreHeader {
    static constexpr std::uint32_t kVersion = 1;

    std::uint32_t version = kVersion;
    std::uint32_t d = 0;
    std::uint32_t k = 0;
    std::uint64_t n = 0;
    RecordKind kind = RecordKind::rated;
    std::vector<std::string> objective_names;
};

/// Feature of one prompt+response concatenation and its (partially present)
/// normalized ratings. Absent slots hold 0.0 and must not be read.
struct RatedRecord {
    std::vector<double> feature;
    std::vector<double> rating;
    std::vector<std::uint8_t> present;  // one flag per objective, 0 or 1

    bool is_present(std::size_t j) const { return present[j] != 0; }
};

struct PairRecord {
    std::vector<double> prompt;
    std::vector<double> chosen;
    std::vector<double> rejected;
};

struct RatedStore {
    std::uint32_t d = 0;
    std::vector<std::string> objective_names;
    std::vector<RatedRecord> records;

    std::size_t k() const { return objective_names.size(); }
    /// Number of present ratings for objective j.
    std::size_t present_count(std::size_t j) const;
};

struct PairStore {
    std::uint32_t d = 0;
    std::vector<PairRecord> records;
};

/// Raw rating scale of one objective, mapped linearly onto [0,1].
struct RatingScale {
    std::string objective_name;
    double min_raw = 0.0;
    double max_raw = 1.0;
};

/// One line of the ingestion manifest (JSON lines).
struct DatasetManifest {
    std::string dataset;
    std::vector<std::string> objectives;
    std::vector<RatingScale> scales;
};

void validate(const RatedStore& store);
void validate(const PairStore& store);

std::vector<std::uint8_t> encode_store(const RatedStore& store);
std::vector<std::uint8_t> encode_store(const PairStore& store);

void write_store(const std::filesystem::path& path, const RatedStore& store);
void write_store(const std::filesystem::path& path, const PairStore& store);

struct StoreFile {
    StoreHeader header;
    std::variant<RatedStore, PairStore> contents;
};

StoreFile decode_store(std::span<const std::uint8_t> bytes, const std::string& what = "feature store");
StoreFile read_store(const std::filesystem::path& path);

/// read_store, then require the given record kind.
RatedStore read_rated_store(const std::filesystem::path& path);
PairStore read_pair_store(const std::filesystem::path& path);

/// (raw - min) / (max - min). Raw values outside the scale are an error,
/// never clamped.
double normalize_rating(double raw, const RatingScale& scale);

/// Concatenate rated stores. The merged objective list is the ordered union
/// of every store's names; a record is present only on objectives its source
/// store rated. A name shared by several stores maps to one column
/// (ingestion rejects such duplicates before merging).
RatedStore merge_stores(std::span<const RatedStore> stores);

/// Parse a JSON-lines ingestion manifest. Schema errors name the line.
std::vector<DatasetManifest> parse_manifest(const std::string& text);
std::vector<DatasetManifest> load_manifest(const std::filesystem::path& path);

/// Build a merged rated store from JSON-lines records of the form
///   {"dataset": str, "feature": [f64...], "ratings": [raw | null, ...]}
/// where "ratings" follows the dataset's objective order in the manifest and
/// null marks a missing label.
RatedStore ingest_rated(const std::string& records_text, std::span<const DatasetManifest> manifest);

/// Pair records as JSON lines: {"prompt": [...], "chosen": [...], "rejected": [...]}.
PairStore ingest_pairs(const std::string& records_text);

}  // namespace armo
