#include "armo/feature_store.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "armo/binary_io.hpp"
#include "armo/errors.hpp"

namespace armo {

namespace {

constexpr std::string_view kMagic = "AFS1";
constexpr std::size_t kFixedHeaderBytes = 25;

std::size_t mask_bytes(std::size_t k) { return (k + 7) / 8; }

void check_names(const std::vector<std::string>& names) {
    std::set<std::string> seen;
    for (const auto& name : names) {
        if (!seen.insert(name).second) throw ValidationError("duplicate objective name '" + name + "'");
    }
}

void check_dim(std::size_t got, std::size_t want, const char* field, std::size_t index) {
    if (got != want) {
        throw ValidationError(std::string(field) + " of record " + std::to_string(index) + " has dimension " +
                              std::to_string(got) + ", expected " + std::to_string(want));
    }
}

void put_header(io::ByteWriter& w, std::uint32_t d, const std::vector<std::string>& names, std::uint64_t n,
                RecordKind kind) {
    w.put_bytes(kMagic);
    w.put_u32(StoreHeader::kVersion);
    w.put_u32(d);
    w.put_u32(static_cast<std::uint32_t>(names.size()));
    w.put_u64(n);
    w.put_u8(static_cast<std::uint8_t>(kind));
    for (const auto& name : names) w.put_string(name);
}

}  // namespace

std::size_t RatedStore::present_count(std::size_t j) const {
    std::size_t count = 0;
    for (const auto& rec : records) count += rec.present[j] != 0;
    return count;
}

void validate(const RatedStore& store) {
    if (store.d < 1) throw ValidationError("feature dimension d must be >= 1");
    check_names(store.objective_names);
    const std::size_t k = store.k();
    for (std::size_t i = 0; i < store.records.size(); ++i) {
        const auto& rec = store.records[i];
        check_dim(rec.feature.size(), store.d, "feature", i);
        check_dim(rec.rating.size(), k, "rating", i);
        check_dim(rec.present.size(), k, "mask", i);
        for (std::size_t j = 0; j < k; ++j) {
            if (!rec.is_present(j)) continue;
            const double r = rec.rating[j];
            if (!(r >= 0.0 && r <= 1.0)) {
                throw ValidationError("rating " + std::to_string(j) + " of record " + std::to_string(i) +
                                      " is outside [0,1]");
            }
        }
    }
}

void validate(const PairStore& store) {
    if (store.d < 1) throw ValidationError("feature dimension d must be >= 1");
    for (std::size_t i = 0; i < store.records.size(); ++i) {
        const auto& rec = store.records[i];
        check_dim(rec.prompt.size(), store.d, "prompt feature", i);
        check_dim(rec.chosen.size(), store.d, "chosen feature", i);
        check_dim(rec.rejected.size(), store.d, "rejected feature", i);
    }
}

std::vector<std::uint8_t> encode_store(const RatedStore& store) {
    validate(store);
    const std::size_t k = store.k();
    io::ByteWriter w;
    put_header(w, store.d, store.objective_names, store.records.size(), RecordKind::rated);
    std::vector<std::uint8_t> mask(mask_bytes(k));
    for (const auto& rec : store.records) {
        w.put_f64s(rec.feature);
        std::fill(mask.begin(), mask.end(), 0);
        for (std::size_t j = 0; j < k; ++j) {
            w.put_f64(rec.is_present(j) ? rec.rating[j] : 0.0);
            if (rec.is_present(j)) mask[j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
        }
        for (auto byte : mask) w.put_u8(byte);
    }
    return w.take();
}

std::vector<std::uint8_t> encode_store(const PairStore& store) {
    validate(store);
    io::ByteWriter w;
    put_header(w, store.d, {}, store.records.size(), RecordKind::pair);
    for (const auto& rec : store.records) {
        w.put_f64s(rec.prompt);
        w.put_f64s(rec.chosen);
        w.put_f64s(rec.rejected);
    }
    return w.take();
}

void write_store(const std::filesystem::path& path, const RatedStore& store) {
    io::write_file(path, encode_store(store));
}

void write_store(const std::filesystem::path& path, const PairStore& store) {
    io::write_file(path, encode_store(store));
}

StoreFile decode_store(std::span<const std::uint8_t> bytes, const std::string& what) {
    io::ByteReader r(bytes, what);
    if (bytes.size() < kMagic.size() || r.get_bytes(kMagic.size()) != kMagic) {
        throw FormatError(what + ": bad magic, expected \"AFS1\"");
    }
    StoreHeader h;
    h.version = r.get_u32();
    if (h.version != StoreHeader::kVersion) {
        throw FormatError(what + ": unsupported version " + std::to_string(h.version));
    }
    h.d = r.get_u32();
    h.k = r.get_u32();
    h.n = r.get_u64();
    const std::uint8_t tag = r.get_u8();
    if (tag > 1) throw FormatError(what + ": unknown record-kind tag " + std::to_string(tag));
    h.kind = static_cast<RecordKind>(tag);
    if (h.d < 1) throw FormatError(what + ": feature dimension d must be >= 1");
    if (h.kind == RecordKind::pair && h.k != 0) throw FormatError(what + ": pair store must have k = 0");
    h.objective_names.reserve(h.k);
    for (std::uint32_t j = 0; j < h.k; ++j) h.objective_names.push_back(r.get_string());

    const std::size_t record_bytes = h.kind == RecordKind::rated
                                         ? 8 * (std::size_t{h.d} + h.k) + mask_bytes(h.k)
                                         : 8 * 3 * std::size_t{h.d};
    const std::size_t expected = r.position() + record_bytes * h.n;
    if (bytes.size() != expected) {
        throw FormatError(what + ": size inconsistent with header (expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(bytes.size()) + ")");
    }

    StoreFile out{h, RatedStore{}};
    if (h.kind == RecordKind::rated) {
        RatedStore store{h.d, h.objective_names, {}};
        store.records.resize(h.n);
        for (auto& rec : store.records) {
            rec.feature.resize(h.d);
            rec.rating.resize(h.k);
            rec.present.resize(h.k);
            r.get_f64s(rec.feature);
            r.get_f64s(rec.rating);
            for (std::size_t b = 0; b < mask_bytes(h.k); ++b) {
                const std::uint8_t byte = r.get_u8();
                for (std::size_t bit = 0; bit < 8 && 8 * b + bit < h.k; ++bit) {
                    rec.present[8 * b + bit] = (byte >> bit) & 1u;
                }
            }
        }
        out.contents = std::move(store);
    } else {
        PairStore store{h.d, {}};
        store.records.resize(h.n);
        for (auto& rec : store.records) {
            for (auto* v : {&rec.prompt, &rec.chosen, &rec.rejected}) {
                v->resize(h.d);
                r.get_f64s(*v);
            }
        }
        out.contents = std::move(store);
    }
    return out;
}

StoreFile read_store(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    return decode_store(bytes, path.string());
}

RatedStore read_rated_store(const std::filesystem::path& path) {
    auto file = read_store(path);
    if (auto* store = std::get_if<RatedStore>(&file.contents)) return std::move(*store);
    throw ValidationError(path.string() + ": expected a rated store, found a pair store");
}

PairStore read_pair_store(const std::filesystem::path& path) {
    auto file = read_store(path);
    if (auto* store = std::get_if<PairStore>(&file.contents)) return std::move(*store);
    throw ValidationError(path.string() + ": expected a pair store, found a rated store");
}

double normalize_rating(double raw, const RatingScale& scale) {
    if (!(scale.max_raw > scale.min_raw)) {
        throw ValidationError("rating scale for '" + scale.objective_name + "' must have max > min");
    }
    if (!(raw >= scale.min_raw && raw <= scale.max_raw)) {
        std::ostringstream msg;
        msg << "raw rating " << raw << " for '" << scale.objective_name << "' outside [" << scale.min_raw << ", "
            << scale.max_raw << "]";
        throw ValidationError(msg.str());
    }
    return (raw - scale.min_raw) / (scale.max_raw - scale.min_raw);
}

RatedStore merge_stores(std::span<const RatedStore> stores) {
    RatedStore merged;
    if (stores.empty()) throw ValidationError("merge_stores: no stores given");
    merged.d = stores.front().d;

    std::unordered_map<std::string, std::size_t> column;
    std::vector<std::vector<std::size_t>> remap(stores.size());
    std::size_t total = 0;
    for (std::size_t s = 0; s < stores.size(); ++s) {
        validate(stores[s]);
        if (stores[s].d != merged.d) {
            throw ValidationError("merge_stores: store " + std::to_string(s) + " has d=" +
                                  std::to_string(stores[s].d) + ", expected " + std::to_string(merged.d));
        }
        for (const auto& name : stores[s].objective_names) {
            auto [it, inserted] = column.try_emplace(name, merged.objective_names.size());
            if (inserted) merged.objective_names.push_back(name);
            remap[s].push_back(it->second);
        }
        total += stores[s].records.size();
    }

    const std::size_t k = merged.k();
    merged.records.reserve(total);
    for (std::size_t s = 0; s < stores.size(); ++s) {
        for (const auto& src : stores[s].records) {
            RatedRecord rec{src.feature, std::vector<double>(k, 0.0), std::vector<std::uint8_t>(k, 0)};
            for (std::size_t j = 0; j < src.rating.size(); ++j) {
                if (!src.is_present(j)) continue;
                rec.rating[remap[s][j]] = src.rating[j];
                rec.present[remap[s][j]] = 1;
            }
            merged.records.push_back(std::move(rec));
        }
    }
    return merged;
}

namespace {

using nlohmann::json;

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

template <typename Fn>
void for_each_json_line(const std::string& text, Fn&& fn) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(at_line(lineno) + "invalid JSON: " + e.what());
        }
        if (!obj.is_object()) throw ValidationError(at_line(lineno) + "expected a JSON object");
        try {
            fn(obj, lineno);
        } catch (const json::exception& e) {
            throw ValidationError(at_line(lineno) + "schema violation: " + e.what());
        }
    }
}

std::vector<double> number_array(const json& value, std::size_t lineno, const char* field) {
    if (!value.is_array()) throw ValidationError(at_line(lineno) + "'" + field + "' must be an array");
    std::vector<double> out;
    out.reserve(value.size());
    for (const auto& x : value) {
        if (!x.is_number()) throw ValidationError(at_line(lineno) + "'" + field + "' must hold numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

}  // namespace

std::vector<DatasetManifest> parse_manifest(const std::string& text) {
    std::vector<DatasetManifest> out;
    std::set<std::string> datasets;
    std::set<std::string> objectives;
    for_each_json_line(text, [&](const json& obj, std::size_t lineno) {
        DatasetManifest m;
        m.dataset = obj.at("dataset").get<std::string>();
        m.objectives = obj.at("objectives").get<std::vector<std::string>>();
        const auto scales = obj.at("scales").get<std::vector<std::vector<double>>>();
        if (!datasets.insert(m.dataset).second) {
            throw ValidationError(at_line(lineno) + "duplicate dataset '" + m.dataset + "'");
        }
        if (scales.size() != m.objectives.size()) {
            throw ValidationError(at_line(lineno) + "'scales' has " + std::to_string(scales.size()) +
                                  " entries for " + std::to_string(m.objectives.size()) + " objectives");
        }
        for (std::size_t j = 0; j < scales.size(); ++j) {
            if (scales[j].size() != 2) throw ValidationError(at_line(lineno) + "each scale must be [min, max]");
            if (!(scales[j][1] > scales[j][0])) {
                throw ValidationError(at_line(lineno) + "scale for '" + m.objectives[j] + "' must have max > min");
            }
            if (!objectives.insert(m.objectives[j]).second) {
                throw ValidationError(at_line(lineno) + "objective '" + m.objectives[j] +
                                      "' already declared by another dataset; give it a dataset-specific name");
            }
            m.scales.push_back({m.objectives[j], scales[j][0], scales[j][1]});
        }
        out.push_back(std::move(m));
    });
    if (out.empty()) throw ValidationError("manifest declares no datasets");
    return out;
}

std::vector<DatasetManifest> load_manifest(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    return parse_manifest(std::string(bytes.begin(), bytes.end()));
}

RatedStore ingest_rated(const std::string& records_text, std::span<const DatasetManifest> manifest) {
    std::map<std::string, std::size_t> index;
    std::vector<RatedStore> stores(manifest.size());
    for (std::size_t s = 0; s < manifest.size(); ++s) {
        index[manifest[s].dataset] = s;
        stores[s].objective_names = manifest[s].objectives;
    }
    std::uint32_t d = 0;
    std::size_t count = 0;
    for_each_json_line(records_text, [&](const json& obj, std::size_t lineno) {
        const auto name = obj.at("dataset").get<std::string>();
        auto it = index.find(name);
        if (it == index.end()) throw ValidationError(at_line(lineno) + "dataset '" + name + "' not in manifest");
        const auto& spec = manifest[it->second];
        RatedRecord rec;
        rec.feature = number_array(obj.at("feature"), lineno, "feature");
        if (rec.feature.empty()) throw ValidationError(at_line(lineno) + "empty feature vector");
        if (d == 0) d = static_cast<std::uint32_t>(rec.feature.size());
        if (rec.feature.size() != d) {
            throw ValidationError(at_line(lineno) + "feature has dimension " + std::to_string(rec.feature.size()) +
                                  ", expected " + std::to_string(d));
        }
        const auto& ratings = obj.at("ratings");
        if (!ratings.is_array() || ratings.size() != spec.objectives.size()) {
            throw ValidationError(at_line(lineno) + "'ratings' must be an array of " +
                                  std::to_string(spec.objectives.size()) + " values");
        }
        rec.rating.assign(spec.objectives.size(), 0.0);
        rec.present.assign(spec.objectives.size(), 0);
        for (std::size_t j = 0; j < ratings.size(); ++j) {
            if (ratings[j].is_null()) continue;
            if (!ratings[j].is_number()) throw ValidationError(at_line(lineno) + "ratings must be numbers or null");
            try {
                rec.rating[j] = normalize_rating(ratings[j].get<double>(), spec.scales[j]);
            } catch (const ValidationError& e) {
                throw ValidationError(at_line(lineno) + e.what());
            }
            rec.present[j] = 1;
        }
        stores[it->second].records.push_back(std::move(rec));
        ++count;
    });
    if (count == 0) throw ValidationError("ratings file contains no records");
    for (auto& store : stores) store.d = d;
    return merge_stores(stores);
}

PairStore ingest_pairs(const std::string& records_text) {
    PairStore store;
    for_each_json_line(records_text, [&](const json& obj, std::size_t lineno) {
        PairRecord rec{number_array(obj.at("prompt"), lineno, "prompt"),
                       number_array(obj.at("chosen"), lineno, "chosen"),
                       number_array(obj.at("rejected"), lineno, "rejected")};
        if (store.d == 0) store.d = static_cast<std::uint32_t>(rec.prompt.size());
        if (rec.prompt.size() != store.d || rec.chosen.size() != store.d || rec.rejected.size() != store.d) {
            throw ValidationError(at_line(lineno) + "pair vectors must all have dimension " +
                                  std::to_string(store.d));
        }
        store.records.push_back(std::move(rec));
    });
    if (store.records.empty()) throw ValidationError("pairs file contains no records");
    validate(store);
    return store;
}

}  // namespace armo
