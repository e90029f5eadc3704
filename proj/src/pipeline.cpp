#include "armo/pipeline.hpp"

#include <charconv>
#include <cmath>

#include <json.hpp>

#include "armo/binary_io.hpp"
#include "armo/errors.hpp"
#include "armo/rng.hpp"

namespace armo {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kBundleMagic = "ABN1";
constexpr std::uint32_t kBundleVersion = 1;

void put_blob(io::ByteWriter& w, std::span<const std::uint8_t> blob) {
    w.put_u64(blob.size());
    w.put_bytes({reinterpret_cast<const char*>(blob.data()), blob.size()});
}

void put_blob(io::ByteWriter& w, std::string_view text) {
    w.put_u64(text.size());
    w.put_bytes(text);
}

std::string get_blob(io::ByteReader& r) {
    const auto n = r.get_u64();
    if (n > r.remaining()) throw FormatError("bundle blob length exceeds file size");
    return r.get_bytes(static_cast<std::size_t>(n));
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

void write_text(const fs::path& path, const std::string& text) { io::write_file(path, as_bytes(text)); }

std::string read_text(const fs::path& path) {
    const auto bytes = io::read_file(path);
    return {bytes.begin(), bytes.end()};
}

std::size_t resolve_objective(const std::string& key, const std::vector<std::string>& names) {
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (names[j] == key) return j;
    }
    std::size_t index = 0;
    const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), index);
    if (ec == std::errc() && ptr == key.data() + key.size() && index < names.size()) return index;
    throw ValidationError("unknown objective '" + key + "'");
}

}  // namespace

void validate_components(const RewardHead& head, const DebiasProfile& profile, const GatingNetwork& gate) {
    if (profile.k() != head.k()) {
        throw ValidationError("bundle mismatch: debias profile has k=" + std::to_string(profile.k()) +
                              " but head has k=" + std::to_string(head.k()));
    }
    if (gate.output_dim() != head.k()) {
        throw ValidationError("bundle mismatch: gate outputs k=" + std::to_string(gate.output_dim()) +
                              " but head has k=" + std::to_string(head.k()));
    }
    if (gate.input_dim() != head.d()) {
        throw ValidationError("bundle mismatch: gate input d=" + std::to_string(gate.input_dim()) +
                              " but head has d=" + std::to_string(head.d()));
    }
    if (profile.verbosity_index >= head.k()) throw ValidationError("bundle mismatch: verbosity index out of range");
}

void ModelBundle::validate() const { validate_components(head, profile, gate); }

std::string digest_hex(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string digest_hex(std::string_view text) {
    return digest_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> encode_bundle(const ModelBundle& bundle) {
    bundle.validate();
    io::ByteWriter w;
    w.put_bytes(kBundleMagic);
    w.put_u32(kBundleVersion);
    put_blob(w, bundle.metadata);
    put_blob(w, encode_head(bundle.head));
    put_blob(w, profile_to_json(bundle.profile));
    put_blob(w, encode_gate(bundle.gate));
    return w.take();
}

ModelBundle decode_bundle(std::span<const std::uint8_t> bytes, const std::string& what) {
    io::ByteReader r(bytes, what);
    if (bytes.size() < 4 || r.get_bytes(4) != kBundleMagic) throw FormatError(what + ": bad magic, expected \"ABN1\"");
    const auto version = r.get_u32();
    if (version != kBundleVersion) throw FormatError(what + ": unsupported version " + std::to_string(version));
    ModelBundle b;
    b.metadata = get_blob(r);
    b.head = decode_head(as_bytes(get_blob(r)), what + " (head)");
    b.profile = profile_from_json(get_blob(r));
    b.gate = decode_gate(as_bytes(get_blob(r)), what + " (gate)");
    if (r.remaining() != 0) throw FormatError(what + ": trailing bytes");
    b.validate();
    return b;
}

void write_bundle(const fs::path& path, const ModelBundle& bundle) { io::write_file(path, encode_bundle(bundle)); }

ModelBundle read_bundle(const fs::path& path) { return decode_bundle(io::read_file(path), path.string()); }

ScoreFn make_scorer(const ModelBundle& bundle, std::optional<std::vector<double>> steer) {
    if (steer && steer->size() != bundle.head.k()) throw ValidationError("steering vector has wrong length");
    return [&bundle, steer = std::move(steer)](std::span<const double> prompt, std::span<const double> response) {
        const auto adjusted = adjust(predict_rewards(bundle.head, response), bundle.profile);
        if (steer) {
            if (prompt.size() != bundle.gate.input_dim()) throw ValidationError("prompt feature dimension mismatch");
            return scalar_score(*steer, adjusted);
        }
        return scalar_score(gate_forward(bundle.gate, prompt), adjusted);
    };
}

std::vector<EvalCategorySpec> parse_eval_manifest(const std::string& text, const fs::path& base_dir) {
    std::vector<EvalCategorySpec> out;
    try {
        const auto j = nlohmann::json::parse(text);
        for (const auto& c : j.at("categories")) {
            EvalCategorySpec spec;
            spec.name = c.at("name").get<std::string>();
            spec.weight = c.value("weight", 1.0);
            if (c.contains("pairs_path")) {
                fs::path p = c.at("pairs_path").get<std::string>();
                spec.pairs_path = p.is_absolute() ? p : base_dir / p;
            }
            if (c.contains("accuracy")) spec.accuracy = c.at("accuracy").get<double>();
            if (spec.pairs_path.has_value() == spec.accuracy.has_value()) {
                throw ValidationError("eval manifest: category '" + spec.name +
                                      "' needs exactly one of pairs_path or accuracy");
            }
            if (spec.accuracy && !(*spec.accuracy >= 0.0 && *spec.accuracy <= 1.0)) {
                throw ValidationError("eval manifest: accuracy of '" + spec.name + "' must lie in [0,1]");
            }
            if (!(spec.weight > 0.0)) throw ValidationError("eval manifest: weight of '" + spec.name + "' must be > 0");
            out.push_back(std::move(spec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("eval manifest: ") + e.what());
    }
    if (out.empty()) throw ValidationError("eval manifest: no categories");
    return out;
}

std::vector<EvalCategorySpec> load_eval_manifest(const fs::path& path) {
    return parse_eval_manifest(read_text(path), path.parent_path());
}

EvalReport run_eval(const std::vector<EvalCategorySpec>& categories, const ModelBundle* bundle,
                    std::optional<std::vector<double>> steer, std::string model_label) {
    std::optional<ScoreFn> scorer;
    if (bundle != nullptr) scorer = make_scorer(*bundle, std::move(steer));
    std::vector<CategoryResult> results;
    for (const auto& c : categories) {
        if (c.accuracy) {
            results.push_back({c.name, *c.accuracy, c.weight, 0});
            continue;
        }
        if (!scorer) throw ValidationError("eval: category '" + c.name + "' needs a model bundle to score pairs");
        const PairStore pairs = read_pair_store(*c.pairs_path);
        if (pairs.d != bundle->head.d()) {
            throw ValidationError("eval: pairs of '" + c.name + "' have d=" + std::to_string(pairs.d) +
                                  " but bundle expects d=" + std::to_string(bundle->head.d()));
        }
        results.push_back({c.name, pairwise_accuracy(*scorer, pairs), c.weight, pairs.records.size()});
    }
    return make_report(std::move(model_label), std::move(results));
}

std::string cmd_synth(const SynthOptions& opt) {
    const SyntheticData data = gen_synthetic(opt.spec);
    fs::create_directories(opt.out_dir);
    auto [train, heldout] = split_pairs(data.pairs, opt.heldout_fraction);

    write_store(opt.out_dir / "rated.afs", data.rated);
    write_store(opt.out_dir / "pairs_train.afs", train);
    write_head(opt.out_dir / "planted_head.ahd", data.planted_head);

    ojson rule;
    rule["coordinate"] = data.rule.coordinate;
    rule["objective_if_positive"] = data.planted_head.objective_names()[data.rule.objective_if_positive];
    rule["objective_if_negative"] = data.planted_head.objective_names()[data.rule.objective_if_negative];
    rule["verbosity"] = data.planted_head.objective_names()[data.verbosity_index];
    rule["seed"] = opt.spec.seed;
    write_text(opt.out_dir / "planted_rule.json", rule.dump() + "\n");

    ojson summary;
    summary["command"] = "synth";
    summary["n_rated"] = data.rated.records.size();
    summary["n_train"] = train.records.size();
    summary["n_heldout"] = heldout.records.size();
    summary["d"] = opt.spec.d;
    summary["k"] = opt.spec.k;
    summary["seed"] = opt.spec.seed;
    summary["objectives"] = data.planted_head.objective_names();

    if (!heldout.records.empty()) {
        write_store(opt.out_dir / "pairs_heldout.afs", heldout);
        PairStore positive{heldout.d, {}}, negative{heldout.d, {}};
        for (const auto& rec : heldout.records) {
            (rec.prompt[data.rule.coordinate] >= 0.0 ? positive : negative).records.push_back(rec);
        }
        ojson manifest;
        manifest["categories"] = ojson::array();
        if (!positive.records.empty()) {
            write_store(opt.out_dir / "pairs_heldout_ctx_pos.afs", positive);
            manifest["categories"].push_back({{"name", "context+"}, {"weight", 1.0}, {"pairs_path", "pairs_heldout_ctx_pos.afs"}});
        }
        if (!negative.records.empty()) {
            write_store(opt.out_dir / "pairs_heldout_ctx_neg.afs", negative);
            manifest["categories"].push_back({{"name", "context-"}, {"weight", 1.0}, {"pairs_path", "pairs_heldout_ctx_neg.afs"}});
        }
        write_text(opt.out_dir / "eval_manifest.json", manifest.dump(2) + "\n");
        summary["context_oracle_accuracy"] = context_oracle_accuracy(data, heldout);
    }
    return summary.dump();
}

std::string cmd_ingest(const fs::path& records_path, const fs::path& manifest_path, const fs::path& out_path) {
    const auto manifest = load_manifest(manifest_path);
    const RatedStore store = ingest_rated(read_text(records_path), manifest);
    write_store(out_path, store);
    ojson summary;
    summary["command"] = "ingest";
    summary["n"] = store.records.size();
    summary["d"] = store.d;
    summary["k"] = store.k();
    ojson counts = ojson::object();
    for (std::size_t j = 0; j < store.k(); ++j) counts[store.objective_names[j]] = store.present_count(j);
    summary["present_counts"] = counts;
    return summary.dump();
}

std::string cmd_ingest_pairs(const fs::path& pairs_path, const fs::path& out_path) {
    const PairStore store = ingest_pairs(read_text(pairs_path));
    write_store(out_path, store);
    ojson summary;
    summary["command"] = "ingest";
    summary["kind"] = "pairs";
    summary["n"] = store.records.size();
    summary["d"] = store.d;
    return summary.dump();
}

std::string cmd_fit(const fs::path& store_path, double ridge, const fs::path& out_path) {
    const RatedStore store = read_rated_store(store_path);
    const RewardHead head = fit_head(store, ridge);
    const auto bytes = encode_head(head);
    io::write_file(out_path, bytes);

    ojson rmse = ojson::object();
    for (std::size_t j = 0; j < head.k(); ++j) {
        double sse = 0.0;
        std::size_t count = 0;
        for (const auto& rec : store.records) {
            if (!rec.is_present(j)) continue;
            const auto col = head.column(j);
            double pred = 0.0;
            for (std::size_t i = 0; i < head.d(); ++i) pred += col[i] * rec.feature[i];
            sse += (pred - rec.rating[j]) * (pred - rec.rating[j]);
            ++count;
        }
        rmse[head.objective_names()[j]] = std::sqrt(sse / static_cast<double>(count));
    }
    ojson summary;
    summary["command"] = "fit";
    summary["d"] = head.d();
    summary["k"] = head.k();
    summary["ridge"] = ridge;
    summary["train_rmse"] = rmse;
    summary["digest"] = digest_hex(bytes);
    return summary.dump();
}

std::string cmd_calibrate(const CalibrateOptions& opt) {
    const RatedStore store = read_rated_store(opt.store_path);
    const RewardHead head = read_head(opt.head_path);
    if (store.d != head.d()) {
        throw ValidationError("reference store d=" + std::to_string(store.d) + " does not match head d=" +
                              std::to_string(head.d()));
    }
    const std::size_t verbosity = resolve_objective(opt.verbosity, head.objective_names());
    RewardMatrix rewards{store.records.size(), head.k(), {}};
    rewards.values.reserve(rewards.rows * rewards.cols);
    for (const auto& rec : store.records) {
        const auto r = predict_rewards(head, rec.feature);
        rewards.values.insert(rewards.values.end(), r.begin(), r.end());
    }
    const std::string reference = opt.reference_id.empty() ? opt.store_path.filename().string() : opt.reference_id;
    const DebiasProfile profile = calibrate(rewards, verbosity, opt.calibration, reference);
    write_profile(opt.out_path, profile);

    ojson summary;
    summary["command"] = "calibrate";
    summary["metric"] = to_string(profile.metric);
    summary["verbosity"] = head.objective_names()[verbosity];
    summary["lambda"] = profile.lambda;
    summary["achieved_corr"] = profile.achieved_corr;
    ojson unattained = ojson::array();
    for (std::size_t i = 0; i < profile.k(); ++i) {
        if (!profile.attained(i)) {
            unattained.push_back({{"objective", head.objective_names()[i]}, {"step_gap", profile.step_gap[i]}});
        }
    }
    summary["unattainable"] = unattained;
    return summary.dump();
}

std::string cmd_train(const TrainOptions& opt) {
    const auto pair_bytes = io::read_file(opt.pairs_path);
    auto pair_file = decode_store(pair_bytes, opt.pairs_path.string());
    auto* pairs = std::get_if<PairStore>(&pair_file.contents);
    if (pairs == nullptr) throw ValidationError(opt.pairs_path.string() + ": expected a pair store");
    std::optional<PairStore> heldout;
    if (opt.heldout_path) heldout = read_pair_store(*opt.heldout_path);

    const auto head_bytes = io::read_file(opt.head_path);
    const RewardHead head = decode_head(head_bytes, opt.head_path.string());
    const DebiasProfile profile = read_profile(opt.profile_path);

    std::vector<std::size_t> dims{head.d()};
    dims.insert(dims.end(), opt.hidden.begin(), opt.hidden.end());
    dims.push_back(head.k());
    const std::uint64_t init_seed = mix64(opt.train.seed ^ 0x676174652d696e69ULL);
    GatingNetwork initial = GatingNetwork::initialized(dims, init_seed, opt.beta_init);
    validate_components(head, profile, initial);
    if (pairs->d != head.d()) {
        throw ValidationError("pair store d=" + std::to_string(pairs->d) + " does not match head d=" +
                              std::to_string(head.d()));
    }

    TrainResult result = train_gate(std::move(initial), *pairs, head, profile, opt.train, heldout ? &*heldout : nullptr);

    ojson config;
    config["learning_rate"] = opt.train.learning_rate;
    config["steps"] = opt.train.steps;
    config["batch_size"] = opt.train.batch_size;
    config["adam_beta1"] = opt.train.adam_beta1;
    config["adam_beta2"] = opt.train.adam_beta2;
    config["adam_eps"] = opt.train.adam_eps;
    config["weight_decay"] = opt.train.weight_decay;
    config["schedule"] = "cosine";
    config["seed"] = opt.train.seed;
    config["beta_init"] = opt.beta_init;
    config["layer_dims"] = dims;
    ojson meta;
    meta["format"] = "armo-bundle";
    meta["head_digest"] = digest_hex(head_bytes);
    meta["profile_digest"] = digest_hex(profile_to_json(profile));
    meta["pairs_digest"] = digest_hex(pair_bytes);
    meta["init_seed"] = init_seed;
    meta["train_config"] = config;
    meta["train_config_digest"] = digest_hex(config.dump());

    ModelBundle bundle{head, profile, std::move(result.net), meta.dump()};
    write_bundle(opt.out_path, bundle);
    if (opt.history_path) write_text(*opt.history_path, result.history.to_csv());
    if (opt.gate_path) write_gate(*opt.gate_path, bundle.gate);

    ojson summary;
    summary["command"] = "train-gating";
    summary["steps"] = opt.train.steps;
    summary["final_loss"] = result.history.loss.back();
    summary["beta"] = bundle.gate.beta;
    if (result.history.heldout_accuracy) summary["heldout_accuracy"] = *result.history.heldout_accuracy;
    return summary.dump();
}

std::string cmd_score(const ScoreOptions& opt) {
    const ModelBundle bundle = read_bundle(opt.bundle_path);
    std::optional<std::vector<double>> steer;
    if (opt.steer) steer = parse_steering(*opt.steer, bundle.head.objective_names());
    auto override_span = [&]() -> std::optional<std::span<const double>> {
        if (steer) return std::span<const double>(*steer);
        return std::nullopt;
    };
    ojson summary;
    summary["command"] = "score";
    summary["steered"] = steer.has_value();
    if (opt.pairs_path) {
        const PairStore pairs = read_pair_store(*opt.pairs_path);
        if (opt.index >= pairs.records.size()) {
            throw ValidationError("pair index " + std::to_string(opt.index) + " out of range (store has " +
                                  std::to_string(pairs.records.size()) + " pairs)");
        }
        const auto& rec = pairs.records[opt.index];
        const auto chosen = decompose(bundle.head, bundle.profile, bundle.gate, rec.prompt, rec.chosen, override_span());
        const auto rejected =
            decompose(bundle.head, bundle.profile, bundle.gate, rec.prompt, rec.rejected, override_span());
        summary["index"] = opt.index;
        summary["chosen"] = ojson::parse(chosen.to_json());
        summary["rejected"] = ojson::parse(rejected.to_json());
        summary["prefers_chosen"] = chosen.scalar_score > rejected.scalar_score;
    } else {
        const auto report = decompose(bundle.head, bundle.profile, bundle.gate, opt.prompt, opt.response, override_span());
        summary["decomposition"] = ojson::parse(report.to_json());
    }
    return summary.dump();
}

std::string cmd_eval(const EvalOptions& opt, std::string* table) {
    const auto categories = load_eval_manifest(opt.manifest_path);
    std::optional<ModelBundle> bundle;
    if (opt.bundle_path) bundle = read_bundle(*opt.bundle_path);
    std::optional<std::vector<double>> steer;
    if (opt.steer) {
        if (!bundle) throw ValidationError("--steer requires --bundle");
        steer = parse_steering(*opt.steer, bundle->head.objective_names());
    }
    const EvalReport report = run_eval(categories, bundle ? &*bundle : nullptr, std::move(steer), opt.model_label);
    if (opt.report_path) write_text(*opt.report_path, report.to_json() + "\n");
    if (table != nullptr) *table = report.to_table();
    ojson summary;
    summary["command"] = "eval";
    summary["report"] = ojson::parse(report.to_json());
    return summary.dump();
}

}  // namespace armo
