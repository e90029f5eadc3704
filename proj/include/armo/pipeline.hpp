#pragma once

// End-to-end stage wiring shared by the `armo` CLI and the integration tests.
// Each cmd_* function performs one module operation, writes its artifact(s)
// and returns a one-line JSON summary.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "armo/debias.hpp"
#include "armo/eval_harness.hpp"
#include "armo/gating.hpp"
#include "armo/regression_head.hpp"

namespace armo {

struct ModelBundle {
    RewardHead head;
    DebiasProfile profile;
    GatingNetwork gate;
    /// JSON object: component digests, seeds and the training config.
    std::string metadata;

    /// Throws ValidationError naming the first mismatched dimension.
    void validate() const;
};

void validate_components(const RewardHead& head, const DebiasProfile& profile, const GatingNetwork& gate);

/// 64-bit FNV-1a, hex encoded.
std::string digest_hex(std::span<const std::uint8_t> bytes);
std::string digest_hex(std::string_view text);

std::vector<std::uint8_t> encode_bundle(const ModelBundle& bundle);
ModelBundle decode_bundle(std::span<const std::uint8_t> bytes, const std::string& what = "model bundle");
void write_bundle(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle read_bundle(const std::filesystem::path& path);

/// Gated scalar score of a bundle, optionally steered to fixed coefficients.
ScoreFn make_scorer(const ModelBundle& bundle, std::optional<std::vector<double>> steer = std::nullopt);

struct EvalCategorySpec {
    std::string name;
    double weight = 1.0;
    std::optional<std::filesystem::path> pairs_path;
    /// Precomputed accuracy in [0,1], used when no pairs file is given.
    std::optional<double> accuracy;
};

/// {"categories": [{"name", "weight", "pairs_path" | "accuracy"}]}
/// Relative pairs paths resolve against `base_dir`.
std::vector<EvalCategorySpec> parse_eval_manifest(const std::string& text, const std::filesystem::path& base_dir);
std::vector<EvalCategorySpec> load_eval_manifest(const std::filesystem::path& path);

EvalReport run_eval(const std::vector<EvalCategorySpec>& categories, const ModelBundle* bundle,
                    std::optional<std::vector<double>> steer, std::string model_label);

// ---------------------------------------------------------------------------
// Commands

struct SynthOptions {
    SyntheticSpec spec;
    double heldout_fraction = 0.2;
    std::filesystem::path out_dir;
};

std::string cmd_synth(const SynthOptions& opt);

std::string cmd_ingest(const std::filesystem::path& records_path, const std::filesystem::path& manifest_path,
                       const std::filesystem::path& out_path);
std::string cmd_ingest_pairs(const std::filesystem::path& pairs_path, const std::filesystem::path& out_path);

std::string cmd_fit(const std::filesystem::path& store_path, double ridge, const std::filesystem::path& out_path);

struct CalibrateOptions {
    std::filesystem::path store_path;
    std::filesystem::path head_path;
    /// Objective name or decimal index.
    std::string verbosity = "verbosity";
    CalibrationOptions calibration;
    std::string reference_id;  // defaults to the store file name
    std::filesystem::path out_path;
};

std::string cmd_calibrate(const CalibrateOptions& opt);

struct TrainOptions {
    std::filesystem::path pairs_path;
    std::optional<std::filesystem::path> heldout_path;
    std::filesystem::path head_path;
    std::filesystem::path profile_path;
    std::vector<std::size_t> hidden = {1024, 1024, 1024};
    double beta_init = kDefaultBetaInit;
    TrainConfig train;
    std::filesystem::path out_path;
    std::optional<std::filesystem::path> history_path;
    std::optional<std::filesystem::path> gate_path;
};

std::string cmd_train(const TrainOptions& opt);

struct ScoreOptions {
    std::filesystem::path bundle_path;
    std::optional<std::filesystem::path> pairs_path;
    std::size_t index = 0;
    std::vector<double> prompt;
    std::vector<double> response;
    std::optional<std::string> steer;
};

std::string cmd_score(const ScoreOptions& opt);

struct EvalOptions {
    std::filesystem::path manifest_path;
    std::optional<std::filesystem::path> bundle_path;
    std::optional<std::string> steer;
    std::optional<std::filesystem::path> report_path;
    std::string model_label = "ArmoRM + MoE";
};

/// Returns the summary line; `table` receives the plain-text report.
std::string cmd_eval(const EvalOptions& opt, std::string* table = nullptr);

}  // namespace armo
