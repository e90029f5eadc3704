#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "armo/debias.hpp"
#include "armo/feature_store.hpp"
#include "armo/gating.hpp"
#include "armo/regression_head.hpp"

namespace armo {

/// Scores one response given its prompt. Must be safe to call concurrently.
using ScoreFn = std::function<double(std::span<const double> prompt, std::span<const double> response)>;

/// Fraction of pairs with score(chosen) > score(rejected); exact ties count 0.5.
double pairwise_accuracy(const ScoreFn& score, const PairStore& pairs);

struct CategoryResult {
    std::string name;
    double accuracy = 0.0;  // in [0,1]
    double weight = 1.0;
    std::size_t n_pairs = 0;
};

/// Σ weight·accuracy / Σ weight.
double weighted_score(std::span<const CategoryResult> categories);

/// Round to one decimal, ties to even (the current FE rounding mode must be
/// the default round-to-nearest).
double round_percent(double percent);

struct EvalReport {
    std::string model_label;
    std::vector<CategoryResult> categories;
    double overall = 0.0;

    std::string to_json() const;
    /// One header line and one row: Model | Score | <category>...
    std::string to_table() const;
};

EvalReport make_report(std::string model_label, std::vector<CategoryResult> categories);

struct DecompositionReport {
    std::vector<std::string> objective_names;
    std::vector<double> raw_rewards;
    std::vector<double> adjusted_rewards;
    std::vector<double> gating_coeffs;
    double scalar_score = 0.0;
    std::vector<double> contributions;

    std::string to_json() const;
};

/// Raw rewards → verbosity-adjusted rewards → gate coefficients → scalar.
/// `coeff_override`, when given, replaces the gate output (steering).
DecompositionReport decompose(const RewardHead& head, const DebiasProfile& profile, const GatingNetwork& net,
                              std::span<const double> prompt_feature, std::span<const double> response_feature,
                              std::optional<std::span<const double>> coeff_override = std::nullopt);

/// Parse "name=weight[,name=weight...]" into simplex coefficients over
/// `objective_names` (unlisted objectives get 0, weights renormalized).
std::vector<double> parse_steering(const std::string& spec, std::span<const std::string> objective_names);

// ---------------------------------------------------------------------------
// Planted-ground-truth synthetic data.

/// Which objective decides preference, keyed on the sign of one prompt
/// coordinate. A single-context rule has both objectives equal.
struct ContextRule {
    std::size_t coordinate = 0;
    std::size_t objective_if_positive = 0;
    std::size_t objective_if_negative = 1;

    std::size_t objective_for(std::span<const double> prompt) const {
        return prompt[coordinate] >= 0.0 ? objective_if_positive : objective_if_negative;
    }
};

struct SyntheticSpec {
    std::size_t n_pairs = 1000;
    std::size_t d = 16;
    std::size_t k = 4;
    std::uint64_t seed = 0;
    ContextRule context_rule;
    double noise_scale = 0.05;
    /// Rated records to generate; 0 means n_pairs.
    std::size_t n_rated = 0;
    /// Correlation between the two context objectives' planted directions is
    /// −conflict (only when they differ).
    double conflict = 0.6;

    void validate() const;
};

struct SyntheticData {
    RatedStore rated;
    PairStore pairs;
    /// Columns are the planted directions w*; planted reward_j = σ(w*_jᵀf).
    RewardHead planted_head;
    ContextRule rule;
    std::size_t verbosity_index = 0;
};

SyntheticData gen_synthetic(const SyntheticSpec& spec);

/// σ(w*_jᵀ f) for every objective.
std::vector<double> planted_rewards(const RewardHead& planted, std::span<const double> feature);

/// Accuracy of the context oracle: one-hot on the rule's objective, scored
/// with planted rewards.
double context_oracle_accuracy(const SyntheticData& data, const PairStore& pairs);

/// First n·(1−heldout_fraction) records for training, the rest held out.
std::pair<PairStore, PairStore> split_pairs(const PairStore& pairs, double heldout_fraction);

/// All points of the k-simplex on a grid of the given step (1/step must be
/// an integer), row-major.
std::vector<std::vector<double>> simplex_grid(std::size_t k, double step);

double fixed_weight_accuracy(std::span<const double> weights, const PreparedPairs& data);

struct FixedSimplexBaseline {
    std::vector<double> weights;
    double accuracy = 0.0;
};

/// Best prompt-independent scalarization over the simplex grid.
FixedSimplexBaseline best_fixed_simplex(const PreparedPairs& data, double step = 0.05);

}  // namespace armo
