#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace armo {

enum class CorrelationMetric { spearman, pearson };

std::string to_string(CorrelationMetric metric);
CorrelationMetric parse_metric(const std::string& name);

/// Average (fractional) ranks, 1-based. Tied values share the mean of the
/// rank range they occupy.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation. Returns 0.0 when either vector is constant.
double pearson(std::span<const double> a, std::span<const double> b);

/// Pearson correlation of average ranks. Returns 0.0 when either vector is
/// constant.
double spearman(std::span<const double> a, std::span<const double> b);

double correlation(CorrelationMetric metric, std::span<const double> a, std::span<const double> b);

struct CalibrationOptions {
    CorrelationMetric metric = CorrelationMetric::spearman;
    double tol = 1e-3;
    double bracket_max = 10.0;
    double bracket_cap = 1e4;
    double min_width = 1e-9;
};

/// Per-objective verbosity penalties. adjusted_i = r_i − lambda_i·r_verbosity.
struct DebiasProfile {
    std::vector<double> lambda;
    std::size_t verbosity_index = 0;
    CorrelationMetric metric = CorrelationMetric::spearman;
    /// |correlation(adjusted_i, r_verbosity)| on the reference set.
    std::vector<double> achieved_corr;
    /// Size of the correlation jump across the final bisection bracket.
    /// Non-zero only for objectives where the tolerance could not be met.
    std::vector<double> step_gap;
    double tol = 1e-3;
    std::string reference_id;

    std::size_t k() const { return lambda.size(); }
    bool attained(std::size_t i) const { return achieved_corr[i] <= tol; }

    /// The identity profile (all lambdas zero). Verbosity index is kept for
    /// reporting only.
    static DebiasProfile identity(std::size_t k, std::size_t verbosity_index);

    friend bool operator==(const DebiasProfile&, const DebiasProfile&) = default;
};

/// Row-major n×k matrix of predicted rewards on the reference distribution.
struct RewardMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
    std::vector<double> column(std::size_t j) const;
};

/// Choose lambda_i ≥ 0 for every objective so that
/// correlation(r_i − lambda_i·r_v, r_v) is driven to zero by bisection.
/// The verbosity objective itself gets lambda = 1.
DebiasProfile calibrate(const RewardMatrix& rewards, std::size_t verbosity_index,
                        const CalibrationOptions& options = {}, std::string reference_id = "");

std::vector<double> adjust(std::span<const double> rewards, const DebiasProfile& profile);

std::string profile_to_json(const DebiasProfile& profile);
DebiasProfile profile_from_json(const std::string& text);
void write_profile(const std::filesystem::path& path, const DebiasProfile& profile);
DebiasProfile read_profile(const std::filesystem::path& path);

}  // namespace armo
