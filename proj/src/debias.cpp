#include "armo/debias.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include <json.hpp>

#include "armo/binary_io.hpp"
#include "armo/errors.hpp"
#include "armo/parallel.hpp"

namespace armo {

std::string to_string(CorrelationMetric metric) {
    return metric == CorrelationMetric::spearman ? "spearman" : "pearson";
}

CorrelationMetric parse_metric(const std::string& name) {
    if (name == "spearman") return CorrelationMetric::spearman;
    if (name == "pearson") return CorrelationMetric::pearson;
    throw ValidationError("unknown correlation metric '" + name + "' (expected spearman or pearson)");
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ValidationError("correlation: length mismatch (" + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + ")");
    }
    if (a.size() < 2) throw ValidationError("correlation: need at least 2 observations");
}

bool is_constant(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

double pearson_unchecked(std::span<const double> a, std::span<const double> b) {
    if (is_constant(a) || is_constant(b)) return 0.0;
    const double n = static_cast<double>(a.size());
    const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
    std::vector<double> ranks(values.size());
    std::size_t start = 0;
    while (start < order.size()) {
        std::size_t end = start + 1;
        while (end < order.size() && values[order[end]] == values[order[start]]) ++end;
        // positions start..end-1 hold 1-based ranks start+1..end
        const double rank = 0.5 * static_cast<double>(start + 1 + end);
        for (std::size_t p = start; p < end; ++p) ranks[order[p]] = rank;
        start = end;
    }
    return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    check_pair(a, b);
    return pearson_unchecked(a, b);
}

double spearman(std::span<const double> a, std::span<const double> b) {
    check_pair(a, b);
    if (is_constant(a) || is_constant(b)) return 0.0;
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    return pearson_unchecked(ra, rb);
}

double correlation(CorrelationMetric metric, std::span<const double> a, std::span<const double> b) {
    return metric == CorrelationMetric::spearman ? spearman(a, b) : pearson(a, b);
}

DebiasProfile DebiasProfile::identity(std::size_t k, std::size_t verbosity_index) {
    DebiasProfile p;
    p.lambda.assign(k, 0.0);
    p.verbosity_index = verbosity_index;
    p.achieved_corr.assign(k, 0.0);
    p.step_gap.assign(k, 0.0);
    return p;
}

std::vector<double> RewardMatrix::column(std::size_t j) const {
    std::vector<double> out(rows);
    for (std::size_t i = 0; i < rows; ++i) out[i] = (*this)(i, j);
    return out;
}

namespace {

struct ObjectiveCalibration {
    double lambda = 0.0;
    double achieved = 0.0;
    double gap = 0.0;
};

class PenaltySearch {
public:
    PenaltySearch(std::vector<double> target, std::span<const double> verbose, CorrelationMetric metric)
        : target_(std::move(target)), verbose_(verbose), metric_(metric), scratch_(target_.size()) {}

    // Correlation of (target − λ·verbose) with verbose.
    double rho(double lambda) {
        for (std::size_t i = 0; i < target_.size(); ++i) scratch_[i] = target_[i] - lambda * verbose_[i];
        return correlation(metric_, scratch_, verbose_);
    }

    // λ at which target − λ·verbose is exactly constant, if one exists.
    std::optional<double> exact_affine_lambda() {
        const auto [lo, hi] = std::minmax_element(verbose_.begin(), verbose_.end());
        const auto a = static_cast<std::size_t>(hi - verbose_.begin());
        const auto b = static_cast<std::size_t>(lo - verbose_.begin());
        const double lambda = (target_[a] - target_[b]) / (verbose_[a] - verbose_[b]);
        if (!(lambda > 0.0) || !std::isfinite(lambda)) return std::nullopt;
        for (std::size_t i = 0; i < target_.size(); ++i) scratch_[i] = target_[i] - lambda * verbose_[i];
        if (!is_constant(scratch_)) return std::nullopt;
        return lambda;
    }

private:
    std::vector<double> target_;
    std::span<const double> verbose_;
    CorrelationMetric metric_;
    std::vector<double> scratch_;
};

ObjectiveCalibration calibrate_one(PenaltySearch& search, const CalibrationOptions& opt) {
    const double rho0 = search.rho(0.0);
    if (rho0 <= 0.0) return {0.0, std::abs(rho0), 0.0};
    if (auto exact = search.exact_affine_lambda()) return {*exact, 0.0, 0.0};

    double lo = 0.0;
    double rho_lo = rho0;
    double hi = opt.bracket_max;
    double rho_hi = search.rho(hi);
    while (rho_hi > 0.0 && hi < opt.bracket_cap) {
        lo = hi;
        rho_lo = rho_hi;
        hi = std::min(2.0 * hi, opt.bracket_cap);
        rho_hi = search.rho(hi);
    }
    if (rho_hi > 0.0) return {hi, std::abs(rho_hi), rho_hi};
    while (hi - lo >= opt.min_width) {
        const double mid = 0.5 * (lo + hi);
        const double rho_mid = search.rho(mid);
        if (std::abs(rho_mid) <= opt.tol) return {mid, std::abs(rho_mid), 0.0};
        if (rho_mid > 0.0) {
            lo = mid;
            rho_lo = rho_mid;
        } else {
            hi = mid;
            rho_hi = rho_mid;
        }
    }
    const double mid = 0.5 * (lo + hi);
    const double achieved = std::abs(search.rho(mid));
    return {mid, achieved, achieved <= opt.tol ? 0.0 : rho_lo - rho_hi};
}

}  // namespace

DebiasProfile calibrate(const RewardMatrix& rewards, std::size_t verbosity_index, const CalibrationOptions& options,
                        std::string reference_id) {
    const std::size_t n = rewards.rows;
    const std::size_t k = rewards.cols;
    if (rewards.values.size() != n * k) throw ValidationError("calibrate: reward matrix size mismatch");
    if (n < 3) throw ValidationError("calibrate: need at least 3 reference rows");
    if (verbosity_index >= k) {
        throw ValidationError("calibrate: verbosity index " + std::to_string(verbosity_index) + " out of range for k=" +
                              std::to_string(k));
    }
    if (!(options.tol >= 0.0) || !(options.bracket_max > 0.0) || !(options.bracket_cap >= options.bracket_max)) {
        throw ValidationError("calibrate: invalid tolerance or bracket");
    }
    for (double x : rewards.values) {
        if (!std::isfinite(x)) throw NumericalError("calibrate: non-finite reward on reference set");
    }
    const std::vector<double> verbose = rewards.column(verbosity_index);
    if (is_constant(verbose)) throw ValidationError("calibrate: verbosity rewards are constant on the reference set");

    DebiasProfile profile;
    profile.metric = options.metric;
    profile.verbosity_index = verbosity_index;
    profile.tol = options.tol;
    profile.reference_id = std::move(reference_id);
    profile.lambda.assign(k, 0.0);
    profile.achieved_corr.assign(k, 0.0);
    profile.step_gap.assign(k, 0.0);

    ExceptionSlot failure;
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < k; ++i) {
        failure.run([&] {
            ObjectiveCalibration result;
            if (i == verbosity_index) {
                // r_v − 1·r_v is identically zero; constant vectors correlate as 0.
                result = {1.0, 0.0, 0.0};
            } else {
                PenaltySearch search(rewards.column(i), verbose, options.metric);
                result = calibrate_one(search, options);
            }
            profile.lambda[i] = result.lambda;
            profile.achieved_corr[i] = result.achieved;
            profile.step_gap[i] = result.gap;
        });
    }
    failure.rethrow();
    return profile;
}

std::vector<double> adjust(std::span<const double> rewards, const DebiasProfile& profile) {
    if (rewards.size() != profile.k()) {
        throw ValidationError("adjust: reward dimension " + std::to_string(rewards.size()) +
                              " does not match profile k=" + std::to_string(profile.k()));
    }
    const double verbose = rewards[profile.verbosity_index];
    std::vector<double> out(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = rewards[i] - profile.lambda[i] * verbose;
    return out;
}

std::string profile_to_json(const DebiasProfile& profile) {
    nlohmann::ordered_json j;
    j["metric"] = to_string(profile.metric);
    j["verbosity_index"] = profile.verbosity_index;
    j["lambda"] = profile.lambda;
    j["achieved_corr"] = profile.achieved_corr;
    j["reference_id"] = profile.reference_id;
    j["tolerance"] = profile.tol;
    j["step_gap"] = profile.step_gap;
    return j.dump();
}

DebiasProfile profile_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        DebiasProfile p;
        p.metric = parse_metric(j.at("metric").get<std::string>());
        p.verbosity_index = j.at("verbosity_index").get<std::size_t>();
        p.lambda = j.at("lambda").get<std::vector<double>>();
        p.achieved_corr = j.at("achieved_corr").get<std::vector<double>>();
        p.reference_id = j.at("reference_id").get<std::string>();
        p.tol = j.value("tolerance", 1e-3);
        p.step_gap = j.value("step_gap", std::vector<double>(p.lambda.size(), 0.0));
        if (p.achieved_corr.size() != p.lambda.size() || p.step_gap.size() != p.lambda.size()) {
            throw ValidationError("debias profile: array lengths disagree");
        }
        if (p.verbosity_index >= p.lambda.size()) throw ValidationError("debias profile: verbosity_index out of range");
        for (double x : p.lambda) {
            if (!std::isfinite(x)) throw NumericalError("debias profile: non-finite lambda");
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("debias profile: ") + e.what());
    }
}

void write_profile(const std::filesystem::path& path, const DebiasProfile& profile) {
    const std::string text = profile_to_json(profile) + "\n";
    io::write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

DebiasProfile read_profile(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    return profile_from_json(std::string(bytes.begin(), bytes.end()));
}

}  // namespace armo
