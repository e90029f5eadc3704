#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "armo/feature_store.hpp"

namespace armo {

inline constexpr double kDefaultRidge = 1e-6;

/// Linear multi-objective head: rewards = wᵀ·feature.
/// `w` is stored column-major, column j holding objective j.
class RewardHead {
public:
    RewardHead() = default;
    RewardHead(std::size_t d, std::vector<std::string> objective_names, double ridge, std::vector<double> w);

    std::size_t d() const { return d_; }
    std::size_t k() const { return names_.size(); }
    double ridge() const { return ridge_; }
    const std::vector<std::string>& objective_names() const { return names_; }

    double weight(std::size_t row, std::size_t objective) const { return w_[objective * d_ + row]; }
    std::span<const double> column(std::size_t objective) const { return {w_.data() + objective * d_, d_}; }
    std::span<const double> weights() const { return w_; }

    friend bool operator==(const RewardHead&, const RewardHead&) = default;

private:
    std::size_t d_ = 0;
    std::vector<std::string> names_;
    double ridge_ = 0.0;
    std::vector<double> w_;
};

/// Fit each objective column independently on the records where that
/// objective is present:
///   min_w  Σ_present (wᵀf_i − r_ij)² + ridge·‖w‖²
/// Columns are solved in parallel; the result does not depend on thread count.
RewardHead fit_head(const RatedStore& store, double ridge = kDefaultRidge);

std::vector<double> predict_rewards(const RewardHead& head, std::span<const double> feature);

std::vector<std::uint8_t> encode_head(const RewardHead& head);
RewardHead decode_head(std::span<const std::uint8_t> bytes, const std::string& what = "reward head");
void write_head(const std::filesystem::path& path, const RewardHead& head);
RewardHead read_head(const std::filesystem::path& path);

}  // namespace armo
