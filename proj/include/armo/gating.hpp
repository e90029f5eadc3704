#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "armo/debias.hpp"
#include "armo/feature_store.hpp"
#include "armo/kernels.hpp"
#include "armo/regression_head.hpp"

namespace armo {

inline constexpr double kDefaultBetaInit = 100.0;

std::vector<std::size_t> default_layer_dims(std::size_t d, std::size_t k);

/// Prompt-conditioned gate: ReLU MLP whose final affine layer emits k logits,
/// followed by a softmax. `beta` scales scores inside the Bradley-Terry loss.
///
/// Parameters live in one flat buffer, layer by layer: W (out×in, row-major)
/// then b (out).
class GatingNetwork {
public:
    GatingNetwork() = default;
    /// All weights and biases zero.
    explicit GatingNetwork(std::vector<std::size_t> layer_dims, double beta = kDefaultBetaInit);

    /// He-uniform hidden layers (bound √(6/fan_in)), zero biases, zero final
    /// layer so the untrained gate is uniform.
    static GatingNetwork initialized(std::vector<std::size_t> layer_dims, std::uint64_t seed,
                                     double beta = kDefaultBetaInit);

    const std::vector<std::size_t>& layer_dims() const { return dims_; }
    std::size_t input_dim() const { return dims_.front(); }
    std::size_t output_dim() const { return dims_.back(); }
    std::size_t num_layers() const { return dims_.size() - 1; }

    std::span<double> weights(std::size_t layer);
    std::span<const double> weights(std::size_t layer) const;
    std::span<double> biases(std::size_t layer);
    std::span<const double> biases(std::size_t layer) const;

    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }
    std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }

    double beta = kDefaultBetaInit;

    friend bool operator==(const GatingNetwork&, const GatingNetwork&) = default;

private:
    std::vector<std::size_t> dims_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

std::vector<double> gate_forward(const GatingNetwork& net, std::span<const double> prompt_feature);

/// Gate coefficients for `rows` prompts stored row-major in `prompts`.
std::vector<double> gate_forward_batch(const GatingNetwork& net, std::span<const double> prompts, std::size_t rows,
                                       kernels::Exec exec = kernels::Exec::parallel);

double scalar_score(std::span<const double> coeffs, std::span<const double> adjusted_rewards);

/// −log σ(β(R_chosen − R_rejected)), evaluated as a stable softplus.
double bt_loss(double r_chosen, double r_rejected, double beta);

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t steps = 10000;
    std::size_t batch_size = 1024;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;
    kernels::Exec exec = kernels::Exec::parallel;

    void validate() const;
};

/// Cosine decay without warmup, floor 0.
double cosine_lr(double base, std::size_t step, std::size_t total_steps);

struct TrainHistory {
    std::vector<double> loss;
    std::vector<double> learning_rate;
    std::optional<double> heldout_accuracy;

    std::string to_csv() const;
};

/// Pairs with their adjusted reward vectors precomputed. Head and profile are
/// frozen while the gate trains, so this happens once.
struct PreparedPairs {
    std::size_t d = 0;
    std::size_t k = 0;
    std::size_t n = 0;
    std::vector<double> prompts;   // n×d
    std::vector<double> chosen;    // n×k adjusted rewards
    std::vector<double> rejected;  // n×k
};

PreparedPairs prepare_pairs(const PairStore& pairs, const RewardHead& head, const DebiasProfile& profile);

struct LossGradient {
    double loss = 0.0;
    std::vector<double> params;  // same layout as GatingNetwork::parameters()
    double beta = 0.0;
};

/// Mean Bradley-Terry loss over `batch` and its gradient with respect to
/// every gate parameter and beta. Per-example work may run in parallel; all
/// reductions run in index order, so serial and parallel agree bitwise.
LossGradient loss_and_gradient(const GatingNetwork& net, const PreparedPairs& data, std::span<const std::size_t> batch,
                               kernels::Exec exec = kernels::Exec::parallel);

/// Fraction of pairs the gated score ranks correctly, ties counting half.
double prepared_accuracy(const GatingNetwork& net, const PreparedPairs& data,
                         kernels::Exec exec = kernels::Exec::parallel);

/// Seeded epoch shuffler: every epoch is a fresh permutation derived from
/// (seed, epoch); the final short batch of an epoch is kept.
class EpochSampler {
public:
    EpochSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed);
    std::span<const std::size_t> next();
    std::size_t epoch() const { return epoch_; }

private:
    void reshuffle();

    std::size_t n_;
    std::size_t batch_;
    std::uint64_t seed_;
    std::size_t epoch_ = 0;
    std::size_t cursor_ = 0;
    std::vector<std::size_t> order_;
};

struct TrainResult {
    GatingNetwork net;
    TrainHistory history;
};

/// AdamW on the gate parameters and beta (beta is not weight-decayed) with a
/// cosine schedule. Throws NumericalError naming the step if the loss stops
/// being finite.
TrainResult train_gate(GatingNetwork net, const PairStore& pairs, const RewardHead& head, const DebiasProfile& profile,
                       const TrainConfig& cfg, const PairStore* heldout = nullptr);

std::vector<std::uint8_t> encode_gate(const GatingNetwork& net);
GatingNetwork decode_gate(std::span<const std::uint8_t> bytes, const std::string& what = "gating network");
void write_gate(const std::filesystem::path& path, const GatingNetwork& net);
GatingNetwork read_gate(const std::filesystem::path& path);

}  // namespace armo
