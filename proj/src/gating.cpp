#include "armo/gating.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "armo/binary_io.hpp"
#include "armo/errors.hpp"
#include "armo/rng.hpp"

namespace armo {

namespace {

constexpr std::string_view kMagic = "AGT1";
constexpr std::uint32_t kVersion = 1;

// softplus(x) = log(1 + e^x) without overflow.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// logistic σ(x), stable for large |x|.
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void check_dims(const std::vector<std::size_t>& dims) {
    if (dims.size() < 2) throw ValidationError("gating network needs at least input and output dimensions");
    for (auto x : dims) {
        if (x < 1) throw ValidationError("gating network layer dimensions must be >= 1");
    }
}

void check_finite(const GatingNetwork& net) {
    if (!std::isfinite(net.beta)) throw NumericalError("gating network has non-finite beta");
    for (double x : net.parameters()) {
        if (!std::isfinite(x)) throw NumericalError("gating network has non-finite parameters");
    }
}

// Activations of one forward pass over a batch, kept for backprop.
struct ForwardTrace {
    std::vector<std::vector<double>> pre;   // pre[l]: batch×dims[l+1], before ReLU
    std::vector<std::vector<double>> post;  // post[l]: batch×dims[l+1], after ReLU (hidden layers only)
    std::vector<double> probs;              // batch×k
};

ForwardTrace forward(const GatingNetwork& net, std::span<const double> x, std::size_t rows, kernels::Exec exec) {
    const auto& dims = net.layer_dims();
    const std::size_t layers = net.num_layers();
    ForwardTrace t;
    t.pre.resize(layers);
    t.post.resize(layers);
    std::span<const double> input = x;
    for (std::size_t l = 0; l < layers; ++l) {
        const kernels::DenseShape s{rows, dims[l], dims[l + 1]};
        t.pre[l].resize(rows * s.out);
        kernels::dense_forward(exec, s, input, net.weights(l), net.biases(l), t.pre[l]);
        if (l + 1 < layers) {
            t.post[l] = t.pre[l];
            kernels::relu_inplace(exec, t.post[l]);
            input = t.post[l];
        }
    }
    t.probs.resize(rows * net.output_dim());
    kernels::softmax_rows(exec, rows, net.output_dim(), t.pre.back(), t.probs);
    return t;
}

}  // namespace

std::vector<std::size_t> default_layer_dims(std::size_t d, std::size_t k) { return {d, 1024, 1024, 1024, k}; }

GatingNetwork::GatingNetwork(std::vector<std::size_t> layer_dims, double beta_init)
    : beta(beta_init), dims_(std::move(layer_dims)) {
    check_dims(dims_);
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        offsets_.push_back(total);
        total += dims_[l] * dims_[l + 1] + dims_[l + 1];
    }
    params_.assign(total, 0.0);
}

GatingNetwork GatingNetwork::initialized(std::vector<std::size_t> layer_dims, std::uint64_t seed, double beta) {
    GatingNetwork net(std::move(layer_dims), beta);
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
        const double bound = std::sqrt(6.0 / static_cast<double>(net.dims_[l]));
        for (double& w : net.weights(l)) w = rng.uniform(-bound, bound);
    }
    return net;
}

std::span<double> GatingNetwork::weights(std::size_t l) {
    return {params_.data() + offsets_[l], dims_[l] * dims_[l + 1]};
}
std::span<const double> GatingNetwork::weights(std::size_t l) const {
    return {params_.data() + offsets_[l], dims_[l] * dims_[l + 1]};
}
std::span<double> GatingNetwork::biases(std::size_t l) {
    return {params_.data() + offsets_[l] + dims_[l] * dims_[l + 1], dims_[l + 1]};
}
std::span<const double> GatingNetwork::biases(std::size_t l) const {
    return {params_.data() + offsets_[l] + dims_[l] * dims_[l + 1], dims_[l + 1]};
}

std::vector<double> gate_forward(const GatingNetwork& net, std::span<const double> prompt_feature) {
    if (prompt_feature.size() != net.input_dim()) {
        throw ValidationError("gate_forward: prompt feature dimension " + std::to_string(prompt_feature.size()) +
                              " does not match gate input " + std::to_string(net.input_dim()));
    }
    check_finite(net);
    return forward(net, prompt_feature, 1, kernels::Exec::serial).probs;
}

std::vector<double> gate_forward_batch(const GatingNetwork& net, std::span<const double> prompts, std::size_t rows,
                                       kernels::Exec exec) {
    if (prompts.size() != rows * net.input_dim()) throw ValidationError("gate_forward_batch: prompt buffer size mismatch");
    check_finite(net);
    return forward(net, prompts, rows, exec).probs;
}

double scalar_score(std::span<const double> coeffs, std::span<const double> adjusted_rewards) {
    if (coeffs.size() != adjusted_rewards.size()) {
        throw ValidationError("scalar_score: coefficient dimension " + std::to_string(coeffs.size()) +
                              " does not match reward dimension " + std::to_string(adjusted_rewards.size()));
    }
    return dot(coeffs.data(), adjusted_rewards.data(), coeffs.size());
}

double bt_loss(double r_chosen, double r_rejected, double beta) {
    if (!std::isfinite(r_chosen) || !std::isfinite(r_rejected) || !std::isfinite(beta)) {
        throw NumericalError("bt_loss: non-finite input");
    }
    return softplus(-beta * (r_chosen - r_rejected));
}

void TrainConfig::validate() const {
    if (steps < 1) throw ValidationError("train config: steps must be >= 1");
    if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ValidationError("train config: learning_rate must be > 0");
    }
    if (!(weight_decay >= 0.0)) throw ValidationError("train config: weight_decay must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0)) {
        throw ValidationError("train config: invalid AdamW moments or eps");
    }
}

double cosine_lr(double base, std::size_t step, std::size_t total_steps) {
    return base * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps)));
}

std::string TrainHistory::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "step,lr,loss\n";
    for (std::size_t t = 0; t < loss.size(); ++t) out << t << ',' << learning_rate[t] << ',' << loss[t] << '\n';
    return out.str();
}

PreparedPairs prepare_pairs(const PairStore& pairs, const RewardHead& head, const DebiasProfile& profile) {
    validate(pairs);
    if (pairs.d != head.d()) {
        throw ValidationError("pair store d=" + std::to_string(pairs.d) + " does not match head d=" +
                              std::to_string(head.d()));
    }
    if (profile.k() != head.k()) {
        throw ValidationError("debias profile k=" + std::to_string(profile.k()) + " does not match head k=" +
                              std::to_string(head.k()));
    }
    PreparedPairs out;
    out.d = pairs.d;
    out.k = head.k();
    out.n = pairs.records.size();
    out.prompts.reserve(out.n * out.d);
    out.chosen.reserve(out.n * out.k);
    out.rejected.reserve(out.n * out.k);
    for (const auto& rec : pairs.records) {
        out.prompts.insert(out.prompts.end(), rec.prompt.begin(), rec.prompt.end());
        const auto c = adjust(predict_rewards(head, rec.chosen), profile);
        const auto r = adjust(predict_rewards(head, rec.rejected), profile);
        out.chosen.insert(out.chosen.end(), c.begin(), c.end());
        out.rejected.insert(out.rejected.end(), r.begin(), r.end());
    }
    return out;
}

LossGradient loss_and_gradient(const GatingNetwork& net, const PreparedPairs& data, std::span<const std::size_t> batch,
                               kernels::Exec exec) {
    if (net.input_dim() != data.d || net.output_dim() != data.k) {
        throw ValidationError("gate dimensions do not match prepared pairs");
    }
    if (batch.empty()) throw ValidationError("loss_and_gradient: empty batch");
    const std::size_t rows = batch.size();
    const std::size_t d = data.d;
    const std::size_t k = data.k;
    const double beta = net.beta;
    const double inv_rows = 1.0 / static_cast<double>(rows);

    std::vector<double> x(rows * d);
    for (std::size_t i = 0; i < rows; ++i) {
        std::copy_n(data.prompts.begin() + static_cast<std::ptrdiff_t>(batch[i] * d), d,
                    x.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    ForwardTrace trace = forward(net, x, rows, exec);

    std::vector<double> example_loss(rows);
    std::vector<double> example_dbeta(rows);
    std::vector<double> dlogits(rows * k);
    const auto signed_rows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (exec == kernels::Exec::parallel)
    for (std::ptrdiff_t i = 0; i < signed_rows; ++i) {
        const double* g = trace.probs.data() + i * k;
        const double* rc = data.chosen.data() + batch[i] * k;
        const double* rr = data.rejected.data() + batch[i] * k;
        const double margin = dot(g, rc, k) - dot(g, rr, k);
        const double z = -beta * margin;
        example_loss[i] = softplus(z);
        const double s = sigmoid(z);  // d softplus(z) / dz
        const double dmargin = -beta * s * inv_rows;
        example_dbeta[i] = -margin * s * inv_rows;
        // dL/dg_c = dmargin·(rc − rr); softmax Jacobian: dz_c = g_c (dg_c − Σ g·dg)
        double* dz = dlogits.data() + i * k;
        double weighted = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            dz[c] = dmargin * (rc[c] - rr[c]);
            weighted += g[c] * dz[c];
        }
        for (std::size_t c = 0; c < k; ++c) dz[c] = g[c] * (dz[c] - weighted);
    }

    LossGradient out;
    for (std::size_t i = 0; i < rows; ++i) {
        out.loss += example_loss[i];
        out.beta += example_dbeta[i];
    }
    out.loss *= inv_rows;
    out.params.assign(net.parameters().size(), 0.0);

    const auto& dims = net.layer_dims();
    std::vector<double> delta = std::move(dlogits);
    for (std::size_t l = net.num_layers(); l-- > 0;) {
        const kernels::DenseShape s{rows, dims[l], dims[l + 1]};
        std::span<const double> input = l == 0 ? std::span<const double>(x) : std::span<const double>(trace.post[l - 1]);
        const std::size_t off = net.weight_offset(l);
        std::span<double> dw(out.params.data() + off, s.in * s.out);
        std::span<double> db(out.params.data() + off + s.in * s.out, s.out);
        kernels::dense_backward_params(exec, s, delta, input, dw, db);
        if (l == 0) break;
        std::vector<double> dinput(rows * s.in);
        kernels::dense_backward_input(exec, s, delta, net.weights(l), dinput);
        kernels::relu_backward(exec, trace.pre[l - 1], dinput);
        delta = std::move(dinput);
    }
    return out;
}

double prepared_accuracy(const GatingNetwork& net, const PreparedPairs& data, kernels::Exec exec) {
    if (data.n == 0) throw ValidationError("accuracy: no pairs");
    const auto coeffs = gate_forward_batch(net, data.prompts, data.n, exec);
    const std::size_t k = data.k;
    long long half_points = 0;
    const auto n = static_cast<std::ptrdiff_t>(data.n);
#pragma omp parallel for schedule(static) reduction(+ : half_points) if (exec == kernels::Exec::parallel)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double sc = dot(coeffs.data() + i * k, data.chosen.data() + i * k, k);
        const double sr = dot(coeffs.data() + i * k, data.rejected.data() + i * k, k);
        half_points += sc > sr ? 2 : (sc == sr ? 1 : 0);
    }
    return static_cast<double>(half_points) / (2.0 * static_cast<double>(data.n));
}

EpochSampler::EpochSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : n_(n), batch_(batch_size), seed_(seed), order_(n) {
    if (n_ == 0) throw ValidationError("sampler: empty dataset");
    if (batch_ == 0) throw ValidationError("sampler: batch size must be >= 1");
    reshuffle();
}

void EpochSampler::reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (std::size_t i = n_; i-- > 1;) {
        const std::size_t j = bounded(counter_draw(seed_, epoch_, i), i + 1);
        std::swap(order_[i], order_[j]);
    }
}

std::span<const std::size_t> EpochSampler::next() {
    if (cursor_ >= n_) {
        ++epoch_;
        cursor_ = 0;
        reshuffle();
    }
    const std::size_t take = std::min(batch_, n_ - cursor_);
    std::span<const std::size_t> out(order_.data() + cursor_, take);
    cursor_ += take;
    return out;
}

TrainResult train_gate(GatingNetwork net, const PairStore& pairs, const RewardHead& head, const DebiasProfile& profile,
                       const TrainConfig& cfg, const PairStore* heldout) {
    cfg.validate();
    if (pairs.records.empty()) throw ValidationError("train_gate: empty pair store");
    if (net.input_dim() != head.d() || net.output_dim() != head.k()) {
        throw ValidationError("train_gate: gate dims [" + std::to_string(net.input_dim()) + " -> " +
                              std::to_string(net.output_dim()) + "] do not match head d=" + std::to_string(head.d()) +
                              ", k=" + std::to_string(head.k()));
    }
    check_finite(net);
    const PreparedPairs data = prepare_pairs(pairs, head, profile);

    TrainHistory history;
    history.loss.reserve(cfg.steps);
    history.learning_rate.reserve(cfg.steps);

    auto params = net.parameters();
    std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
    double m_beta = 0.0, v_beta = 0.0;
    EpochSampler sampler(data.n, cfg.batch_size, cfg.seed);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const double lr = cosine_lr(cfg.learning_rate, step, cfg.steps);
        const LossGradient grad = loss_and_gradient(net, data, sampler.next(), cfg.exec);
        if (!std::isfinite(grad.loss)) {
            throw NumericalError("train_gate: loss diverged (non-finite) at step " + std::to_string(step));
        }
        history.loss.push_back(grad.loss);
        history.learning_rate.push_back(lr);

        const double t = static_cast<double>(step + 1);
        const double correct1 = 1.0 - std::pow(cfg.adam_beta1, t);
        const double correct2 = 1.0 - std::pow(cfg.adam_beta2, t);
        const double decay = 1.0 - lr * cfg.weight_decay;
        const auto count = static_cast<std::ptrdiff_t>(params.size());
#pragma omp parallel for schedule(static) if (cfg.exec == kernels::Exec::parallel)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            const double g = grad.params[i];
            m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g;
            v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g * g;
            params[i] *= decay;
            params[i] -= lr * (m[i] / correct1) / (std::sqrt(v[i] / correct2) + cfg.adam_eps);
        }
        m_beta = cfg.adam_beta1 * m_beta + (1.0 - cfg.adam_beta1) * grad.beta;
        v_beta = cfg.adam_beta2 * v_beta + (1.0 - cfg.adam_beta2) * grad.beta * grad.beta;
        net.beta -= lr * (m_beta / correct1) / (std::sqrt(v_beta / correct2) + cfg.adam_eps);
    }

    if (heldout != nullptr) {
        history.heldout_accuracy = prepared_accuracy(net, prepare_pairs(*heldout, head, profile), cfg.exec);
    }
    return {std::move(net), std::move(history)};
}

std::vector<std::uint8_t> encode_gate(const GatingNetwork& net) {
    io::ByteWriter w;
    w.put_bytes(kMagic);
    w.put_u32(kVersion);
    w.put_u32(static_cast<std::uint32_t>(net.layer_dims().size()));
    for (auto dim : net.layer_dims()) w.put_u32(static_cast<std::uint32_t>(dim));
    w.put_f64(net.beta);
    w.put_f64s(net.parameters());
    return w.take();
}

GatingNetwork decode_gate(std::span<const std::uint8_t> bytes, const std::string& what) {
    io::ByteReader r(bytes, what);
    if (bytes.size() < 4 || r.get_bytes(4) != kMagic) throw FormatError(what + ": bad magic, expected \"AGT1\"");
    const auto version = r.get_u32();
    if (version != kVersion) throw FormatError(what + ": unsupported version " + std::to_string(version));
    const auto count = r.get_u32();
    if (count < 2 || count > 64) throw FormatError(what + ": implausible layer count " + std::to_string(count));
    std::vector<std::size_t> dims(count);
    for (auto& dim : dims) dim = r.get_u32();
    const double beta = r.get_f64();
    GatingNetwork net(std::move(dims), beta);
    r.get_f64s(net.parameters());
    if (r.remaining() != 0) throw FormatError(what + ": trailing bytes after gate parameters");
    return net;
}

void write_gate(const std::filesystem::path& path, const GatingNetwork& net) { io::write_file(path, encode_gate(net)); }

GatingNetwork read_gate(const std::filesystem::path& path) { return decode_gate(io::read_file(path), path.string()); }

}  // namespace armo
