#include "armo/regression_head.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "armo/binary_io.hpp"
#include "armo/errors.hpp"
#include "armo/parallel.hpp"

namespace armo {

namespace {

constexpr std::string_view kMagic = "AHD1";
constexpr std::uint32_t kVersion = 1;

// Least squares on the ridge-augmented design [F; √ridge·I] w ≈ [r; 0].
// The complete orthogonal decomposition returns the minimum-norm solution,
// so ridge = 0 with a rank-deficient design is still well defined.
Eigen::VectorXd solve_column(const RatedStore& store, std::size_t objective, double ridge) {
    const std::size_t d = store.d;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < store.records.size(); ++i) {
        if (store.records[i].is_present(objective)) rows.push_back(i);
    }
    const std::size_t extra = ridge > 0.0 ? d : 0;
    Eigen::MatrixXd design(rows.size() + extra, d);
    Eigen::VectorXd target(rows.size() + extra);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& rec = store.records[rows[r]];
        design.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Eigen::RowVectorXd>(rec.feature.data(), d);
        target(static_cast<Eigen::Index>(r)) = rec.rating[objective];
    }
    if (extra > 0) {
        design.bottomRows(extra) = std::sqrt(ridge) * Eigen::MatrixXd::Identity(d, d);
        target.tail(extra).setZero();
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
    return cod.solve(target);
}

}  // namespace

RewardHead::RewardHead(std::size_t d, std::vector<std::string> objective_names, double ridge, std::vector<double> w)
    : d_(d), names_(std::move(objective_names)), ridge_(ridge), w_(std::move(w)) {
    if (d_ < 1) throw ValidationError("reward head needs d >= 1");
    if (w_.size() != d_ * names_.size()) {
        throw ValidationError("reward head weight count " + std::to_string(w_.size()) + " != d*k = " +
                              std::to_string(d_ * names_.size()));
    }
    for (double x : w_) {
        if (!std::isfinite(x)) throw NumericalError("reward head has non-finite weights");
    }
}

RewardHead fit_head(const RatedStore& store, double ridge) {
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ValidationError("ridge must be a finite value >= 0");
    validate(store);
    const std::size_t k = store.k();
    const std::size_t d = store.d;
    if (k == 0) throw ValidationError("fit_head: store has no objectives");
    for (std::size_t j = 0; j < k; ++j) {
        if (store.present_count(j) == 0) {
            throw ValidationError("fit_head: objective '" + store.objective_names[j] + "' has no present ratings");
        }
    }
    for (std::size_t i = 0; i < store.records.size(); ++i) {
        for (double x : store.records[i].feature) {
            if (!std::isfinite(x)) throw NumericalError("fit_head: record " + std::to_string(i) + " has non-finite features");
        }
    }

    std::vector<double> w(d * k);
    ExceptionSlot failure;
#pragma omp parallel for schedule(dynamic)
    for (std::size_t j = 0; j < k; ++j) {
        failure.run([&] {
            const Eigen::VectorXd col = solve_column(store, j, ridge);
            std::copy(col.data(), col.data() + d, w.begin() + static_cast<std::ptrdiff_t>(j * d));
        });
    }
    failure.rethrow();
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < d; ++i) {
            if (!std::isfinite(w[j * d + i])) {
                throw NumericalError("fit_head: solve for objective '" + store.objective_names[j] +
                                     "' produced non-finite weights");
            }
        }
    }
    return RewardHead(d, store.objective_names, ridge, std::move(w));
}

std::vector<double> predict_rewards(const RewardHead& head, std::span<const double> feature) {
    if (feature.size() != head.d()) {
        throw ValidationError("predict_rewards: feature dimension " + std::to_string(feature.size()) +
                              " does not match head d=" + std::to_string(head.d()));
    }
    std::vector<double> out(head.k());
    for (std::size_t j = 0; j < head.k(); ++j) {
        const auto col = head.column(j);
        double acc = 0.0;
        for (std::size_t i = 0; i < feature.size(); ++i) acc += col[i] * feature[i];
        out[j] = acc;
    }
    return out;
}

std::vector<std::uint8_t> encode_head(const RewardHead& head) {
    io::ByteWriter w;
    w.put_bytes(kMagic);
    w.put_u32(kVersion);
    w.put_u32(static_cast<std::uint32_t>(head.d()));
    w.put_u32(static_cast<std::uint32_t>(head.k()));
    w.put_f64(head.ridge());
    for (const auto& name : head.objective_names()) w.put_string(name);
    w.put_f64s(head.weights());
    return w.take();
}

RewardHead decode_head(std::span<const std::uint8_t> bytes, const std::string& what) {
    io::ByteReader r(bytes, what);
    if (bytes.size() < 4 || r.get_bytes(4) != kMagic) throw FormatError(what + ": bad magic, expected \"AHD1\"");
    const auto version = r.get_u32();
    if (version != kVersion) throw FormatError(what + ": unsupported version " + std::to_string(version));
    const std::size_t d = r.get_u32();
    const std::size_t k = r.get_u32();
    const double ridge = r.get_f64();
    std::vector<std::string> names(k);
    for (auto& name : names) name = r.get_string();
    std::vector<double> w(d * k);
    r.get_f64s(w);
    if (r.remaining() != 0) throw FormatError(what + ": trailing bytes after head weights");
    return RewardHead(d, std::move(names), ridge, std::move(w));
}

void write_head(const std::filesystem::path& path, const RewardHead& head) {
    io::write_file(path, encode_head(head));
}

RewardHead read_head(const std::filesystem::path& path) {
    return decode_head(io::read_file(path), path.string());
}

}  // namespace armo
