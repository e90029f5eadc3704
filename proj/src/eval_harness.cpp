#include "armo/eval_harness.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "armo/errors.hpp"
#include "armo/parallel.hpp"
#include "armo/rng.hpp"

namespace armo {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> normal_vector(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

void normalize(std::vector<double>& v) {
    const double norm = std::sqrt(dot(v, v));
    for (double& x : v) x /= norm;
}

const std::vector<std::string>& objective_pool() {
    static const std::vector<std::string> pool = {"helpfulness", "safety",    "correctness", "honesty",
                                                  "coherence",   "complexity", "instruction-following"};
    return pool;
}

}  // namespace

double pairwise_accuracy(const ScoreFn& score, const PairStore& pairs) {
    if (pairs.records.empty()) throw ValidationError("pairwise_accuracy: empty pair store");
    long long half_points = 0;
    const auto n = static_cast<std::ptrdiff_t>(pairs.records.size());
    ExceptionSlot failure;
#pragma omp parallel for schedule(static) reduction(+ : half_points)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        failure.run([&] {
            const auto& rec = pairs.records[static_cast<std::size_t>(i)];
            const double sc = score(rec.prompt, rec.chosen);
            const double sr = score(rec.prompt, rec.rejected);
            half_points += sc > sr ? 2 : (sc == sr ? 1 : 0);
        });
    }
    failure.rethrow();
    return static_cast<double>(half_points) / (2.0 * static_cast<double>(n));
}

double weighted_score(std::span<const CategoryResult> categories) {
    if (categories.empty()) throw ValidationError("weighted_score: no categories");
    double num = 0.0, den = 0.0;
    for (const auto& c : categories) {
        if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
            throw ValidationError("weighted_score: category '" + c.name + "' must have a positive weight");
        }
        num += c.weight * c.accuracy;
        den += c.weight;
    }
    return num / den;
}

double round_percent(double percent) { return std::nearbyint(percent * 10.0) / 10.0; }

EvalReport make_report(std::string model_label, std::vector<CategoryResult> categories) {
    EvalReport report{std::move(model_label), std::move(categories), 0.0};
    report.overall = weighted_score(report.categories);
    return report;
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["model"] = model_label;
    j["overall"] = overall;
    j["overall_pct"] = round_percent(100.0 * overall);
    auto& cats = j["categories"] = nlohmann::ordered_json::array();
    for (const auto& c : categories) {
        cats.push_back({{"name", c.name},
                        {"weight", c.weight},
                        {"n_pairs", c.n_pairs},
                        {"accuracy", c.accuracy},
                        {"accuracy_pct", round_percent(100.0 * c.accuracy)}});
    }
    return j.dump();
}

std::string EvalReport::to_table() const {
    std::vector<std::string> header = {"Model", "Score"};
    std::vector<std::string> row = {model_label};
    auto pct = [](double x) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(1) << round_percent(100.0 * x);
        return s.str();
    };
    row.push_back(pct(overall));
    for (const auto& c : categories) {
        std::ostringstream name;
        name << c.name;
        if (c.weight != 1.0) name << " (" << c.weight << " weight)";
        header.push_back(name.str());
        row.push_back(pct(c.accuracy));
    }
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const std::size_t width = std::max(header[i].size(), row[i].size());
            if (i > 0) out << " | ";
            if (i == 0) {
                out << std::left << std::setw(static_cast<int>(width)) << cells[i];
            } else {
                out << std::right << std::setw(static_cast<int>(width)) << cells[i];
            }
        }
        out << '\n';
    };
    emit(header);
    std::size_t rule = 0;
    for (std::size_t i = 0; i < header.size(); ++i) rule += std::max(header[i].size(), row[i].size()) + (i > 0 ? 3 : 0);
    out << std::string(rule, '-') << '\n';
    emit(row);
    return out.str();
}

std::string DecompositionReport::to_json() const {
    nlohmann::ordered_json j;
    j["objectives"] = objective_names;
    j["raw_rewards"] = raw_rewards;
    j["adjusted_rewards"] = adjusted_rewards;
    j["gating_coeffs"] = gating_coeffs;
    j["contributions"] = contributions;
    j["scalar_score"] = scalar_score;
    return j.dump();
}

DecompositionReport decompose(const RewardHead& head, const DebiasProfile& profile, const GatingNetwork& net,
                              std::span<const double> prompt_feature, std::span<const double> response_feature,
                              std::optional<std::span<const double>> coeff_override) {
    if (profile.k() != head.k() || net.output_dim() != head.k() || net.input_dim() != head.d()) {
        throw ValidationError("decompose: head, profile and gate dimensions disagree");
    }
    DecompositionReport r;
    r.objective_names = head.objective_names();
    r.raw_rewards = predict_rewards(head, response_feature);
    r.adjusted_rewards = adjust(r.raw_rewards, profile);
    if (coeff_override) {
        if (coeff_override->size() != head.k()) throw ValidationError("decompose: steering vector has wrong length");
        if (prompt_feature.size() != net.input_dim()) {
            throw ValidationError("decompose: prompt feature dimension does not match gate input");
        }
        r.gating_coeffs.assign(coeff_override->begin(), coeff_override->end());
    } else {
        r.gating_coeffs = gate_forward(net, prompt_feature);
    }
    r.scalar_score = scalar_score(r.gating_coeffs, r.adjusted_rewards);
    r.contributions.resize(head.k());
    for (std::size_t i = 0; i < head.k(); ++i) r.contributions[i] = r.gating_coeffs[i] * r.adjusted_rewards[i];
    return r;
}

std::vector<double> parse_steering(const std::string& spec, std::span<const std::string> objective_names) {
    std::vector<double> weights(objective_names.size(), 0.0);
    std::istringstream in(spec);
    std::string item;
    bool any = false;
    auto trim = [](std::string s) {
        const auto first = s.find_first_not_of(" \t");
        if (first == std::string::npos) return std::string();
        return s.substr(first, s.find_last_not_of(" \t") - first + 1);
    };
    while (std::getline(in, item, ',')) {
        item = trim(item);
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ValidationError("--steer: expected objective=weight, got '" + item + "'");
        const std::string name = trim(item.substr(0, eq));
        const auto it = std::find(objective_names.begin(), objective_names.end(), name);
        if (it == objective_names.end()) throw ValidationError("--steer: unknown objective '" + name + "'");
        double w = 0.0;
        try {
            std::size_t used = 0;
            const std::string value = trim(item.substr(eq + 1));
            w = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ValidationError("--steer: bad weight in '" + item + "'");
        }
        if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("--steer: weights must be finite and >= 0");
        weights[static_cast<std::size_t>(it - objective_names.begin())] = w;
        any = true;
    }
    double total = 0.0;
    for (double w : weights) total += w;
    if (!any || !(total > 0.0)) throw ValidationError("--steer: weights must sum to a positive value");
    for (double& w : weights) w /= total;
    return weights;
}

void SyntheticSpec::validate() const {
    if (d < 2) throw ValidationError("synthetic spec: d must be >= 2");
    if (k < 2) throw ValidationError("synthetic spec: k must be >= 2");
    if (n_pairs < 1) throw ValidationError("synthetic spec: n_pairs must be >= 1");
    if (context_rule.coordinate >= d) throw ValidationError("synthetic spec: context coordinate out of range");
    if (context_rule.objective_if_positive >= k || context_rule.objective_if_negative >= k) {
        throw ValidationError("synthetic spec: context objective out of range");
    }
    if (!(noise_scale >= 0.0)) throw ValidationError("synthetic spec: noise_scale must be >= 0");
    if (!(conflict >= 0.0 && conflict <= 1.0)) throw ValidationError("synthetic spec: conflict must lie in [0,1]");
}

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t d = spec.d;
    const std::size_t k = spec.k;
    Rng rng(spec.seed);

    // Planted unit directions, mutually orthogonal when k <= d.
    std::vector<std::vector<double>> dirs;
    for (std::size_t j = 0; j < k; ++j) {
        auto v = normal_vector(rng, d);
        if (j < d) {
            for (const auto& u : dirs) {
                const double proj = dot(v, u);
                for (std::size_t i = 0; i < d; ++i) v[i] -= proj * u[i];
            }
        }
        normalize(v);
        dirs.push_back(std::move(v));
    }
    const auto& rule = spec.context_rule;
    if (rule.objective_if_positive != rule.objective_if_negative) {
        const auto& pos = dirs[rule.objective_if_positive];
        auto& neg = dirs[rule.objective_if_negative];
        const double c = spec.conflict;
        for (std::size_t i = 0; i < d; ++i) neg[i] = -c * pos[i] + std::sqrt(1.0 - c * c) * neg[i];
        normalize(neg);
    }

    std::vector<std::string> names;
    for (std::size_t j = 0; j + 1 < k; ++j) {
        names.push_back(j < objective_pool().size() ? objective_pool()[j] : "objective-" + std::to_string(j));
    }
    names.push_back("verbosity");

    std::vector<double> w(d * k);
    for (std::size_t j = 0; j < k; ++j) std::copy(dirs[j].begin(), dirs[j].end(), w.begin() + static_cast<std::ptrdiff_t>(j * d));

    SyntheticData out;
    out.planted_head = RewardHead(d, names, 0.0, std::move(w));
    out.rule = rule;
    out.verbosity_index = k - 1;

    out.rated.d = static_cast<std::uint32_t>(d);
    out.rated.objective_names = names;
    const std::size_t n_rated = spec.n_rated == 0 ? spec.n_pairs : spec.n_rated;
    out.rated.records.reserve(n_rated);
    for (std::size_t i = 0; i < n_rated; ++i) {
        RatedRecord rec{normal_vector(rng, d), {}, std::vector<std::uint8_t>(k, 1)};
        rec.rating = planted_rewards(out.planted_head, rec.feature);
        for (double& r : rec.rating) {
            const double noise = spec.noise_scale > 0.0 ? spec.noise_scale * rng.normal() : 0.0;
            r = std::clamp(r + noise, 0.0, 1.0);
        }
        out.rated.records.push_back(std::move(rec));
    }

    out.pairs.d = static_cast<std::uint32_t>(d);
    out.pairs.records.reserve(spec.n_pairs);
    for (std::size_t i = 0; i < spec.n_pairs; ++i) {
        PairRecord rec{normal_vector(rng, d), normal_vector(rng, d), normal_vector(rng, d)};
        const std::size_t j = rule.objective_for(rec.prompt);
        const double ra = logistic(dot(out.planted_head.column(j), rec.chosen));
        const double rb = logistic(dot(out.planted_head.column(j), rec.rejected));
        if (rb > ra) std::swap(rec.chosen, rec.rejected);
        out.pairs.records.push_back(std::move(rec));
    }
    return out;
}

std::vector<double> planted_rewards(const RewardHead& planted, std::span<const double> feature) {
    auto z = predict_rewards(planted, feature);
    for (double& x : z) x = logistic(x);
    return z;
}

double context_oracle_accuracy(const SyntheticData& data, const PairStore& pairs) {
    const ScoreFn score = [&](std::span<const double> prompt, std::span<const double> response) {
        return planted_rewards(data.planted_head, response)[data.rule.objective_for(prompt)];
    };
    return pairwise_accuracy(score, pairs);
}

std::pair<PairStore, PairStore> split_pairs(const PairStore& pairs, double heldout_fraction) {
    if (!(heldout_fraction >= 0.0 && heldout_fraction < 1.0)) {
        throw ValidationError("split_pairs: held-out fraction must lie in [0,1)");
    }
    const std::size_t n = pairs.records.size();
    const auto held = static_cast<std::size_t>(std::floor(static_cast<double>(n) * heldout_fraction));
    PairStore train{pairs.d, {pairs.records.begin(), pairs.records.end() - static_cast<std::ptrdiff_t>(held)}};
    PairStore test{pairs.d, {pairs.records.end() - static_cast<std::ptrdiff_t>(held), pairs.records.end()}};
    return {std::move(train), std::move(test)};
}

std::vector<std::vector<double>> simplex_grid(std::size_t k, double step) {
    if (k < 1) throw ValidationError("simplex_grid: k must be >= 1");
    const double parts_real = 1.0 / step;
    const auto parts = static_cast<std::size_t>(std::llround(parts_real));
    if (parts == 0 || std::abs(parts_real - static_cast<double>(parts)) > 1e-9) {
        throw ValidationError("simplex_grid: 1/step must be a positive integer");
    }
    std::vector<std::vector<double>> out;
    std::vector<std::size_t> counts(k, 0);
    // Enumerate compositions of `parts` into k non-negative integers.
    auto rec = [&](auto&& self, std::size_t pos, std::size_t left) -> void {
        if (pos + 1 == k) {
            counts[pos] = left;
            std::vector<double> w(k);
            for (std::size_t i = 0; i < k; ++i) w[i] = static_cast<double>(counts[i]) / static_cast<double>(parts);
            out.push_back(std::move(w));
            return;
        }
        for (std::size_t c = 0; c <= left; ++c) {
            counts[pos] = c;
            self(self, pos + 1, left - c);
        }
    };
    rec(rec, 0, parts);
    return out;
}

double fixed_weight_accuracy(std::span<const double> weights, const PreparedPairs& data) {
    if (weights.size() != data.k) throw ValidationError("fixed_weight_accuracy: weight dimension mismatch");
    if (data.n == 0) throw ValidationError("fixed_weight_accuracy: no pairs");
    long long half_points = 0;
    const std::size_t k = data.k;
    for (std::size_t i = 0; i < data.n; ++i) {
        const double sc = dot(weights, {data.chosen.data() + i * k, k});
        const double sr = dot(weights, {data.rejected.data() + i * k, k});
        half_points += sc > sr ? 2 : (sc == sr ? 1 : 0);
    }
    return static_cast<double>(half_points) / (2.0 * static_cast<double>(data.n));
}

FixedSimplexBaseline best_fixed_simplex(const PreparedPairs& data, double step) {
    const auto grid = simplex_grid(data.k, step);
    std::vector<double> acc(grid.size());
    const auto n = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t g = 0; g < n; ++g) acc[g] = fixed_weight_accuracy(grid[g], data);
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
        if (acc[g] > acc[best]) best = g;
    }
    return {grid[best], acc[best]};
}

}  // namespace armo
