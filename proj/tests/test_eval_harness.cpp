#include <doctest.h>

#include <cmath>

#include "armo/debias.hpp"
#include "armo/errors.hpp"
#include "armo/eval_harness.hpp"
#include "armo/regression_head.hpp"
#include "armo/rng.hpp"

using namespace armo;

namespace {

PairStore random_pairs(Rng& rng, std::size_t n, std::size_t d) {
    PairStore s{static_cast<std::uint32_t>(d), {}};
    for (std::size_t i = 0; i < n; ++i) {
        PairRecord r;
        for (std::size_t c = 0; c < d; ++c) {
            r.prompt.push_back(rng.normal());
            r.chosen.push_back(rng.normal());
            r.rejected.push_back(rng.normal());
        }
        s.records.push_back(std::move(r));
    }
    return s;
}

std::vector<CategoryResult> table_row(std::initializer_list<double> percents) {
    static const char* names[] = {"Chat", "Chat Hard", "Safety", "Reasoning", "Prior Sets"};
    std::vector<CategoryResult> out;
    std::size_t i = 0;
    for (double p : percents) {
        out.push_back({names[i], p / 100.0, i == 4 ? 0.5 : 1.0, 0});
        ++i;
    }
    return out;
}

double spearman_planted_vs_fit(const SyntheticData& data, const RewardHead& fit, std::size_t j) {
    std::vector<double> planted, predicted;
    for (const auto& rec : data.rated.records) {
        planted.push_back(planted_rewards(data.planted_head, rec.feature)[j]);
        predicted.push_back(predict_rewards(fit, rec.feature)[j]);
    }
    return spearman(planted, predicted);
}

}  // namespace

TEST_CASE("pairwise_accuracy anchors") {
    Rng rng(41);
    const auto pairs = random_pairs(rng, 500, 3);
    CHECK(pairwise_accuracy([](auto, auto) { return 1.0; }, pairs) == 0.5);

    PairStore marked{1, {}};
    for (int i = 0; i < 50; ++i) marked.records.push_back({{0.0}, {1.0}, {-1.0}});
    CHECK(pairwise_accuracy([](auto, auto r) { return r[0]; }, marked) == 1.0);
    CHECK(pairwise_accuracy([](auto, auto r) { return -r[0]; }, marked) == 0.0);

    const auto big = random_pairs(rng, 10000, 2);
    const double acc = pairwise_accuracy([](auto, auto r) { return r[0] + r[1]; }, big);
    CHECK(std::abs(acc - 0.5) <= 0.02);

    CHECK_THROWS_AS(pairwise_accuracy([](auto, auto) { return 0.0; }, PairStore{1, {}}), ValidationError);
    CHECK_THROWS_AS(pairwise_accuracy([](auto, auto) -> double { throw NumericalError("boom"); }, pairs),
                    NumericalError);
}

TEST_CASE("accuracy of a score and its negation sums to one") {
    Rng rng(42);
    const auto pairs = random_pairs(rng, 300, 4);
    auto f = [](std::span<const double> p, std::span<const double> r) { return p[0] * r[1] - r[2]; };
    const double a = pairwise_accuracy(f, pairs);
    const double b = pairwise_accuracy([&](auto p, auto r) { return -f(p, r); }, pairs);
    CHECK(a + b == 1.0);
}

TEST_CASE("weighted_score reproduces the quoted table rows") {
    CHECK(round_percent(100 * weighted_score(table_row({96.9, 76.8, 92.2, 97.3, 74.3}))) == 89.0);
    CHECK(round_percent(100 * weighted_score(table_row({99.4, 65.1, 87.8, 86.4, 74.9}))) == 83.6);
}

TEST_CASE("weighted_score properties") {
    CHECK(weighted_score(std::vector<CategoryResult>{{"x", 0.37, 4.0, 0}}) == 0.37);
    CHECK_THROWS_AS(weighted_score(std::vector<CategoryResult>{}), ValidationError);
    CHECK_THROWS_AS(weighted_score(std::vector<CategoryResult>{{"x", 0.3, 0.0, 0}}), ValidationError);
    Rng rng(43);
    for (int t = 0; t < 200; ++t) {
        std::vector<CategoryResult> cats;
        double lo = 1, hi = 0;
        for (std::size_t i = 0; i < 1 + rng.below(6); ++i) {
            cats.push_back({"c", rng.uniform(), rng.uniform(0.1, 3.0), 0});
            lo = std::min(lo, cats.back().accuracy);
            hi = std::max(hi, cats.back().accuracy);
        }
        const double s = weighted_score(cats);
        CHECK(s >= lo - 1e-15);
        CHECK(s <= hi + 1e-15);
        auto scaled = cats;
        for (auto& c : scaled) c.weight *= 7.25;
        CHECK(weighted_score(scaled) == doctest::Approx(s).epsilon(1e-14));
    }
}

TEST_CASE("round_percent is half-to-even") {
    CHECK(round_percent(89.04) == 89.0);
    CHECK(round_percent(84.2556) == 84.3);
    CHECK(round_percent(0.25) == 0.2);
    CHECK(round_percent(0.75) == 0.8);
}

TEST_CASE("report rendering") {
    const auto report = make_report("ArmoRM + MoE", table_row({96.9, 76.8, 92.2, 97.3, 74.3}));
    const auto table = report.to_table();
    CHECK(table.find("Prior Sets (0.5 weight)") != std::string::npos);
    CHECK(table.find("89.0") != std::string::npos);
    CHECK(report.to_json().find("\"overall\"") != std::string::npos);
}

TEST_CASE("decompose examples") {
    const auto net = GatingNetwork::initialized({3, 4, 2}, 1, 1.0);
    const auto profile = DebiasProfile::identity(2, 1);
    RewardHead zero(3, {"a", "verbosity"}, 0.0, std::vector<double>(6, 0.0));
    const std::vector<double> p{1, 2, 3}, r{4, 5, 6};
    const auto z = decompose(zero, profile, net, p, r);
    CHECK(z.scalar_score == 0.0);
    CHECK(z.raw_rewards == std::vector<double>{0, 0});
    CHECK(z.gating_coeffs[0] + z.gating_coeffs[1] == doctest::Approx(1.0));

    Rng rng(44);
    std::vector<double> w(6);
    for (auto& x : w) x = rng.normal();
    RewardHead head(3, {"a", "verbosity"}, 0.0, w);
    DebiasProfile prof = profile;
    prof.lambda = {0.3, 1.0};
    auto gated = GatingNetwork({3, 5, 2}, 1.0);
    for (auto& x : gated.parameters()) x = rng.uniform(-1, 1);
    const auto rep = decompose(head, prof, gated, p, r);
    double sum = 0;
    for (double c : rep.contributions) sum += c;
    CHECK(std::abs(sum - rep.scalar_score) <= 1e-10);
    const double direct = scalar_score(gate_forward(gated, p), adjust(predict_rewards(head, r), prof));
    CHECK(rep.scalar_score == direct);

    const std::vector<double> onehot{1, 0};
    const auto steered = decompose(head, prof, gated, p, r, std::span<const double>(onehot));
    CHECK(steered.scalar_score == steered.adjusted_rewards[0]);
    CHECK_THROWS_AS(decompose(head, prof, gated, std::vector<double>{1, 2}, r), ValidationError);
}

TEST_CASE("parse_steering") {
    const std::vector<std::string> names{"helpfulness", "safety", "verbosity"};
    CHECK(parse_steering("helpfulness=1.0", names) == std::vector<double>{1, 0, 0});
    CHECK(parse_steering("safety=3, helpfulness=1", names) == std::vector<double>{0.25, 0.75, 0});
    CHECK_THROWS_AS(parse_steering("honesty=1", names), ValidationError);
    CHECK_THROWS_AS(parse_steering("safety=-1", names), ValidationError);
    CHECK_THROWS_AS(parse_steering("safety=0", names), ValidationError);
    CHECK_THROWS_AS(parse_steering("safety", names), ValidationError);
}

TEST_CASE("simplex grid") {
    const auto g = simplex_grid(3, 0.5);
    CHECK(g.size() == 6);
    CHECK(simplex_grid(4, 0.05).size() == 1771);  // C(23,3)
    for (const auto& p : simplex_grid(4, 0.25)) {
        double s = 0;
        for (double x : p) s += x;
        CHECK(s == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(simplex_grid(3, 0.3), ValidationError);
}

TEST_CASE("synthetic data is deterministic per seed") {
    SyntheticSpec spec;
    spec.n_pairs = 200;
    spec.seed = 9;
    const auto a = gen_synthetic(spec);
    const auto b = gen_synthetic(spec);
    CHECK(encode_store(a.rated) == encode_store(b.rated));
    CHECK(encode_store(a.pairs) == encode_store(b.pairs));
    CHECK(a.planted_head == b.planted_head);
    spec.seed = 10;
    CHECK(encode_store(gen_synthetic(spec).pairs) != encode_store(a.pairs));
    CHECK(a.rated.objective_names.back() == "verbosity");
    CHECK(a.verbosity_index == spec.k - 1);
}

TEST_CASE("noise-free ratings let the head recover the planted ranking") {
    SyntheticSpec spec;
    spec.n_pairs = 100;
    // No intercept in the head, so σ's offset acts as regression noise; a large
    // sample keeps the direction estimate tight.
    spec.n_rated = 20000;
    spec.noise_scale = 0.0;
    spec.seed = 3;
    const auto data = gen_synthetic(spec);
    const auto head = fit_head(data.rated);
    for (std::size_t j = 0; j < spec.k; ++j) CHECK(spearman_planted_vs_fit(data, head, j) >= 0.99);
}

TEST_CASE("single-context rule is solved by a fixed one-hot") {
    SyntheticSpec spec;
    spec.n_pairs = 2000;
    spec.seed = 4;
    spec.context_rule = {0, 1, 1};
    const auto data = gen_synthetic(spec);
    CHECK(context_oracle_accuracy(data, data.pairs) == 1.0);
    const auto prepared = prepare_pairs(data.pairs, data.planted_head, DebiasProfile::identity(spec.k, 3));
    // Planted head is linear in w*; σ is monotone so the fixed one-hot ranks identically.
    std::vector<double> onehot(spec.k, 0.0);
    onehot[1] = 1.0;
    CHECK(fixed_weight_accuracy(onehot, prepared) >= 0.99);
}

TEST_CASE("two conflicting contexts defeat every fixed simplex weight") {
    SyntheticSpec spec;
    spec.n_pairs = 4000;
    spec.seed = 5;
    const auto data = gen_synthetic(spec);
    CHECK(context_oracle_accuracy(data, data.pairs) == 1.0);
    const auto prepared = prepare_pairs(data.pairs, data.planted_head, DebiasProfile::identity(spec.k, 3));
    const auto best = best_fixed_simplex(prepared, 0.05);
    CHECK(best.accuracy <= 0.85);
    double s = 0;
    for (double x : best.weights) s += x;
    CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("split_pairs holds out the tail") {
    Rng rng(45);
    const auto pairs = random_pairs(rng, 10, 2);
    const auto [train, held] = split_pairs(pairs, 0.25);
    CHECK(train.records.size() == 8);
    CHECK(held.records.size() == 2);
    CHECK(held.records[0].prompt == pairs.records[8].prompt);
    CHECK_THROWS_AS(split_pairs(pairs, 1.0), ValidationError);
}

TEST_CASE("synthetic spec validation") {
    SyntheticSpec spec;
    spec.k = 1;
    CHECK_THROWS_AS(gen_synthetic(spec), ValidationError);
    spec = {};
    spec.context_rule.coordinate = spec.d;
    CHECK_THROWS_AS(gen_synthetic(spec), ValidationError);
    spec = {};
    spec.n_pairs = 0;
    CHECK_THROWS_AS(gen_synthetic(spec), ValidationError);
}
