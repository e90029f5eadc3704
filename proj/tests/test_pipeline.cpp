#include <doctest.h>

#include <json.hpp>

#include <fstream>

#include "armo/binary_io.hpp"
#include "armo/errors.hpp"
#include "armo/pipeline.hpp"
#include "test_util.hpp"

using namespace armo;
using nlohmann::json;

namespace {

struct Built {
    std::filesystem::path bundle;
    std::filesystem::path dir;
};

/// synth → fit → calibrate → train-gating with small sizes.
Built run_pipeline(const test::TempDir& dir, const std::string& tag, std::size_t steps = 60) {
    const auto out = dir.path() / tag;
    SynthOptions synth;
    synth.spec.n_pairs = 600;
    synth.spec.d = 8;
    synth.spec.k = 3;
    synth.spec.seed = 7;
    synth.out_dir = out;
    cmd_synth(synth);
    cmd_fit(out / "rated.afs", kDefaultRidge, out / "head.ahd");
    CalibrateOptions cal;
    cal.store_path = out / "rated.afs";
    cal.head_path = out / "head.ahd";
    cal.out_path = out / "profile.json";
    cmd_calibrate(cal);
    TrainOptions train;
    train.pairs_path = out / "pairs_train.afs";
    train.heldout_path = out / "pairs_heldout.afs";
    train.head_path = out / "head.ahd";
    train.profile_path = out / "profile.json";
    train.hidden = {16, 16};
    train.beta_init = 10.0;
    train.train.steps = steps;
    train.train.batch_size = 64;
    train.train.learning_rate = 1e-2;
    train.train.seed = 3;
    train.out_path = out / "model.abn";
    cmd_train(train);
    return {out / "model.abn", out};
}

}  // namespace

TEST_CASE("pipeline commands produce consistent, reproducible artifacts") {
    test::TempDir dir("pipe");
    const auto a = run_pipeline(dir, "a");
    const auto b = run_pipeline(dir, "b");
    CHECK(io::read_file(a.bundle) == io::read_file(b.bundle));

    const auto bundle = read_bundle(a.bundle);
    CHECK(bundle.head.d() == 8);
    CHECK(bundle.gate.layer_dims() == std::vector<std::size_t>{8, 16, 16, 3});
    const auto meta = json::parse(bundle.metadata);
    CHECK(meta["train_config"]["steps"] == 60);
    CHECK(meta.contains("head_digest"));
    CHECK(encode_bundle(decode_bundle(io::read_file(a.bundle))) == io::read_file(a.bundle));
}

TEST_CASE("score with steering equals the adjusted reward and leaves the bundle untouched") {
    test::TempDir dir("score");
    const auto built = run_pipeline(dir, "s", 10);
    const auto before = io::read_file(built.bundle);
    const auto bundle = read_bundle(built.bundle);
    const auto first = bundle.head.objective_names().front();

    ScoreOptions opt;
    opt.bundle_path = built.bundle;
    opt.pairs_path = built.dir / "pairs_heldout.afs";
    opt.index = 2;
    opt.steer = first + "=1.0";
    const auto steered = json::parse(cmd_score(opt));
    CHECK(steered["steered"] == true);
    CHECK(steered["chosen"]["scalar_score"].get<double>() ==
          steered["chosen"]["adjusted_rewards"][0].get<double>());
    CHECK(io::read_file(built.bundle) == before);

    opt.steer.reset();
    const auto plain = json::parse(cmd_score(opt));
    const auto coeffs = plain["chosen"]["gating_coeffs"].get<std::vector<double>>();
    double s = 0;
    for (double c : coeffs) s += c;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));

    opt.index = 100000;
    CHECK_THROWS_AS(cmd_score(opt), ValidationError);
}

TEST_CASE("bundle validation names the mismatched dimension") {
    RewardHead head(4, {"a", "b", "verbosity"}, 0.0, std::vector<double>(12, 0.0));
    const auto profile = DebiasProfile::identity(3, 2);
    CHECK_NOTHROW(validate_components(head, profile, GatingNetwork({4, 3})));
    CHECK_THROWS_WITH_AS(validate_components(head, profile, GatingNetwork({5, 3})), doctest::Contains("d"),
                         ValidationError);
    CHECK_THROWS_WITH_AS(validate_components(head, profile, GatingNetwork({4, 2})), doctest::Contains("k"),
                         ValidationError);
    CHECK_THROWS_AS(validate_components(head, DebiasProfile::identity(2, 1), GatingNetwork({4, 3})),
                    ValidationError);

    ModelBundle bad{head, profile, GatingNetwork({4, 2}), "{}"};
    CHECK_THROWS_AS(encode_bundle(bad), ValidationError);
    ModelBundle good{head, profile, GatingNetwork({4, 3}), "{}"};
    auto bytes = encode_bundle(good);
    CHECK(decode_bundle(bytes).gate == good.gate);
    bytes.resize(bytes.size() - 1);
    CHECK_THROWS_AS(decode_bundle(bytes), FormatError);
}

TEST_CASE("eval manifest with precomputed accuracies reproduces the headline score") {
    test::TempDir dir("eval");
    std::ofstream(dir / "m.json") << (R"({"categories": [
        {"name": "Chat", "weight": 1.0, "accuracy": 0.969},
        {"name": "Chat Hard", "weight": 1.0, "accuracy": 0.768},
        {"name": "Safety", "weight": 1.0, "accuracy": 0.922},
        {"name": "Reasoning", "weight": 1.0, "accuracy": 0.973},
        {"name": "Prior Sets", "weight": 0.5, "accuracy": 0.743}]})");
    EvalOptions opt;
    opt.manifest_path = dir / "m.json";
    std::string table;
    const auto summary = json::parse(cmd_eval(opt, &table));
    CHECK(summary["report"]["overall_pct"].get<double>() == 89.0);
    CHECK(table.find("89.0") != std::string::npos);

    CHECK_THROWS_AS(parse_eval_manifest(R"({"categories": []})", dir.path()), ValidationError);
    CHECK_THROWS_AS(parse_eval_manifest(R"({"categories": [{"name": "x", "weight": 1}]})", dir.path()),
                    ValidationError);
    CHECK_THROWS_AS(parse_eval_manifest(R"({"categories": [{"name": "x", "weight": -1, "accuracy": 0.5}]})",
                                        dir.path()),
                    ValidationError);
    CHECK_THROWS_AS(parse_eval_manifest("not json", dir.path()), ValidationError);
}

TEST_CASE("eval over synthetic held-out categories") {
    test::TempDir dir("evalsyn");
    const auto built = run_pipeline(dir, "e", 150);
    EvalOptions opt;
    opt.manifest_path = built.dir / "eval_manifest.json";
    opt.bundle_path = built.bundle;
    const auto summary = json::parse(cmd_eval(opt));
    const auto cats = summary["report"]["categories"];
    CHECK(cats.size() == 2);
    CHECK(summary["report"]["overall"].get<double>() > 0.5);
    opt.bundle_path.reset();
    CHECK_THROWS_AS(cmd_eval(opt), ValidationError);
}
