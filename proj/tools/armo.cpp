// armo: command-line front end for the multi-objective reward model pipeline.
//
//   armo synth         planted synthetic stores for desk-scale checks
//   armo ingest        JSON-lines records + manifest -> AFS1 store
//   armo fit           rated store -> regression head (AHD1)
//   armo calibrate     head + reference store -> verbosity debias profile (JSON)
//   armo train-gating  pairs + head + profile -> model bundle (ABN1)
//   armo score         per-objective decomposition of one response
//   armo eval          weighted category accuracy report

#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "armo/binary_io.hpp"
#include "armo/errors.hpp"
#include "armo/kernels.hpp"
#include "armo/pipeline.hpp"

namespace {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kIo = 2, kValidation = 2, kNumerical = 3 };

nlohmann::json load_config(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    const auto bytes = armo::io::read_file(path);
    try {
        auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
        if (!j.is_object()) throw armo::ValidationError("config file must hold a JSON object");
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw armo::ValidationError("config file " + path + ": " + e.what());
    }
}

// CLI flag > config file > built-in default.
template <typename T>
void from_config(const CLI::Option* flag, T& value, const nlohmann::json& config, const char* key) {
    if (flag->count() > 0 || !config.contains(key)) return;
    try {
        value = config.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw armo::ValidationError(std::string("config key '") + key + "': " + e.what());
    }
}

std::vector<double> parse_vector(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw armo::ValidationError(std::string("bad number '") + item + "' in " + what);
        }
    }
    return out;
}

std::vector<std::size_t> parse_hidden(const std::string& text) {
    std::vector<std::size_t> out;
    for (double x : parse_vector(text, "--hidden")) {
        if (!(x >= 1.0) || x != std::floor(x)) throw armo::ValidationError("--hidden entries must be positive integers");
        out.push_back(static_cast<std::size_t>(x));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-objective reward model with verbosity debiasing and MoE gating"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (CLI flags take precedence)");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate planted synthetic stores");
    armo::SynthOptions synth_opt;
    std::string synth_out;
    synth->add_option("--out-dir", synth_out, "Output directory")->required();
    synth->add_option("--seed", synth_opt.spec.seed, "RNG seed")->capture_default_str();
    synth->add_option("--n-pairs", synth_opt.spec.n_pairs, "Number of preference pairs")->capture_default_str();
    synth->add_option("--n-rated", synth_opt.spec.n_rated, "Rated records (0 = n-pairs)")->capture_default_str();
    synth->add_option("--d", synth_opt.spec.d, "Feature dimension")->capture_default_str();
    synth->add_option("--k", synth_opt.spec.k, "Objective count")->capture_default_str();
    synth->add_option("--noise", synth_opt.spec.noise_scale, "Rating noise scale")->capture_default_str();
    synth->add_option("--conflict", synth_opt.spec.conflict, "Anti-correlation of the two context objectives")
        ->capture_default_str();
    synth->add_option("--heldout", synth_opt.heldout_fraction, "Held-out fraction of pairs")->capture_default_str();

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Normalize and merge rated records, or pack pairs");
    std::string ingest_records, ingest_manifest, ingest_pairs, ingest_out;
    auto* records_opt = ingest->add_option("--records", ingest_records, "Rated records (JSON lines)");
    auto* manifest_opt = ingest->add_option("--manifest", ingest_manifest, "Dataset manifest (JSON lines)");
    auto* pairs_opt = ingest->add_option("--pairs", ingest_pairs, "Pair records (JSON lines)");
    records_opt->needs(manifest_opt);
    manifest_opt->needs(records_opt);
    pairs_opt->excludes(records_opt);
    ingest->add_option("--out", ingest_out, "Output AFS1 store")->required();

    // fit
    auto* fit = app.add_subcommand("fit", "Fit the regression head on a rated store");
    std::string fit_store, fit_out;
    double ridge = armo::kDefaultRidge;
    fit->add_option("--store", fit_store, "Rated AFS1 store")->required();
    auto* ridge_opt = fit->add_option("--ridge", ridge, "Ridge strength")->capture_default_str();
    fit->add_option("--out", fit_out, "Output head (AHD1)")->required();

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "Compute verbosity penalties on a reference store");
    armo::CalibrateOptions cal_opt;
    std::string cal_store, cal_head, cal_out, metric = "spearman";
    cal->add_option("--store", cal_store, "Reference rated store")->required();
    cal->add_option("--head", cal_head, "Regression head")->required();
    cal->add_option("--verbosity", cal_opt.verbosity, "Verbosity objective (name or index)")->capture_default_str();
    auto* metric_opt = cal->add_option("--metric", metric, "spearman | pearson")->capture_default_str();
    auto* tol_opt = cal->add_option("--tol", cal_opt.calibration.tol, "Target |correlation|")->capture_default_str();
    auto* bracket_opt =
        cal->add_option("--bracket-max", cal_opt.calibration.bracket_max, "Initial lambda bracket")->capture_default_str();
    cal->add_option("--reference-id", cal_opt.reference_id, "Name recorded for the reference set");
    cal->add_option("--out", cal_out, "Output profile (JSON)")->required();

    // train-gating
    auto* train = app.add_subcommand("train-gating", "Train the gating network with Bradley-Terry loss");
    armo::TrainOptions train_opt;
    std::string train_pairs, train_heldout, train_head, train_profile, train_out, train_history, train_gate;
    std::string hidden = "1024,1024,1024";
    train->add_option("--pairs", train_pairs, "Training pair store")->required();
    train->add_option("--heldout", train_heldout, "Held-out pair store for final accuracy");
    train->add_option("--head", train_head, "Regression head")->required();
    train->add_option("--profile", train_profile, "Debias profile")->required();
    auto* lr_opt = train->add_option("--lr", train_opt.train.learning_rate, "Learning rate")->capture_default_str();
    auto* steps_opt = train->add_option("--steps", train_opt.train.steps, "Optimizer steps")->capture_default_str();
    auto* batch_opt = train->add_option("--batch", train_opt.train.batch_size, "Batch size")->capture_default_str();
    auto* beta_opt = train->add_option("--beta-init", train_opt.beta_init, "Initial beta")->capture_default_str();
    auto* wd_opt =
        train->add_option("--weight-decay", train_opt.train.weight_decay, "AdamW weight decay")->capture_default_str();
    auto* hidden_opt = train->add_option("--hidden", hidden, "Hidden layer widths")->capture_default_str();
    auto* seed_opt = train->add_option("--seed", train_opt.train.seed, "Init and sampling seed")->capture_default_str();
    train->add_option("--out", train_out, "Output model bundle (ABN1)")->required();
    train->add_option("--history", train_history, "Write per-step history CSV");
    train->add_option("--gate-out", train_gate, "Also write the gate alone (AGT1)");

    // score
    auto* score = app.add_subcommand("score", "Decompose the score of a response");
    armo::ScoreOptions score_opt;
    std::string score_bundle, score_pairs, score_prompt, score_response, score_steer;
    score->add_option("--bundle", score_bundle, "Model bundle")->required();
    auto* spairs = score->add_option("--pairs", score_pairs, "Pair store to read features from");
    score->add_option("--index", score_opt.index, "Pair index")->needs(spairs);
    auto* sprompt = score->add_option("--prompt", score_prompt, "Prompt feature, comma separated");
    auto* sresp = score->add_option("--response", score_response, "Response feature, comma separated");
    sprompt->needs(sresp);
    sresp->needs(sprompt);
    spairs->excludes(sprompt);
    score->add_option("--steer", score_steer, "objective=weight[,...] fixed coefficients");

    // eval
    auto* eval = app.add_subcommand("eval", "Weighted category accuracy");
    armo::EvalOptions eval_opt;
    std::string eval_manifest, eval_bundle, eval_steer, eval_report;
    eval->add_option("--manifest", eval_manifest, "Evaluation manifest (JSON)")->required();
    eval->add_option("--bundle", eval_bundle, "Model bundle");
    eval->add_option("--steer", eval_steer, "objective=weight[,...] fixed coefficients");
    eval->add_option("--report", eval_report, "Write the JSON report here");
    eval->add_option("--label", eval_opt.model_label, "Model label in the table")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        armo::kernels::configure_threads_from_env();
        const auto config = load_config(config_path);
        std::string summary;

        if (*synth) {
            synth_opt.out_dir = synth_out;
            summary = armo::cmd_synth(synth_opt);
        } else if (*ingest) {
            if (!ingest_pairs.empty()) {
                summary = armo::cmd_ingest_pairs(ingest_pairs, ingest_out);
            } else if (!ingest_records.empty()) {
                summary = armo::cmd_ingest(ingest_records, ingest_manifest, ingest_out);
            } else {
                throw armo::ValidationError("ingest needs --records with --manifest, or --pairs");
            }
        } else if (*fit) {
            from_config(ridge_opt, ridge, config, "ridge");
            summary = armo::cmd_fit(fit_store, ridge, fit_out);
        } else if (*cal) {
            from_config(metric_opt, metric, config, "metric");
            from_config(tol_opt, cal_opt.calibration.tol, config, "tol");
            from_config(bracket_opt, cal_opt.calibration.bracket_max, config, "bracket_max");
            cal_opt.calibration.metric = armo::parse_metric(metric);
            cal_opt.store_path = cal_store;
            cal_opt.head_path = cal_head;
            cal_opt.out_path = cal_out;
            summary = armo::cmd_calibrate(cal_opt);
        } else if (*train) {
            from_config(lr_opt, train_opt.train.learning_rate, config, "lr");
            from_config(steps_opt, train_opt.train.steps, config, "steps");
            from_config(batch_opt, train_opt.train.batch_size, config, "batch");
            from_config(beta_opt, train_opt.beta_init, config, "beta_init");
            from_config(wd_opt, train_opt.train.weight_decay, config, "weight_decay");
            if (hidden_opt->count() == 0 && config.contains("hidden") && config["hidden"].is_array()) {
                // Also accept a JSON array of widths.
                hidden.clear();
                for (const auto& w : config["hidden"]) hidden += (hidden.empty() ? "" : ",") + w.dump();
            } else {
                from_config(hidden_opt, hidden, config, "hidden");
            }
            from_config(seed_opt, train_opt.train.seed, config, "seed");
            train_opt.hidden = parse_hidden(hidden);
            train_opt.pairs_path = train_pairs;
            if (!train_heldout.empty()) train_opt.heldout_path = train_heldout;
            train_opt.head_path = train_head;
            train_opt.profile_path = train_profile;
            train_opt.out_path = train_out;
            if (!train_history.empty()) train_opt.history_path = train_history;
            if (!train_gate.empty()) train_opt.gate_path = train_gate;
            summary = armo::cmd_train(train_opt);
        } else if (*score) {
            score_opt.bundle_path = score_bundle;
            if (!score_pairs.empty()) {
                score_opt.pairs_path = score_pairs;
            } else if (!score_prompt.empty()) {
                score_opt.prompt = parse_vector(score_prompt, "--prompt");
                score_opt.response = parse_vector(score_response, "--response");
            } else {
                throw armo::ValidationError("score needs --pairs/--index or --prompt/--response");
            }
            if (!score_steer.empty()) score_opt.steer = score_steer;
            summary = armo::cmd_score(score_opt);
        } else if (*eval) {
            eval_opt.manifest_path = eval_manifest;
            if (!eval_bundle.empty()) eval_opt.bundle_path = eval_bundle;
            if (!eval_steer.empty()) eval_opt.steer = eval_steer;
            if (!eval_report.empty()) eval_opt.report_path = eval_report;
            std::string table;
            summary = armo::cmd_eval(eval_opt, &table);
            std::cerr << table;
        }
        std::cout << summary << '\n';
        return kOk;
    } catch (const armo::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const armo::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const armo::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
