// Command line front end: synthesize data, evolve the ensemble, tune
// hyperparameters, and run the fused evaluation, stratification and
// attack reports. Every subcommand is driven by one config file plus an
// output directory; all randomness flows from the single master seed.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "automo/data.hpp"
#include "automo/hyperopt.hpp"
#include "automo/imia.hpp"
#include "automo/model_io.hpp"
#include "automo/pipeline.hpp"
#include "automo/robustness.hpp"
#include "automo/run_config.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace automo;

namespace {

struct CommonOpts {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App *sub, CommonOpts &opts) {
    sub->add_option("--config", opts.config, "run config file")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out, "output directory")->required();
    sub->add_option("--seed", opts.seed, "override the config seed");
}

RunConfig make_config(const CommonOpts &opts) {
    RunConfig cfg = opts.config.empty() ? RunConfig{} : load_run_config(opts.config);
    if (opts.seed) cfg.seed = *opts.seed;
    return cfg;
}

fs::path resolve(const fs::path &out_dir, const std::string &p) {
    const fs::path path(p);
    return path.is_absolute() ? path : out_dir / path;
}

Dataset load_split(const fs::path &out_dir, const std::string &manifest, int side,
                   Split split) {
    Dataset ds = load_manifest(resolve(out_dir, manifest), side, split);
    if (!ds.has_both_classes()) {
        throw std::runtime_error("dataset " + manifest + " must contain both classes");
    }
    return ds;
}

int run_synth(const CommonOpts &opts) {
    const RunConfig cfg = make_config(opts);
    const fs::path out_dir(opts.out);
    const Dataset train =
        synth_generate(cfg.synth_train, derive_seed(cfg.seed, stream::kSynth, 1), Split::train);
    const Dataset test =
        synth_generate(cfg.synth_test, derive_seed(cfg.seed, stream::kSynth, 2), Split::test);
    write_dataset(train, resolve(out_dir, cfg.train_manifest).parent_path());
    write_dataset(test, resolve(out_dir, cfg.test_manifest).parent_path());
    std::cout << "synth: wrote " << train.size() << " train and " << test.size()
              << " test samples under " << out_dir.string() << "\n";
    return 0;
}

int run_train(const CommonOpts &opts) {
    const RunConfig cfg = make_config(opts);
    const fs::path out_dir(opts.out);
    const Dataset train = load_split(out_dir, cfg.train_manifest, cfg.image_side, Split::train);

    const TrainOutputs result = train_pipeline(train, cfg);
    save_model_set(result.imia.front, result.weights, resolve(out_dir, cfg.model_set));
    write_trace_csv(out_dir / "imia_trace.csv", result.imia.trace);

    std::vector<EvalMetrics> front_metrics;
    for (const Candidate &cand : result.imia.front.models) front_metrics.push_back(cand.metrics);
    write_metrics_csv(out_dir / "front_metrics.csv", front_metrics);

    const auto &last = result.imia.trace.back();
    std::cout << "train: front of " << result.imia.front.size() << " models, best train auc "
              << format_metric(last.best_auc) << ", model set in "
              << resolve(out_dir, cfg.model_set).string() << "\n";
    return 0;
}

// Deterministic stratified holdout: shuffles each class separately and
// moves the requested fraction (at least one sample) to validation.
std::pair<Dataset, Dataset> split_holdout(const Dataset &all, double frac,
                                          std::uint64_t seed) {
    Dataset fit, holdout;
    fit.split = Split::train;
    holdout.split = Split::validation;
    for (int label : {kPositiveLabel, kNegativeLabel}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < all.samples.size(); ++i) {
            if (all.samples[i].label == label) idx.push_back(i);
        }
        if (idx.size() < 2) throw std::runtime_error("tune needs >= 2 samples per class");
        Rng rng(derive_seed(seed, stream::kTune, static_cast<std::uint64_t>(label)));
        for (std::size_t i = idx.size(); i-- > 1;) {
            std::swap(idx[i], idx[rng.uniform_int(0, static_cast<int>(i))]);
        }
        std::size_t n_val = static_cast<std::size_t>(frac * static_cast<double>(idx.size()));
        n_val = std::max<std::size_t>(1, std::min(n_val, idx.size() - 1));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i < n_val ? holdout : fit).samples.push_back(all.samples[idx[i]]);
        }
    }
    return {fit, holdout};
}

int run_tune(const CommonOpts &opts) {
    RunConfig cfg = make_config(opts);
    const fs::path out_dir(opts.out);
    const Dataset train = load_split(out_dir, cfg.train_manifest, cfg.image_side, Split::train);
    const auto [fit, holdout] = split_holdout(train, 0.2, cfg.seed);

    const auto objective = [&](double mp, double lambda) -> double {
        RunConfig trial = cfg;
        trial.imia.mutation_probability = mp;
        trial.fusion.lambda = lambda;
        try {
            const TrainOutputs t = train_pipeline(fit, trial);
            return evaluate_ensemble(t.imia.front, t.weights, holdout, trial.fusion,
                                     derive_seed(cfg.seed, stream::kTune, 0x5eed))
                .auc;
        } catch (const std::runtime_error &) {
            // a front with no balanced member is a bad trial, not a crash
            return 0.0;
        }
    };

    const BayesResult result = bayes_optimize(objective, BayesBounds{}, cfg.tune_budget,
                                              cfg.seed, cfg.tune_random_search);
    write_tune_csv(out_dir / "tune.csv", result.trials);
    std::cout << "tune: best mp " << format_metric(result.best.mp) << ", lambda "
              << format_metric(result.best.lambda) << ", holdout auc "
              << format_metric(result.best.objective) << " over "
              << result.trials.size() << " trials\n";
    return 0;
}

int run_evaluate(const CommonOpts &opts, bool json_summary) {
    const RunConfig cfg = make_config(opts);
    const fs::path out_dir(opts.out);
    const Dataset test = load_split(out_dir, cfg.test_manifest, cfg.image_side, Split::test);
    const LoadedModelSet models = load_model_set(resolve(out_dir, cfg.model_set));

    std::vector<EvalMetrics> repeats;
    std::vector<FusedOutcome> first_outcomes;
    for (int r = 0; r < cfg.evaluate_repeats; ++r) {
        std::vector<FusedOutcome> outcomes;
        repeats.push_back(evaluate_ensemble(
            models.set, models.weights, test, cfg.fusion,
            derive_seed(cfg.seed, stream::kEvaluate, static_cast<std::uint64_t>(r)),
            r == 0 ? &outcomes : nullptr));
        if (r == 0) first_outcomes = std::move(outcomes);
    }
    write_repeat_summary_csv(out_dir / "evaluate.csv", repeats);

    std::vector<std::string> ids;
    std::vector<int> labels;
    for (const Sample &s : test.samples) {
        ids.push_back(s.id);
        labels.push_back(s.label);
    }
    write_predictions_csv(out_dir / "predictions.csv", first_outcomes, ids, labels);

    const EvalMetrics mean = metrics_mean(repeats);
    const EvalMetrics sd = metrics_std(repeats);
    if (json_summary) {
        nlohmann::json j;
        auto fill = [](const EvalMetrics &m) {
            return nlohmann::json{{"sen", m.sen},
                                  {"spe", m.spe},
                                  {"auc", m.auc},
                                  {"acc", m.acc},
                                  {"balance", m.balance}};
        };
        j["repeats"] = nlohmann::json::array();
        for (const auto &r : repeats) j["repeats"].push_back(fill(r));
        j["mean"] = fill(mean);
        j["std"] = fill(sd);
        std::ofstream js(out_dir / "summary.json", std::ios::trunc);
        if (!js) throw std::runtime_error("cannot write summary.json");
        js << j.dump(2) << '\n';
    }
    std::cout << "evaluate: over " << cfg.evaluate_repeats << " repeats, sen "
              << format_metric(mean.sen) << "+-" << format_metric(sd.sen) << ", spe "
              << format_metric(mean.spe) << "+-" << format_metric(sd.spe) << ", auc "
              << format_metric(mean.auc) << "+-" << format_metric(sd.auc) << ", acc "
              << format_metric(mean.acc) << "+-" << format_metric(sd.acc) << ", balance "
              << format_metric(mean.balance) << "+-" << format_metric(sd.balance) << "\n";
    return 0;
}

int run_stratify(const CommonOpts &opts) {
    const RunConfig cfg = make_config(opts);
    const fs::path out_dir(opts.out);
    const Dataset test = load_split(out_dir, cfg.test_manifest, cfg.image_side, Split::test);
    const LoadedModelSet models = load_model_set(resolve(out_dir, cfg.model_set));

    std::vector<FusedOutcome> outcomes;
    evaluate_ensemble(models.set, models.weights, test, cfg.fusion,
                      derive_seed(cfg.seed, stream::kEvaluate, 0), &outcomes);
    std::vector<int> labels;
    for (const Sample &s : test.samples) labels.push_back(s.label);

    const auto rows = stratify_by_uncertainty(outcomes, labels);
    write_strata_csv(out_dir / "stratification.csv", rows);
    std::cout << "stratify: " << rows.size() << " cohorts, full-set acc "
              << format_metric(rows.front().acc) << ", lowest-uncertainty acc "
              << format_metric(rows.back().acc) << "\n";
    return 0;
}

int run_attack(const CommonOpts &opts) {
    const RunConfig cfg = make_config(opts);
    const fs::path out_dir(opts.out);
    const Dataset test = load_split(out_dir, cfg.test_manifest, cfg.image_side, Split::test);
    const LoadedModelSet models = load_model_set(resolve(out_dir, cfg.model_set));

    std::vector<std::vector<SweepRow>> per_seed;
    for (int r = 0; r < cfg.evaluate_repeats; ++r) {
        per_seed.push_back(robustness_sweep(
            models.set, models.weights, test, cfg.attack_epsilons, cfg.fusion,
            derive_seed(cfg.seed, stream::kAttackEval, static_cast<std::uint64_t>(r))));
        char name[40];
        std::snprintf(name, sizeof(name), "robustness_seed%d.csv", r);
        write_sweep_csv(out_dir / name, per_seed.back());
    }

    std::vector<SweepRow> mean_rows;
    for (std::size_t e = 0; e < cfg.attack_epsilons.size(); ++e) {
        double acc = 0.0;
        for (const auto &rows : per_seed) acc += rows[e].acc;
        mean_rows.push_back({cfg.attack_epsilons[e], acc / static_cast<double>(per_seed.size())});
    }
    write_sweep_csv(out_dir / "robustness.csv", mean_rows);
    std::cout << "attack: clean acc " << format_metric(mean_rows.front().acc)
              << ", acc at eps " << format_metric(mean_rows.back().epsilon) << " "
              << format_metric(mean_rows.back().acc) << " (mean of "
              << per_seed.size() << " seeds)\n";
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Pareto-optimal mixer ensembles with evidential fusion"};
    app.require_subcommand(1);

    CommonOpts synth_opts, train_opts, tune_opts, eval_opts, strat_opts, attack_opts;
    bool json_summary = false;

    add_common(app.add_subcommand("synth", "generate a synthetic dataset"), synth_opts);
    add_common(app.add_subcommand("train", "evolve the Pareto model set"), train_opts);
    add_common(app.add_subcommand("tune", "Bayesian search over mutation probability and lambda"),
               tune_opts);
    auto *eval_cmd = app.add_subcommand("evaluate", "fused test evaluation, repeated");
    add_common(eval_cmd, eval_opts);
    eval_cmd->add_flag("--json", json_summary, "also write summary.json");
    add_common(app.add_subcommand("stratify", "metrics by uncertainty cohort"), strat_opts);
    add_common(app.add_subcommand("attack", "gradient-sign robustness sweep"), attack_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    }

    try {
        const CLI::App *sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        CommonOpts *opts = nullptr;
        if (name == "synth") opts = &synth_opts;
        else if (name == "train") opts = &train_opts;
        else if (name == "tune") opts = &tune_opts;
        else if (name == "evaluate") opts = &eval_opts;
        else if (name == "stratify") opts = &strat_opts;
        else opts = &attack_opts;

        std::filesystem::create_directories(opts->out);
        if (name == "synth") return run_synth(*opts);
        if (name == "train") return run_train(*opts);
        if (name == "tune") return run_tune(*opts);
        if (name == "evaluate") return run_evaluate(*opts, json_summary);
        if (name == "stratify") return run_stratify(*opts);
        return run_attack(*opts);
    } catch (const std::exception &e) {
        std::cerr << "automo: " << e.what() << "\n";
        return 1;
    }
}
