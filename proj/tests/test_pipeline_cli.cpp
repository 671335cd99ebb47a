#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "automo/data.hpp"
#include "automo/metrics.hpp"
#include "automo/pipeline.hpp"
#include "automo/run_config.hpp"
#include "json.hpp"

using namespace automo;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string &tag) {
    const fs::path dir = fs::temp_directory_path() / ("automo_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_text(const fs::path &file) {
    std::ifstream in(file, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const fs::path &file, const std::string &text) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    REQUIRE(out.good());
    out << text;
}

std::vector<std::string> lines_of(const std::string &text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

std::vector<std::string> cells_of(const std::string &line) {
    std::vector<std::string> cells;
    std::istringstream in(line);
    std::string cell;
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    return cells;
}

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

// Runs the installed binary through the shell so exit codes and both streams
// can be asserted exactly as an operator would see them.
CliResult run_cli(const std::string &args) {
    const char *bin = std::getenv("AUTOMO_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "AUTOMO_BIN must point at the command line binary");
    static int invocation = 0;
    const fs::path cap = temp_dir("capture_" + std::to_string(++invocation));
    const fs::path out_file = cap / "out.txt";
    const fs::path err_file = cap / "err.txt";
    const std::string cmd = "\"" + std::string(bin) + "\" " + args + " >\"" +
                            out_file.string() + "\" 2>\"" + err_file.string() + "\"";
    const int status = std::system(cmd.c_str());
    CliResult r;
    if (WIFEXITED(status)) r.code = WEXITSTATUS(status);
    r.out = read_text(out_file);
    r.err = read_text(err_file);
    fs::remove_all(cap);
    return r;
}

// Small enough that a full synth/train/tune/evaluate/stratify/attack pass
// takes well under a second.
const char *kMicroConfig =
    "[run]\n"
    "seed = 7\n"
    "[model]\n"
    "image_side = 14\n"
    "patch_size = 7\n"
    "[grid]\n"
    "layers = 1\n"
    "hidden = 8\n"
    "token_hidden = 8\n"
    "channel_hidden = 16\n"
    "[imia]\n"
    "population = 4\n"
    "iterations = 2\n"
    "[fusion]\n"
    "tta_rounds = 2\n"
    "[attack]\n"
    "epsilons = 0, 0.05\n"
    "[tune]\n"
    "budget = 2\n"
    "[evaluate]\n"
    "repeats = 2\n"
    "[synth]\n"
    "train_per_class = 8\n"
    "test_per_class = 6\n"
    "imbalance_ratio = 1\n"
    "noise_sigma = 0.05\n";

fs::path write_micro_config(const fs::path &dir) {
    const fs::path file = dir / "micro.cfg";
    write_text(file, kMicroConfig);
    return file;
}

RunConfig micro_run_config() { return parse_run_config(kMicroConfig, "micro"); }

Dataset micro_train_set() {
    RunConfig cfg = micro_run_config();
    return synth_generate(cfg.synth_train, derive_seed(cfg.seed, stream::kSynth, 1),
                          Split::train);
}

}  // namespace

TEST_CASE("metric cells use six decimals and spell missing values NA") {
    CHECK(format_metric(0.5) == "0.500000");
    CHECK(format_metric(0.0) == "0.000000");
    CHECK(format_metric(1.0) == "1.000000");
    CHECK(format_metric(1.0 / 3.0) == "0.333333");
    CHECK(format_metric(0.0000004) == "0.000000");
    CHECK(format_metric(std::numeric_limits<double>::quiet_NaN()) == "NA");
}

TEST_CASE("repeat statistics aggregate componentwise") {
    const std::vector<EvalMetrics> rows = {
        {1.0, 0.0, 0.5, 0.25, 0.8},
        {0.0, 1.0, 0.7, 0.75, 0.4},
    };
    const EvalMetrics mean = metrics_mean(rows);
    CHECK(mean.sen == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mean.spe == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mean.auc == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(mean.acc == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mean.balance == doctest::Approx(0.6).epsilon(1e-12));

    // population standard deviation: half the spread for two points
    const EvalMetrics sd = metrics_std(rows);
    CHECK(sd.sen == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(sd.spe == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(sd.auc == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(sd.acc == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(sd.balance == doctest::Approx(0.2).epsilon(1e-12));

    const EvalMetrics single = metrics_std(std::vector<EvalMetrics>{rows[0]});
    CHECK(single.sen == 0.0);
    CHECK(single.balance == 0.0);

    CHECK_THROWS_AS(metrics_mean(std::vector<EvalMetrics>{}), std::invalid_argument);
    CHECK_THROWS_AS(metrics_std(std::vector<EvalMetrics>{}), std::invalid_argument);
}

TEST_CASE("train pipeline pairs every front model with a normalized weight") {
    const RunConfig cfg = micro_run_config();
    const Dataset train = micro_train_set();

    const TrainOutputs a = train_pipeline(train, cfg);
    REQUIRE(a.imia.front.size() >= 1);
    REQUIRE(a.weights.size() == a.imia.front.size());

    double total = 0.0;
    for (double w : a.weights) {
        CHECK(w >= 0.0);
        total += w;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    // weights are the balance-aware scores of the front, renormalized
    std::vector<double> raw;
    for (const Candidate &cand : a.imia.front.models) {
        raw.push_back(model_weight(cand.metrics, cfg.fusion.lambda));
    }
    const std::vector<double> expect = normalize_weights(raw);
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(a.weights[i] == expect[i]);

    const TrainOutputs b = train_pipeline(train, cfg);
    REQUIRE(b.imia.front.size() == a.imia.front.size());
    for (std::size_t m = 0; m < a.imia.front.size(); ++m) {
        CHECK(a.imia.front.models[m].params.values == b.imia.front.models[m].params.values);
    }
    CHECK(a.weights == b.weights);
}

TEST_CASE("ensemble evaluation exports outcomes in dataset order") {
    const RunConfig cfg = micro_run_config();
    const Dataset train = micro_train_set();
    const Dataset test = synth_generate(cfg.synth_test,
                                        derive_seed(cfg.seed, stream::kSynth, 2), Split::test);
    const TrainOutputs trained = train_pipeline(train, cfg);

    std::vector<FusedOutcome> outcomes;
    const EvalMetrics metrics = evaluate_ensemble(trained.imia.front, trained.weights, test,
                                                  cfg.fusion, 42, &outcomes);
    REQUIRE(outcomes.size() == test.samples.size());

    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const FusedOutcome &o = outcomes[i];
        CHECK(o.p_fin1 + o.p_fin2 + o.u_fin == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(o.score == doctest::Approx(o.p_fin1 / (o.p_fin1 + o.p_fin2)).epsilon(1e-12));
        scores.push_back(o.score);
        labels.push_back(test.samples[i].label);
    }

    const EvalMetrics direct = eval_metrics(scores, labels, 0.5);
    CHECK(metrics.sen == direct.sen);
    CHECK(metrics.spe == direct.spe);
    CHECK(metrics.auc == direct.auc);
    CHECK(metrics.acc == direct.acc);

    std::vector<FusedOutcome> again;
    evaluate_ensemble(trained.imia.front, trained.weights, test, cfg.fusion, 42, &again);
    REQUIRE(again.size() == outcomes.size());
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        CHECK(again[i].p_fin1 == outcomes[i].p_fin1);
        CHECK(again[i].u_fin == outcomes[i].u_fin);
    }

    Dataset empty;
    CHECK_THROWS_AS(evaluate_ensemble(trained.imia.front, trained.weights, empty, cfg.fusion, 1),
                    std::invalid_argument);
}

TEST_CASE("report writers emit headers and six-decimal rows") {
    const fs::path dir = temp_dir("writers");

    SUBCASE("metrics table renders NaN cells as NA") {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        const std::vector<EvalMetrics> rows = {{0.5, nan, 1.0, 0.25, 0.125}};
        write_metrics_csv(dir / "m.csv", rows);
        const auto lines = lines_of(read_text(dir / "m.csv"));
        REQUIRE(lines.size() == 2);
        CHECK(lines[0] == "sen,spe,auc,acc,balance");
        CHECK(lines[1] == "0.500000,NA,1.000000,0.250000,0.125000");
    }

    SUBCASE("repeat summary appends mean and std rows") {
        const std::vector<EvalMetrics> repeats = {
            {0.5, 0.5, 0.5, 0.5, 0.5},
            {1.0, 0.0, 0.7, 0.9, 0.1},
            {0.0, 1.0, 0.9, 0.1, 0.9},
        };
        write_repeat_summary_csv(dir / "r.csv", repeats);
        const auto lines = lines_of(read_text(dir / "r.csv"));
        REQUIRE(lines.size() == 6);
        CHECK(lines[0] == "repeat,sen,spe,auc,acc,balance");
        CHECK(cells_of(lines[1])[0] == "0");
        CHECK(cells_of(lines[2])[0] == "1");
        CHECK(cells_of(lines[3])[0] == "2");
        CHECK(lines[4] == "mean,0.500000,0.500000,0.700000,0.500000,0.500000");
        const EvalMetrics sd = metrics_std(repeats);
        CHECK(cells_of(lines[5])[0] == "std");
        CHECK(cells_of(lines[5])[1] == format_metric(sd.sen));
        CHECK(cells_of(lines[5])[3] == format_metric(sd.auc));
        CHECK_THROWS_AS(write_repeat_summary_csv(dir / "x.csv", std::vector<EvalMetrics>{}),
                        std::invalid_argument);
    }

    SUBCASE("prediction dump requires aligned columns") {
        const std::vector<FusedOutcome> outcomes = {{0.75, 0.15, 0.10, 1, 0.8333333333333334}};
        const std::vector<std::string> ids = {"a"};
        const std::vector<int> labels = {1};
        write_predictions_csv(dir / "p.csv", outcomes, ids, labels);
        const auto lines = lines_of(read_text(dir / "p.csv"));
        REQUIRE(lines.size() == 2);
        CHECK(lines[0] == "sample_id,p_fin1,p_fin2,u_fin,decision,label");
        CHECK(lines[1] == "a,0.750000,0.150000,0.100000,1,1");
        const std::vector<int> short_labels = {};
        CHECK_THROWS_AS(write_predictions_csv(dir / "q.csv", outcomes, ids, short_labels),
                        std::invalid_argument);
    }

    SUBCASE("trace, tune, strata and sweep tables carry their headers") {
        const std::vector<IterationTrace> trace = {{0, 4, 0.5, 0.5, 0.5, 2, {}}};
        write_trace_csv(dir / "t.csv", trace);
        auto lines = lines_of(read_text(dir / "t.csv"));
        REQUIRE(lines.size() == 2);
        CHECK(lines[0] == "iter,pop_size,best_sen,best_spe,best_auc,front_size");
        CHECK(lines[1] == "0,4,0.500000,0.500000,0.500000,2");

        const std::vector<HyperPoint> trials = {{0.3, 0.7, 0.25}, {0.1, 0.2, 0.5}};
        write_tune_csv(dir / "h.csv", trials);
        lines = lines_of(read_text(dir / "h.csv"));
        REQUIRE(lines.size() == 3);
        CHECK(lines[0] == "trial,mp,lambda,objective");
        CHECK(lines[1] == "0,0.300000,0.700000,0.250000");
        CHECK(lines[2] == "1,0.100000,0.200000,0.500000");

        const double nan = std::numeric_limits<double>::quiet_NaN();
        const std::vector<StratumRow> strata = {{0.4, 4, 0.5, nan, nan, 0.75}};
        write_strata_csv(dir / "s.csv", strata);
        lines = lines_of(read_text(dir / "s.csv"));
        REQUIRE(lines.size() == 2);
        CHECK(lines[0] == "uncertainty,SEN,SPE,AUC,ACC");
        CHECK(lines[1] == "0.400000,0.500000,NA,NA,0.750000");

        const std::vector<SweepRow> sweep = {{0.0, 1.0}, {0.05, 0.875}};
        write_sweep_csv(dir / "w.csv", sweep);
        lines = lines_of(read_text(dir / "w.csv"));
        REQUIRE(lines.size() == 3);
        CHECK(lines[0] == "epsilon,acc");
        CHECK(lines[1] == "0.000000,1.000000");
        CHECK(lines[2] == "0.050000,0.875000");
    }

    fs::remove_all(dir);
}

TEST_CASE("unknown subcommand exits 2 and prints usage") {
    const CliResult r = run_cli("frobnicate");
    CHECK(r.code == 2);
    CHECK(r.out.empty());
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(r.err.find("synth") != std::string::npos);
    CHECK(r.err.find("evaluate") != std::string::npos);

    const CliResult none = run_cli("");
    CHECK(none.code == 2);
    CHECK(none.err.find("Usage") != std::string::npos);
}

TEST_CASE("argument errors exit 2 before any work happens") {
    const CliResult no_out = run_cli("synth");
    CHECK(no_out.code == 2);
    CHECK(no_out.err.find("--out") != std::string::npos);

    const fs::path dir = temp_dir("args");
    const CliResult no_cfg =
        run_cli("train --config " + (dir / "absent.cfg").string() + " --out " + dir.string());
    CHECK(no_cfg.code == 2);
    fs::remove_all(dir);
}

TEST_CASE("config and data failures exit 1 with a one-line diagnostic") {
    const fs::path dir = temp_dir("diag");
    write_text(dir / "bad.cfg", "[imia]\npop = 4\n");

    const CliResult bad = run_cli("train --config " + (dir / "bad.cfg").string() + " --out " +
                                  (dir / "out").string());
    CHECK(bad.code == 1);
    CHECK(bad.err.rfind("automo: ", 0) == 0);
    CHECK(bad.err.find("unknown key 'pop'") != std::string::npos);
    CHECK(std::count(bad.err.begin(), bad.err.end(), '\n') == 1);

    // structurally valid config, but no dataset was synthesized
    const fs::path cfg = write_micro_config(dir);
    const CliResult no_data =
        run_cli("train --config " + cfg.string() + " --out " + (dir / "empty").string());
    CHECK(no_data.code == 1);
    CHECK(no_data.err.rfind("automo: ", 0) == 0);
    CHECK(std::count(no_data.err.begin(), no_data.err.end(), '\n') == 1);

    fs::remove_all(dir);
}

TEST_CASE("synth, train, tune and evaluate chain into the full report set") {
    const fs::path dir = temp_dir("pipeline");
    const fs::path cfg = write_micro_config(dir);
    const fs::path out = dir / "run";
    const std::string common = " --config " + cfg.string() + " --out " + out.string();

    const CliResult synth = run_cli("synth" + common);
    REQUIRE(synth.code == 0);
    CHECK(synth.out.find("synth: wrote 16 train and 12 test samples") != std::string::npos);
    CHECK(fs::exists(out / "data/train/manifest.csv"));
    CHECK(fs::exists(out / "data/test/manifest.csv"));

    const CliResult train = run_cli("train" + common);
    REQUIRE(train.code == 0);
    CHECK(train.out.find("train: front of") != std::string::npos);
    CHECK(fs::exists(out / "model_set/manifest.json"));

    auto trace = lines_of(read_text(out / "imia_trace.csv"));
    REQUIRE(trace.size() == 4);  // init row plus two iterations
    CHECK(trace[0] == "iter,pop_size,best_sen,best_spe,best_auc,front_size");
    CHECK(cells_of(trace[1])[0] == "0");
    CHECK(cells_of(trace[3])[0] == "2");
    const auto front_metrics = lines_of(read_text(out / "front_metrics.csv"));
    REQUIRE(front_metrics.size() >= 2);
    CHECK(front_metrics[0] == "sen,spe,auc,acc,balance");

    const CliResult tune = run_cli("tune" + common);
    REQUIRE(tune.code == 0);
    CHECK(tune.out.find("tune: best mp") != std::string::npos);
    const auto tune_rows = lines_of(read_text(out / "tune.csv"));
    REQUIRE(tune_rows.size() == 3);  // budget 2
    CHECK(tune_rows[0] == "trial,mp,lambda,objective");

    const CliResult eval = run_cli("evaluate --json" + common);
    REQUIRE(eval.code == 0);
    CHECK(eval.out.find("evaluate: over 2 repeats") != std::string::npos);

    const auto summary = lines_of(read_text(out / "evaluate.csv"));
    REQUIRE(summary.size() == 5);  // 2 repeats, mean, std
    CHECK(summary[0] == "repeat,sen,spe,auc,acc,balance");
    CHECK(cells_of(summary[1])[0] == "0");
    CHECK(cells_of(summary[2])[0] == "1");
    CHECK(cells_of(summary[3])[0] == "mean");
    CHECK(cells_of(summary[4])[0] == "std");

    // the JSON summary carries full precision; the balance column must equal
    // min(sen,spe)/max(sen,spe), and the CSV cells are its rendering
    const nlohmann::json j = nlohmann::json::parse(read_text(out / "summary.json"));
    REQUIRE(j.at("repeats").size() == 2);
    for (std::size_t r = 0; r < 2; ++r) {
        const auto &row = j.at("repeats").at(r);
        const double sen = row.at("sen").get<double>();
        const double spe = row.at("spe").get<double>();
        const auto cells = cells_of(summary[1 + r]);
        CHECK(cells[1] == format_metric(sen));
        CHECK(cells[2] == format_metric(spe));
        if (row.at("balance").is_number()) {
            const double balance = row.at("balance").get<double>();
            const double lo = std::min(sen, spe);
            const double hi = std::max(sen, spe);
            CHECK(balance == doctest::Approx(lo / hi).epsilon(1e-12));
            CHECK(cells[5] == format_metric(balance));
        } else {
            CHECK(sen == 0.0);
            CHECK(spe == 0.0);
            CHECK(cells[5] == "NA");
        }
    }
    const double mean_auc =
        (j.at("repeats").at(0).at("auc").get<double>() +
         j.at("repeats").at(1).at("auc").get<double>()) / 2.0;
    CHECK(j.at("mean").at("auc").get<double>() == doctest::Approx(mean_auc).epsilon(1e-12));

    const auto preds = lines_of(read_text(out / "predictions.csv"));
    REQUIRE(preds.size() == 13);  // 12 test samples
    CHECK(preds[0] == "sample_id,p_fin1,p_fin2,u_fin,decision,label");
    std::set<std::string> ids;
    int positives = 0;
    for (std::size_t i = 1; i < preds.size(); ++i) {
        const auto cells = cells_of(preds[i]);
        REQUIRE(cells.size() == 6);
        ids.insert(cells[0]);
        const double p1 = std::stod(cells[1]);
        const double p2 = std::stod(cells[2]);
        const double u = std::stod(cells[3]);
        CHECK(p1 >= 0.0);
        CHECK(p2 >= 0.0);
        CHECK(u >= 0.0);
        CHECK(p1 + p2 + u == doctest::Approx(1.0).epsilon(2e-6));
        CHECK((cells[4] == "1" || cells[4] == "2"));
        CHECK((cells[5] == "1" || cells[5] == "2"));
        if (cells[5] == "1") ++positives;
    }
    CHECK(ids.size() == 12);
    CHECK(positives == 6);

    fs::remove_all(dir);
}

TEST_CASE("stratify and attack report on a trained model set") {
    const fs::path dir = temp_dir("reports");
    const fs::path cfg = write_micro_config(dir);
    const fs::path out = dir / "run";
    const std::string common = " --config " + cfg.string() + " --out " + out.string();
    REQUIRE(run_cli("synth" + common).code == 0);
    REQUIRE(run_cli("train" + common).code == 0);

    const CliResult strat = run_cli("stratify" + common);
    REQUIRE(strat.code == 0);
    const auto strata = lines_of(read_text(out / "stratification.csv"));
    REQUIRE(strata.size() == 5);  // full set plus three nested cohorts
    CHECK(strata[0] == "uncertainty,SEN,SPE,AUC,ACC");
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < strata.size(); ++i) {
        const auto cells = cells_of(strata[i]);
        REQUIRE(cells.size() == 5);
        const double cutoff = std::stod(cells[0]);
        CHECK(cutoff <= prev + 1e-12);
        prev = cutoff;
        REQUIRE(cells[4] != "NA");  // accuracy is defined for every cohort
        const double acc = std::stod(cells[4]);
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
    }

    const CliResult attack = run_cli("attack" + common);
    REQUIRE(attack.code == 0);
    CHECK(fs::exists(out / "robustness_seed0.csv"));
    CHECK(fs::exists(out / "robustness_seed1.csv"));
    const auto sweep = lines_of(read_text(out / "robustness.csv"));
    REQUIRE(sweep.size() == 3);
    CHECK(sweep[0] == "epsilon,acc");
    CHECK(cells_of(sweep[1])[0] == "0.000000");
    CHECK(cells_of(sweep[2])[0] == "0.050000");

    // the aggregate sweep is the per-seed mean
    const auto seed0 = lines_of(read_text(out / "robustness_seed0.csv"));
    const auto seed1 = lines_of(read_text(out / "robustness_seed1.csv"));
    for (std::size_t i = 1; i < sweep.size(); ++i) {
        const double mean = std::stod(cells_of(sweep[i])[1]);
        const double a0 = std::stod(cells_of(seed0[i])[1]);
        const double a1 = std::stod(cells_of(seed1[i])[1]);
        CHECK(mean == doctest::Approx((a0 + a1) / 2.0).epsilon(2e-6));
    }

    fs::remove_all(dir);
}

TEST_CASE("identical configs reproduce every report byte for byte") {
    const fs::path dir = temp_dir("repro");
    const fs::path cfg = write_micro_config(dir);
    const char *files[] = {"imia_trace.csv", "front_metrics.csv", "model_set/manifest.json",
                           "evaluate.csv", "predictions.csv"};

    for (const char *run : {"a", "b"}) {
        const std::string common =
            " --config " + cfg.string() + " --out " + (dir / run).string();
        REQUIRE(run_cli("synth" + common).code == 0);
        REQUIRE(run_cli("train" + common).code == 0);
        REQUIRE(run_cli("evaluate" + common).code == 0);
    }
    for (const char *f : files) {
        CAPTURE(f);
        CHECK(read_text(dir / "a" / f) == read_text(dir / "b" / f));
    }

    // a different master seed must change the derived test-time randomness
    const std::string override_run = " --config " + cfg.string() + " --out " +
                                     (dir / "b").string() + " --seed 99";
    REQUIRE(run_cli("evaluate" + override_run).code == 0);
    CHECK(read_text(dir / "a" / "predictions.csv") != read_text(dir / "b" / "predictions.csv"));

    fs::remove_all(dir);
}
