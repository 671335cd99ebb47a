#include "automo/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace automo {
namespace {

std::ofstream open_report(const std::filesystem::path &file) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    return out;
}

}  // namespace

std::string format_metric(double v) {
    if (std::isnan(v)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

TrainOutputs train_pipeline(const Dataset &train, const RunConfig &cfg) {
    TrainOutputs out;
    out.imia = run_imia(train, cfg.grid, cfg.imia, cfg.seed);
    std::vector<double> raw;
    raw.reserve(out.imia.front.models.size());
    for (const Candidate &cand : out.imia.front.models) {
        raw.push_back(model_weight(cand.metrics, cfg.fusion.lambda));
    }
    out.weights = normalize_weights(raw);
    return out;
}

EvalMetrics evaluate_ensemble(const ParetoSet &ensemble, std::span<const double> weights,
                              const Dataset &data, const FusionParams &params,
                              std::uint64_t seed, std::vector<FusedOutcome> *outcomes) {
    if (data.samples.empty()) throw std::invalid_argument("empty dataset");
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(data.samples.size());
    labels.reserve(data.samples.size());
    if (outcomes) {
        outcomes->clear();
        outcomes->reserve(data.samples.size());
    }
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const auto outcome =
            predict(ensemble, weights, data.samples[i].image, params,
                    PredictSeed{seed, static_cast<std::uint64_t>(i)});
        scores.push_back(outcome.score);
        labels.push_back(data.samples[i].label);
        if (outcomes) outcomes->push_back(outcome);
    }
    return eval_metrics(scores, labels, 0.5);
}

EvalMetrics metrics_mean(std::span<const EvalMetrics> rows) {
    if (rows.empty()) throw std::invalid_argument("no rows");
    EvalMetrics m{0, 0, 0, 0, 0};
    for (const auto &r : rows) {
        m.sen += r.sen;
        m.spe += r.spe;
        m.auc += r.auc;
        m.acc += r.acc;
        m.balance += r.balance;
    }
    const double n = static_cast<double>(rows.size());
    m.sen /= n;
    m.spe /= n;
    m.auc /= n;
    m.acc /= n;
    m.balance /= n;
    return m;
}

EvalMetrics metrics_std(std::span<const EvalMetrics> rows) {
    const EvalMetrics mean = metrics_mean(rows);
    EvalMetrics s{0, 0, 0, 0, 0};
    for (const auto &r : rows) {
        s.sen += (r.sen - mean.sen) * (r.sen - mean.sen);
        s.spe += (r.spe - mean.spe) * (r.spe - mean.spe);
        s.auc += (r.auc - mean.auc) * (r.auc - mean.auc);
        s.acc += (r.acc - mean.acc) * (r.acc - mean.acc);
        s.balance += (r.balance - mean.balance) * (r.balance - mean.balance);
    }
    const double n = static_cast<double>(rows.size());
    s.sen = std::sqrt(s.sen / n);
    s.spe = std::sqrt(s.spe / n);
    s.auc = std::sqrt(s.auc / n);
    s.acc = std::sqrt(s.acc / n);
    s.balance = std::sqrt(s.balance / n);
    return s;
}

void write_metrics_csv(const std::filesystem::path &file,
                       std::span<const EvalMetrics> rows) {
    auto out = open_report(file);
    out << "sen,spe,auc,acc,balance\n";
    for (const auto &r : rows) {
        out << format_metric(r.sen) << ',' << format_metric(r.spe) << ','
            << format_metric(r.auc) << ',' << format_metric(r.acc) << ','
            << format_metric(r.balance) << '\n';
    }
}

void write_trace_csv(const std::filesystem::path &file,
                     std::span<const IterationTrace> trace) {
    auto out = open_report(file);
    out << "iter,pop_size,best_sen,best_spe,best_auc,front_size\n";
    for (const auto &t : trace) {
        out << t.iter << ',' << t.pop_size << ',' << format_metric(t.best_sen) << ','
            << format_metric(t.best_spe) << ',' << format_metric(t.best_auc) << ','
            << t.front_size << '\n';
    }
}

void write_tune_csv(const std::filesystem::path &file,
                    std::span<const HyperPoint> trials) {
    auto out = open_report(file);
    out << "trial,mp,lambda,objective\n";
    for (std::size_t i = 0; i < trials.size(); ++i) {
        out << i << ',' << format_metric(trials[i].mp) << ','
            << format_metric(trials[i].lambda) << ','
            << format_metric(trials[i].objective) << '\n';
    }
}

void write_predictions_csv(const std::filesystem::path &file,
                           std::span<const FusedOutcome> outcomes,
                           std::span<const std::string> ids,
                           std::span<const int> labels) {
    if (outcomes.size() != ids.size() || outcomes.size() != labels.size()) {
        throw std::invalid_argument("prediction dump size mismatch");
    }
    auto out = open_report(file);
    out << "sample_id,p_fin1,p_fin2,u_fin,decision,label\n";
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        out << ids[i] << ',' << format_metric(outcomes[i].p_fin1) << ','
            << format_metric(outcomes[i].p_fin2) << ','
            << format_metric(outcomes[i].u_fin) << ',' << outcomes[i].decision << ','
            << labels[i] << '\n';
    }
}

void write_strata_csv(const std::filesystem::path &file,
                      std::span<const StratumRow> rows) {
    auto out = open_report(file);
    out << "uncertainty,SEN,SPE,AUC,ACC\n";
    for (const auto &r : rows) {
        out << format_metric(r.cutoff) << ',' << format_metric(r.sen) << ','
            << format_metric(r.spe) << ',' << format_metric(r.auc) << ','
            << format_metric(r.acc) << '\n';
    }
}

void write_sweep_csv(const std::filesystem::path &file, std::span<const SweepRow> rows) {
    auto out = open_report(file);
    out << "epsilon,acc\n";
    for (const auto &r : rows) {
        out << format_metric(r.epsilon) << ',' << format_metric(r.acc) << '\n';
    }
}

void write_repeat_summary_csv(const std::filesystem::path &file,
                              std::span<const EvalMetrics> repeats) {
    if (repeats.empty()) throw std::invalid_argument("no repeats");
    auto out = open_report(file);
    out << "repeat,sen,spe,auc,acc,balance\n";
    auto row = [&](const std::string &tag, const EvalMetrics &m) {
        out << tag << ',' << format_metric(m.sen) << ',' << format_metric(m.spe) << ','
            << format_metric(m.auc) << ',' << format_metric(m.acc) << ','
            << format_metric(m.balance) << '\n';
    };
    for (std::size_t i = 0; i < repeats.size(); ++i) {
        row(std::to_string(i), repeats[i]);
    }
    row("mean", metrics_mean(repeats));
    row("std", metrics_std(repeats));
}

}  // namespace automo
