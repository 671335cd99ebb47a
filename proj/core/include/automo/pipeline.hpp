#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "automo/fusion.hpp"
#include "automo/hyperopt.hpp"
#include "automo/imia.hpp"
#include "automo/robustness.hpp"
#include "automo/run_config.hpp"

namespace automo {

// Fixed-point CSV cell: six decimals, NaN rendered as NA.
std::string format_metric(double v);

struct TrainOutputs {
    ImiaResult imia;
    std::vector<double> weights;  // normalized fusion weights, aligned with front
};

// IMIA evolution on the training split followed by balance-aware weight
// assignment over the resulting front.
TrainOutputs train_pipeline(const Dataset &train, const RunConfig &cfg);

// Fused prediction for every sample; metrics over the fused scores. When
// outcomes is non-null the per-sample results are exported in dataset
// order.
EvalMetrics evaluate_ensemble(const ParetoSet &ensemble, std::span<const double> weights,
                              const Dataset &data, const FusionParams &params,
                              std::uint64_t seed,
                              std::vector<FusedOutcome> *outcomes = nullptr);

// Mean and per-entry standard deviation (population form) of repeated
// metric rows.
EvalMetrics metrics_mean(std::span<const EvalMetrics> rows);
EvalMetrics metrics_std(std::span<const EvalMetrics> rows);

// ---- report writers ---------------------------------------------------------
// Every writer emits a header row and formats numbers via format_metric.

void write_metrics_csv(const std::filesystem::path &file,
                       std::span<const EvalMetrics> rows);
void write_trace_csv(const std::filesystem::path &file,
                     std::span<const IterationTrace> trace);
void write_tune_csv(const std::filesystem::path &file,
                    std::span<const HyperPoint> trials);
void write_predictions_csv(const std::filesystem::path &file,
                           std::span<const FusedOutcome> outcomes,
                           std::span<const std::string> ids, std::span<const int> labels);
void write_strata_csv(const std::filesystem::path &file,
                      std::span<const StratumRow> rows);
void write_sweep_csv(const std::filesystem::path &file, std::span<const SweepRow> rows);

// repeat-indexed rows followed by mean and std rows.
void write_repeat_summary_csv(const std::filesystem::path &file,
                              std::span<const EvalMetrics> repeats);

}  // namespace automo
