#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace automo {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fn = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fn + fp + tn; }
};

struct EvalMetrics {
    double sen = 0.0;      // TP / (TP + FN)
    double spe = 0.0;      // TN / (TN + FP)
    double auc = 0.0;
    double acc = 0.0;
    double balance = 0.0;  // min(sen, spe) / max(sen, spe)
};

// scores are positive-class probabilities; labels in {1,2}, 1 positive.
// Predicted positive iff score > threshold. Throws on empty input,
// length mismatch, a label outside {1,2} or a threshold outside (0,1).
ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold);

// Rank-based (Mann-Whitney) AUC with midrank tie handling. Throws unless
// both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

// min/max ratio; (0,0) maps to 1 so only one-sided degeneracy scores 0.
double balance_ratio(double sen, double spe);

// Full metric row at the given decision threshold. Requires at least one
// sample of each class.
EvalMetrics eval_metrics(std::span<const double> scores, std::span<const int> labels,
                         double threshold = 0.5);

}  // namespace automo
