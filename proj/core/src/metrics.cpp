#include "automo/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace automo {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
    if (scores.empty()) throw std::invalid_argument("metrics: empty input");
    if (scores.size() != labels.size())
        throw std::invalid_argument("metrics: " + std::to_string(scores.size()) + " scores vs " +
                                    std::to_string(labels.size()) + " labels");
    for (const int l : labels)
        if (l != 1 && l != 2)
            throw std::invalid_argument("metrics: label " + std::to_string(l) +
                                        " outside {1,2}");
}

}  // namespace

ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold) {
    check_inputs(scores, labels);
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("threshold must lie in (0,1)");
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted_positive = scores[i] > threshold;
        const bool actual_positive = labels[i] == 1;
        if (actual_positive)
            (predicted_positive ? c.tp : c.fn)++;
        else
            (predicted_positive ? c.fp : c.tn)++;
    }
    return c;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels);
    const auto n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks over tie groups, summed for the positive class
    double rank_sum_pos = 0.0;
    std::int64_t n_pos = 0, n_neg = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                rank_sum_pos += midrank;
                ++n_pos;
            } else {
                ++n_neg;
            }
        }
        i = j;
    }
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("auc: both classes must be present");
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double balance_ratio(double sen, double spe) {
    const double lo = std::min(sen, spe);
    const double hi = std::max(sen, spe);
    if (hi == 0.0) return 1.0;
    return lo / hi;
}

EvalMetrics eval_metrics(std::span<const double> scores, std::span<const int> labels,
                         double threshold) {
    const ConfusionCounts c = confusion(scores, labels, threshold);
    if (c.tp + c.fn == 0 || c.tn + c.fp == 0)
        throw std::invalid_argument("eval_metrics: a class is absent from labels");
    EvalMetrics m;
    m.sen = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    m.spe = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    m.acc = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    m.auc = auc(scores, labels);
    m.balance = balance_ratio(m.sen, m.spe);
    return m;
}

}  // namespace automo
