#include "automo/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace automo {

namespace {

constexpr double kMassTolerance = 1e-9;

void check_opinion(const Opinion &o) {
    if (o.p1 < 0 || o.p2 < 0 || o.u < 0 ||
        std::abs(o.p1 + o.p2 + o.u - 1.0) > kMassTolerance || !std::isfinite(o.p1) ||
        !std::isfinite(o.p2) || !std::isfinite(o.u))
        throw std::invalid_argument("invalid opinion: masses must be non-negative and sum to 1");
}

// Product with the factors multiplied in ascending order, so the result
// is bitwise invariant under any permutation of the models.
double stable_product(std::vector<double> factors) {
    std::sort(factors.begin(), factors.end());
    double prod = 1.0;
    for (const double f : factors) prod *= f;
    return prod;
}

double quantile_nearest_rank(const std::vector<double> &sorted, double p) {
    const auto n = sorted.size();
    const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    return sorted[std::max<std::size_t>(1, rank) - 1];
}

}  // namespace

double model_weight(const EvalMetrics &metrics, double lambda) {
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("lambda outside [0,1]");
    for (double v : {metrics.sen, metrics.spe, metrics.auc}) {
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("model_weight: metrics outside [0,1]");
    }
    const double lo = std::min(metrics.sen, metrics.spe);
    const double hi = std::max(metrics.sen, metrics.spe);
    if (hi == 0.0) return 0.0;  // fully degenerate model
    const double ratio = lo / hi;
    if (ratio < 0.5) return 0.0;
    return lambda * ratio + (1.0 - lambda) * metrics.auc;
}

std::vector<double> normalize_weights(std::span<const double> raws) {
    double total = 0.0;
    for (const double w : raws) {
        if (w < 0.0 || !std::isfinite(w))
            throw std::invalid_argument("raw weights must be finite and non-negative");
        total += w;
    }
    if (total <= 0.0) throw std::runtime_error("no balanced model available");
    std::vector<double> out(raws.begin(), raws.end());
    for (auto &w : out) w /= total;
    return out;
}

Opinion tta_opinion(const MixerConfig &cfg, const ParamVector &params, const Image &image,
                    int tta_rounds, const TtaPolicy &policy, EntropyBase base, Rng &rng) {
    if (tta_rounds < 1) throw std::invalid_argument("tta_rounds must be >= 1");
    double sum_p1 = 0.0;
    for (int t = 0; t < tta_rounds; ++t) {
        const Image variant = tta_variant(image, policy, rng);
        sum_p1 += forward(cfg, params, variant.pixels).p1;
    }
    const double mean_p1 = sum_p1 / tta_rounds;
    const double mean_p2 = 1.0 - mean_p1;
    auto plogp = [&](double p) {
        if (p <= 0.0) return 0.0;
        return base == EntropyBase::natural ? p * std::log(p) : p * std::log2(p);
    };
    const double u = -(plogp(mean_p1) + plogp(mean_p2));
    const double total = mean_p1 + mean_p2 + u;
    return Opinion{mean_p1 / total, mean_p2 / total, u / total};
}

FusedOutcome ere_combine(std::span<const Opinion> opinions, std::span<const double> weights) {
    if (opinions.empty()) throw std::invalid_argument("ere_combine: no opinions");
    if (opinions.size() != weights.size())
        throw std::invalid_argument("ere_combine: opinions/weights size mismatch");
    const auto j = opinions.size();
    std::vector<double> f1(j), f2(j), fu(j), fw(j);
    for (std::size_t i = 0; i < j; ++i) {
        check_opinion(opinions[i]);
        const double w = weights[i];
        if (w < 0.0 || w > 1.0 + kMassTolerance)
            throw std::invalid_argument("ere_combine: weights must be normalized");
        const double assigned = opinions[i].p1 + opinions[i].p2;
        f1[i] = w * opinions[i].p1 + 1.0 - w * assigned;
        f2[i] = w * opinions[i].p2 + 1.0 - w * assigned;
        fu[i] = 1.0 - w * assigned;
        fw[i] = 1.0 - w;
    }
    const double a1 = stable_product(std::move(f1));
    const double a2 = stable_product(std::move(f2));
    const double b = stable_product(std::move(fu));
    const double w0 = stable_product(std::move(fw));

    const double mu = 1.0 / (a1 + a2 - b);
    const double denom = 1.0 - mu * w0;
    FusedOutcome out;
    out.p_fin1 = mu * (a1 - b) / denom;
    out.p_fin2 = mu * (a2 - b) / denom;
    out.u_fin = mu * (b - w0) / denom;
    if (!std::isfinite(out.p_fin1) || !std::isfinite(out.p_fin2) || !std::isfinite(out.u_fin))
        throw std::runtime_error("ere_combine: non-finite fusion result");
    out.decision = out.p_fin1 > out.p_fin2 ? 1 : 2;
    const double assigned = out.p_fin1 + out.p_fin2;
    out.score = assigned > 0.0 ? out.p_fin1 / assigned : 0.5;
    return out;
}

FusedOutcome predict(const ParetoSet &ensemble, std::span<const double> weights,
                     const Image &image, const FusionParams &params, PredictSeed seed) {
    if (ensemble.models.empty()) throw std::invalid_argument("predict: empty ensemble");
    if (ensemble.models.size() != weights.size())
        throw std::invalid_argument("predict: ensemble/weights size mismatch");
    std::vector<Opinion> opinions;
    std::vector<double> active;
    for (std::size_t m = 0; m < ensemble.models.size(); ++m) {
        if (weights[m] == 0.0) continue;  // zero weight is exactly neutral, skip the work
        Rng rng(derive_seed(seed.seed, stream::kTta, seed.sample_index,
                            static_cast<std::uint64_t>(m)));
        const auto &model = ensemble.models[m];
        opinions.push_back(tta_opinion(model.config, model.params, image, params.tta_rounds,
                                       params.tta, params.entropy_base, rng));
        active.push_back(weights[m]);
    }
    if (opinions.empty()) throw std::runtime_error("no balanced model available");
    return ere_combine(opinions, active);
}

std::vector<StratumRow> stratify_by_uncertainty(std::span<const FusedOutcome> outcomes,
                                                std::span<const int> labels) {
    if (outcomes.size() < 4)
        throw std::invalid_argument("stratification needs at least 4 samples");
    if (outcomes.size() != labels.size())
        throw std::invalid_argument("stratification: outcome/label size mismatch");

    std::vector<double> u(outcomes.size());
    for (std::size_t i = 0; i < outcomes.size(); ++i) u[i] = outcomes[i].u_fin;
    std::vector<double> sorted = u;
    std::sort(sorted.begin(), sorted.end());

    const double cutoffs[4] = {sorted.back(), quantile_nearest_rank(sorted, 0.75),
                               quantile_nearest_rank(sorted, 0.5),
                               quantile_nearest_rank(sorted, 0.25)};

    std::vector<StratumRow> rows;
    for (const double cutoff : cutoffs) {
        StratumRow row;
        row.cutoff = cutoff;
        std::int64_t tp = 0, fn = 0, fp = 0, tn = 0;
        std::vector<double> scores;
        std::vector<int> cohort_labels;
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            if (u[i] > cutoff) continue;
            ++row.cohort_size;
            const bool predicted_positive = outcomes[i].decision == 1;
            if (labels[i] == 1)
                (predicted_positive ? tp : fn)++;
            else
                (predicted_positive ? fp : tn)++;
            scores.push_back(outcomes[i].score);
            cohort_labels.push_back(labels[i]);
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.sen = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : nan;
        row.spe = (tn + fp) > 0 ? static_cast<double>(tn) / static_cast<double>(tn + fp) : nan;
        row.acc = static_cast<double>(tp + tn) / static_cast<double>(row.cohort_size);
        row.auc = ((tp + fn) > 0 && (tn + fp) > 0) ? auc(scores, cohort_labels) : nan;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace automo
