#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "automo/data.hpp"
#include "automo/imia.hpp"
#include "automo/metrics.hpp"

namespace automo {

// Per-model mass assignment: class masses plus an explicit uncertainty
// mass, summing to 1.
struct Opinion {
    double p1 = 0.0;
    double p2 = 0.0;
    double u = 1.0;
};

struct FusedOutcome {
    double p_fin1 = 0.0;
    double p_fin2 = 0.0;
    double u_fin = 1.0;
    int decision = 2;    // class 1 iff p_fin1 > p_fin2, ties resolve negative
    double score = 0.5;  // p_fin1 / (p_fin1 + p_fin2)
};

// Balance-vs-AUC blend: with r = min(sen,spe)/max(sen,spe), returns
// lambda*r + (1-lambda)*auc when r >= 0.5 and 0 otherwise (extremely
// imbalanced models carry no evidence). sen = spe = 0 also yields 0.
double model_weight(const EvalMetrics &metrics, double lambda);

// Divides by the sum; throws "no balanced model available" when every raw
// weight is zero.
std::vector<double> normalize_weights(std::span<const double> raws);

enum class EntropyBase { natural, base2 };

struct FusionParams {
    double lambda = 0.8;
    int tta_rounds = 8;  // T
    TtaPolicy tta;
    EntropyBase entropy_base = EntropyBase::natural;
};

// Runs T augmented forward passes, averages the class probabilities,
// takes their entropy as the raw uncertainty mass and normalizes the
// triple to sum to 1.
Opinion tta_opinion(const MixerConfig &cfg, const ParamVector &params, const Image &image,
                    int tta_rounds, const TtaPolicy &policy, EntropyBase base, Rng &rng);

// Weighted evidential combination of the opinions. weights must be
// normalized (sum 1) and aligned with opinions. Zero-weight opinions are
// exactly neutral. Throws on size mismatch, invalid opinions, or a
// non-finite intermediate.
FusedOutcome ere_combine(std::span<const Opinion> opinions, std::span<const double> weights);

// Seed scope for one fused prediction; per-model streams derive from it
// so that serial and parallel evaluation orders agree.
struct PredictSeed {
    std::uint64_t seed = 0;
    std::uint64_t sample_index = 0;
};

// TTA opinion per positive-weight model, then ERE combination.
FusedOutcome predict(const ParetoSet &ensemble, std::span<const double> weights,
                     const Image &image, const FusionParams &params, PredictSeed seed);

struct StratumRow {
    double cutoff = 0.0;
    int cohort_size = 0;
    // NaN marks a metric that is undefined because the cohort lost a class
    double sen = 0.0, spe = 0.0, auc = 0.0, acc = 0.0;
};

// Four cohorts at descending uncertainty cutoffs (max, upper quartile,
// median, lower quartile by nearest rank); each cohort keeps the samples
// with u_fin <= cutoff. Requires >= 4 outcomes.
std::vector<StratumRow> stratify_by_uncertainty(std::span<const FusedOutcome> outcomes,
                                                std::span<const int> labels);

}  // namespace automo
