#include "automo/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "automo/rng.hpp"

namespace automo {
namespace {

void check_weights(const ParetoSet &ensemble, std::span<const double> weights) {
    if (ensemble.models.empty()) {
        throw std::invalid_argument("empty ensemble");
    }
    if (weights.size() != ensemble.models.size()) {
        throw std::invalid_argument("weight count does not match ensemble size");
    }
    bool any = false;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) {
            throw std::invalid_argument("weights must be finite and non-negative");
        }
        any = any || w > 0.0;
    }
    if (!any) throw std::invalid_argument("all ensemble weights are zero");
}

}  // namespace

std::vector<float> ensemble_surrogate_gradient(const ParetoSet &ensemble,
                                               std::span<const double> weights,
                                               const Image &image, int true_label) {
    check_weights(ensemble, weights);
    if (true_label != kPositiveLabel && true_label != kNegativeLabel) {
        throw std::invalid_argument("label must be 1 or 2");
    }

    const std::size_t n_px = image.pixels.size();
    std::vector<double> grad_acc(n_px, 0.0);
    double p_avg = 0.0;
    double w_total = 0.0;
    for (std::size_t m = 0; m < ensemble.models.size(); ++m) {
        const double w = weights[m];
        if (w == 0.0) continue;
        const Candidate &cand = ensemble.models[m];
        auto res = prob_gradient(cand.config, cand.params, image.pixels, true_label);
        const double p_true = (true_label == kPositiveLabel) ? res.probs.p1 : res.probs.p2;
        p_avg += w * p_true;
        for (std::size_t i = 0; i < n_px; ++i) {
            grad_acc[i] += w * static_cast<double>(res.grad[i]);
        }
        w_total += w;
    }
    p_avg /= w_total;

    // d(-log p_avg)/dx = -(1/p_avg) * d p_avg/dx; the floor keeps the sign
    // field usable when the ensemble is confidently wrong.
    const double scale = -1.0 / std::max(p_avg, 1e-12);
    std::vector<float> grad(n_px);
    for (std::size_t i = 0; i < n_px; ++i) {
        grad[i] = static_cast<float>(scale * grad_acc[i] / w_total);
    }
    return grad;
}

Image fgsm_from_gradient(const Image &image, std::span<const float> gradient,
                         double epsilon) {
    if (epsilon < 0.0 || epsilon > 1.0) {
        throw std::invalid_argument("epsilon must lie in [0,1]");
    }
    if (epsilon == 0.0) return image;
    if (gradient.size() != image.pixels.size()) {
        throw std::invalid_argument("gradient size does not match image");
    }
    Image out = image;
    const float eps = static_cast<float>(epsilon);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const float g = gradient[i];
        float step = 0.0f;
        if (g > 0.0f) step = eps;
        else if (g < 0.0f) step = -eps;
        out.pixels[i] = std::clamp(image.pixels[i] + step, 0.0f, 1.0f);
    }
    return out;
}

Image fgsm(const ParetoSet &ensemble, std::span<const double> weights,
           const Sample &sample, double epsilon) {
    if (epsilon == 0.0) return sample.image;
    const auto grad = ensemble_surrogate_gradient(ensemble, weights, sample.image,
                                                  sample.label);
    return fgsm_from_gradient(sample.image, grad, epsilon);
}

std::vector<SweepRow> robustness_sweep(const ParetoSet &ensemble,
                                       std::span<const double> weights,
                                       const Dataset &data,
                                       std::span<const double> epsilons,
                                       const FusionParams &params, std::uint64_t seed) {
    check_weights(ensemble, weights);
    if (data.samples.empty()) throw std::invalid_argument("empty dataset");
    if (epsilons.empty()) throw std::invalid_argument("no epsilon values");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (epsilons[i] < 0.0 || epsilons[i] > 1.0) {
            throw std::invalid_argument("epsilon must lie in [0,1]");
        }
        if (i > 0 && epsilons[i] <= epsilons[i - 1]) {
            throw std::invalid_argument("epsilons must be strictly ascending");
        }
    }

    // The sign field does not depend on epsilon, so one backward pass per
    // sample serves the whole sweep.
    std::vector<std::vector<float>> grads;
    grads.reserve(data.samples.size());
    for (const Sample &s : data.samples) {
        grads.push_back(ensemble_surrogate_gradient(ensemble, weights, s.image, s.label));
    }

    std::vector<SweepRow> rows;
    rows.reserve(epsilons.size());
    for (double eps : epsilons) {
        std::int64_t correct = 0;
        for (std::size_t i = 0; i < data.samples.size(); ++i) {
            const Sample &s = data.samples[i];
            const Image attacked = fgsm_from_gradient(s.image, grads[i], eps);
            const auto outcome = predict(ensemble, weights, attacked, params,
                                         PredictSeed{derive_seed(seed, stream::kAttackEval),
                                                     static_cast<std::uint64_t>(i)});
            if (outcome.decision == s.label) ++correct;
        }
        rows.push_back({eps, static_cast<double>(correct) /
                                 static_cast<double>(data.samples.size())});
    }
    return rows;
}

}  // namespace automo
