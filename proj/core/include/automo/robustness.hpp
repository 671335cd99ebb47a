#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "automo/fusion.hpp"
#include "automo/imia.hpp"

namespace automo {

// Cross-entropy input gradient of the weight-averaged class probability
// of the ensemble. Models with zero weight are skipped. Throws when no
// weight is positive or a forward pass fails.
std::vector<float> ensemble_surrogate_gradient(const ParetoSet &ensemble,
                                               std::span<const double> weights,
                                               const Image &image, int true_label);

// Fast gradient sign step: clamp(x + epsilon * sign(g), 0, 1). With
// epsilon = 0 the input is returned unchanged, bit for bit.
Image fgsm_from_gradient(const Image &image, std::span<const float> gradient,
                         double epsilon);

// Convenience wrapper generating the gradient from the ensemble surrogate.
Image fgsm(const ParetoSet &ensemble, std::span<const double> weights,
           const Sample &sample, double epsilon);

struct SweepRow {
    double epsilon = 0.0;
    double acc = 0.0;
};

// For each epsilon: attack every sample through the surrogate, then score
// fused-ensemble accuracy on the attacked set. Sign gradients are computed
// once per sample and reused across the sweep. epsilons must be ascending
// and non-negative.
std::vector<SweepRow> robustness_sweep(const ParetoSet &ensemble,
                                       std::span<const double> weights,
                                       const Dataset &data,
                                       std::span<const double> epsilons,
                                       const FusionParams &params, std::uint64_t seed);

}  // namespace automo
