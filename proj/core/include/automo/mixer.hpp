#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace automo {

// Two-class patch-mixing MLP classifier. Each block applies a pre-norm
// token-mixing MLP (across patches, per channel) and a pre-norm
// channel-mixing MLP (across channels, per patch), both with GELU and a
// skip connection; a final layer norm, mean pool over patches and a
// linear head produce the two logits.
struct MixerConfig {
    int image_side = 28;  // square input edge, pixels
    int patch_size = 7;   // must divide image_side
    int num_layers = 2;   // mixer blocks; 0 keeps embedding + head only
    int hidden_c = 32;    // channel width C
    int mlp_ds = 32;      // token-mixing hidden width
    int mlp_dc = 64;      // channel-mixing hidden width

    static constexpr int num_classes = 2;

    int patches_per_side() const { return image_side / patch_size; }
    int seq_len() const { return patches_per_side() * patches_per_side(); }
    int patch_dim() const { return patch_size * patch_size; }

    bool operator==(const MixerConfig &) const = default;
};

// Throws std::invalid_argument when the config violates its invariants
// (patch size must divide the image side, widths must be positive).
void validate(const MixerConfig &cfg);

// Flat weight genome in the canonical segment order below. Entries are
// IEEE-754 binary32; the vector length must equal param_count(config).
struct ParamVector {
    std::vector<float> values;

    std::size_t size() const { return values.size(); }
    float *data() { return values.data(); }
    const float *data() const { return values.data(); }
};

enum class ParamKind { weight, bias, norm_gain, norm_bias };

// One contiguous tensor inside the flat genome. Matrices are row-major
// (rows x cols); vectors have cols == 1.
struct ParamSegment {
    std::string name;
    ParamKind kind;
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;
    int fan_in = 0;  // inputs feeding one output unit; 0 for norm/bias

    std::size_t count() const { return static_cast<std::size_t>(rows) * cols; }
};

// Canonical segment order:
//   embed.weight (C x P^2), embed.bias (C)
//   per block b: block{b}.token_norm.{gain,bias} (C),
//                block{b}.token_mlp.{w1 (Ds x S), b1 (Ds), w2 (S x Ds), b2 (S)},
//                block{b}.channel_norm.{gain,bias} (C),
//                block{b}.channel_mlp.{w1 (Dc x C), b1 (Dc), w2 (C x Dc), b2 (C)}
//   final_norm.{gain,bias} (C)
//   head.weight (2 x C), head.bias (2)
std::vector<ParamSegment> param_layout(const MixerConfig &cfg);

std::size_t param_count(const MixerConfig &cfg);

// Deterministic seeded initialization: weight matrices are uniform on
// (-sqrt(3/fan_in), +sqrt(3/fan_in)), norm gains 1, all biases 0.
ParamVector init_params(const MixerConfig &cfg, std::uint64_t seed);

struct ProbPair {
    double p1 = 0.5;  // positive class
    double p2 = 0.5;
};

// Thrown when inference produces a non-finite activation.
class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Single-image inference. image must hold image_side^2 pixels, row-major.
ProbPair forward(const MixerConfig &cfg, const ParamVector &params,
                 std::span<const float> image);

// Double-precision inference over the same graph. Used by oracles that
// need finite differences well below float rounding noise.
std::array<double, 2> forward_probs_f64(const MixerConfig &cfg, const ParamVector &params,
                                        std::span<const double> image);

// d(cross-entropy)/d(pixel) for the given true label in {1,2}; same
// length and layout as the input image.
std::vector<float> input_gradient(const MixerConfig &cfg, const ParamVector &params,
                                  std::span<const float> image, int true_label);

struct ProbGradResult {
    ProbPair probs;
    std::vector<float> grad;  // d p_cls / d pixel
};

// Gradient of one class probability with respect to the input. The
// ensemble attack surrogate combines these across models.
ProbGradResult prob_gradient(const MixerConfig &cfg, const ParamVector &params,
                             std::span<const float> image, int cls);

}  // namespace automo
