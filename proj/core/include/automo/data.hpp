#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "automo/image.hpp"
#include "automo/rng.hpp"

namespace automo {

// ---- PGM (P5, 8-bit) ------------------------------------------------------

Image read_pgm(const std::filesystem::path &file);
void write_pgm(const std::filesystem::path &file, const Image &img);

// Nearest-neighbor resize to a square target side.
Image resize_nearest(const Image &img, int target_side);

// ---- dataset manifest ------------------------------------------------------

// CSV with header "path,label"; image paths are resolved relative to the
// manifest's directory. Pixels scale to [0,1] by /255 and images are
// resized to target_side. The path string doubles as the sample id.
Dataset load_manifest(const std::filesystem::path &manifest, int target_side,
                      Split split = Split::train);

// Writes dataset images as PGM files plus a manifest.csv into dir.
void write_dataset(const Dataset &ds, const std::filesystem::path &dir);

// ---- synthetic data --------------------------------------------------------

// Positive class: centered bright blob; negative class: bright ring.
// Per-sample shape jitter makes wide blobs and tight rings genuinely
// ambiguous, so classifiers face a nonzero Bayes error once noise_sigma > 0.
struct SynthSpec {
    int n_per_class = 50;        // negative-class count
    double imbalance_ratio = 3;  // positives = round(ratio * n_per_class)
    double noise_sigma = 0.05;   // additive pixel noise
    int side = 28;
};

Dataset synth_generate(const SynthSpec &spec, std::uint64_t seed, Split split = Split::train);

// ---- augmentation primitives ----------------------------------------------

enum class AugOp { flip_h, shift, gauss_noise };

struct AugSpec {
    AugOp op = AugOp::flip_h;
    int dx = 0, dy = 0;        // shift
    double sigma = 0.0;        // gauss_noise
};

// Parses "flip-h", "shift(dx,dy)" or "gauss-noise(sigma)". Throws on an
// unknown op name.
AugSpec parse_aug_spec(const std::string &text);

// Applies one op; shift is circular; pixels clamp to [0,1]. Identity ops
// (shift(0,0)) return the input bitwise.
Image augment(const Image &img, const AugSpec &spec, Rng &rng);

// Test-time augmentation policy: each variant flips with probability 0.5
// (when enabled), shifts circularly by dx,dy drawn uniformly from
// [-max_shift, max_shift], then adds Gaussian pixel noise. Defaults stay
// mild because shifts comparable to the patch size wash out the very
// perturbations the robustness sweep is meant to expose.
struct TtaPolicy {
    bool flip = true;
    int max_shift = 1;
    double noise_sigma = 0.01;
};

Image tta_variant(const Image &img, const TtaPolicy &policy, Rng &rng);

}  // namespace automo
