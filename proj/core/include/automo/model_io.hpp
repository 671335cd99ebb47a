#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "automo/imia.hpp"

namespace automo {

inline constexpr int kModelSetVersion = 1;

// Writes a manifest (manifest.json) plus one little-endian float32 blob
// per model into dir, creating it if needed. weights are the fusion
// weights aligned with set.members.
void save_model_set(const ParetoSet &set, std::span<const double> weights,
                    const std::filesystem::path &dir);

struct LoadedModelSet {
    ParetoSet set;
    std::vector<double> weights;
};

// Reads a directory written by save_model_set. Unknown manifest fields are
// tolerated and reported through warnings when given. Throws on missing or
// malformed manifest, version mismatch, blob size mismatch, or checksum
// failure.
LoadedModelSet load_model_set(const std::filesystem::path &dir,
                              std::vector<std::string> *warnings = nullptr);

}  // namespace automo
