#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace automo {

// Square grayscale image, pixels in [0,1], row-major.
struct Image {
    int side = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int s, float fill = 0.0f)
        : side(s), pixels(static_cast<std::size_t>(s) * s, fill) {}

    float &at(int y, int x) { return pixels[static_cast<std::size_t>(y) * side + x]; }
    float at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * side + x]; }
    std::size_t size() const { return pixels.size(); }
};

// Binary label convention: 1 = positive class, 2 = negative class.
inline constexpr int kPositiveLabel = 1;
inline constexpr int kNegativeLabel = 2;

struct Sample {
    std::string id;
    Image image;
    int label = kNegativeLabel;
};

enum class Split { train, validation, test };

struct Dataset {
    std::vector<Sample> samples;
    Split split = Split::train;

    std::size_t size() const { return samples.size(); }
    bool has_both_classes() const {
        bool pos = false, neg = false;
        for (const auto &s : samples) {
            if (s.label == kPositiveLabel) pos = true;
            if (s.label == kNegativeLabel) neg = true;
        }
        return pos && neg;
    }
};

}  // namespace automo
