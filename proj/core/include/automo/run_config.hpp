#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "automo/data.hpp"
#include "automo/fusion.hpp"
#include "automo/imia.hpp"
#include "automo/mixer.hpp"

namespace automo {

// Everything one run needs, parsed from a sectioned key=value file. Every
// field has a default, so an empty file is a valid config.
struct RunConfig {
    std::uint64_t seed = 1;

    int image_side = 28;
    int patch_size = 7;
    ArchitectureGrid grid;

    ImiaParams imia;
    FusionParams fusion;

    std::vector<double> attack_epsilons = {0.0, 0.01, 0.02, 0.04, 0.06, 0.08};

    int tune_budget = 25;
    bool tune_random_search = false;

    int evaluate_repeats = 5;

    SynthSpec synth_train{.n_per_class = 150};  // 600 samples at ratio 3
    SynthSpec synth_test{.n_per_class = 50};    // 200 samples at ratio 3

    // Relative paths resolve against the output directory at run time.
    std::string train_manifest = "data/train/manifest.csv";
    std::string test_manifest = "data/test/manifest.csv";
    std::string model_set = "model_set";
};

// Parses the file; '#' starts a comment, sections are [name] headers.
// Unknown sections or keys are errors, not warnings: a typo must not
// silently fall back to a default. Throws std::runtime_error with the
// offending line number.
RunConfig load_run_config(const std::filesystem::path &file);

// Parses config text directly (used by load_run_config and tests).
RunConfig parse_run_config(const std::string &text, const std::string &origin = "<string>");

}  // namespace automo
