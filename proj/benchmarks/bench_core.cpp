#include <benchmark/benchmark.h>

#include "automo/data.hpp"
#include "automo/fusion.hpp"
#include "automo/imia.hpp"
#include "automo/metrics.hpp"
#include "automo/mixer.hpp"
#include "automo/rng.hpp"

namespace {

using namespace automo;

MixerConfig desk_config() {
    MixerConfig cfg;
    cfg.image_side = 28;
    cfg.patch_size = 7;
    cfg.num_layers = 2;
    cfg.hidden_c = 32;
    cfg.mlp_ds = 32;
    cfg.mlp_dc = 64;
    return cfg;
}

Image random_image(int side, Rng &rng) {
    Image img(side);
    for (float &p : img.pixels) p = static_cast<float>(rng.uniform01());
    return img;
}

void bm_forward(benchmark::State &state) {
    const auto cfg = desk_config();
    const auto params = init_params(cfg, 1);
    Rng rng(2);
    const auto img = random_image(cfg.image_side, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(cfg, params, img.pixels));
    }
}
BENCHMARK(bm_forward);

void bm_input_gradient(benchmark::State &state) {
    const auto cfg = desk_config();
    const auto params = init_params(cfg, 1);
    Rng rng(2);
    const auto img = random_image(cfg.image_side, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(input_gradient(cfg, params, img.pixels, 1));
    }
}
BENCHMARK(bm_input_gradient);

void bm_tta_opinion(benchmark::State &state) {
    const auto cfg = desk_config();
    const auto params = init_params(cfg, 1);
    Rng img_rng(2);
    const auto img = random_image(cfg.image_side, img_rng);
    TtaPolicy policy;
    for (auto _ : state) {
        Rng rng(3);
        benchmark::DoNotOptimize(
            tta_opinion(cfg, params, img, 8, policy, EntropyBase::natural, rng));
    }
}
BENCHMARK(bm_tta_opinion);

void bm_ere_combine(benchmark::State &state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(4);
    std::vector<Opinion> ops;
    std::vector<double> raw;
    for (int i = 0; i < n; ++i) {
        double p1 = rng.uniform(0.05, 0.9);
        double p2 = rng.uniform(0.0, 1.0 - p1) * 0.9;
        ops.push_back({p1, p2, 1.0 - p1 - p2});
        raw.push_back(rng.uniform(0.1, 1.0));
    }
    const auto weights = normalize_weights(raw);
    for (auto _ : state) {
        benchmark::DoNotOptimize(ere_combine(ops, weights));
    }
}
BENCHMARK(bm_ere_combine)->Arg(4)->Arg(16)->Arg(64);

void bm_auc(benchmark::State &state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(5);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
        scores.push_back(rng.uniform01());
        labels.push_back(i % 4 == 0 ? 2 : 1);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(auc(scores, labels));
    }
}
BENCHMARK(bm_auc)->Arg(200)->Arg(2000);

void bm_pareto_front(benchmark::State &state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(6);
    Population pop;
    for (int i = 0; i < n; ++i) {
        Candidate c;
        c.metrics.sen = rng.uniform01();
        c.metrics.spe = rng.uniform01();
        c.metrics.auc = rng.uniform01();
        c.metrics_valid = true;
        c.id = static_cast<std::uint64_t>(i);
        pop.members.push_back(std::move(c));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(pareto_front(pop));
    }
}
BENCHMARK(bm_pareto_front)->Arg(20)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
