#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "automo/image.hpp"
#include "automo/metrics.hpp"
#include "automo/mixer.hpp"

namespace automo {

struct Candidate {
    MixerConfig config;
    ParamVector params;
    EvalMetrics metrics;
    std::uint64_t id = 0;
    bool metrics_valid = false;
};

struct Population {
    std::vector<Candidate> members;
    int capacity = 0;

    std::size_t size() const { return members.size(); }
};

// Mutually non-dominated models in (sen, spe).
struct ParetoSet {
    std::vector<Candidate> models;

    std::size_t size() const { return models.size(); }
};

// Architecture values sampled at initialization; image geometry is fixed
// for the whole run so every genome length stays constant under mutation.
// Widths are kept small on purpose: evolution trains weights by subset
// Gaussian mutation alone, and genomes past a few thousand parameters stay
// near initialization within the default iteration budget.
struct ArchitectureGrid {
    int image_side = 28;
    int patch_size = 7;
    std::vector<int> num_layers{1, 2};
    std::vector<int> hidden_c{6, 8, 10};
    std::vector<int> mlp_ds{8};
    std::vector<int> mlp_dc{12, 16};
};

struct ImiaParams {
    int population_size = 20;       // N
    double mutation_probability = 0.5;  // MP gate: a candidate mutates when its
                                        // uniform draw exceeds MP, so LARGER MP
                                        // means LESS mutation
    double mutation_sigma = 0.05;
    double mutation_fraction = 0.10;    // share of weights perturbed per mutation
    int clone_budget = 0;               // 0 -> population_size
    int max_iterations = 30;
    double threshold = 0.5;             // decision threshold for sen/spe
};

// A dominates B on (sen, spe): >= on both, > on at least one.
bool dominates(const EvalMetrics &a, const EvalMetrics &b);

// Re-evaluates every candidate whose metrics flag is stale. Candidates
// whose forward pass fails get all-zero objectives and fall out of the
// population through dominance.
void evaluate_population(Population &pop, const Dataset &data, double threshold);

// N fresh candidates with architectures drawn uniformly from the grid and
// seeded weights; metrics already evaluated. Throws when n < 2.
Population initialize_population(const ArchitectureGrid &grid, int n, const Dataset &data,
                                 double threshold, std::uint64_t seed);

// The clone set (deep copies, fresh ids): counts proportional to
// (sen+spe)/2 by largest-remainder apportionment of the budget, each
// parent receiving at least one clone when the budget allows.
Population proportional_clone(const Population &pop, int budget, std::uint64_t id_base);

// Per-candidate gate: draw r in (0,1); mutate iff r > mp. A mutation adds
// N(0, sigma^2) to a uniformly chosen fraction of the weights and marks
// the metrics stale.
Population mutate(Population pop, double mp, double sigma, double fraction,
                  std::uint64_t seed);

// Among candidates with identical (sen, spe), keeps the one with highest
// AUC (first seen wins ties); input order otherwise preserved.
Population dedup(Population pop);

// Non-dominated fronts admitted in order; the splitting front is admitted
// by descending AUC. Result size = min(n, |pop|).
Population truncate_nondominated(Population pop, int n);

// Same front-ordered truncation with a cover guarantee: every (sen, spe)
// point in `cover` that some pop member weakly dominates keeps at least one
// such member in the result. Only an overfull first front can threaten the
// cover; there the needed witnesses (highest-AUC choice per point) are
// admitted ahead of the plain AUC order. Behaves exactly like
// truncate_nondominated whenever the first front fits within n.
Population truncate_covering(Population pop, int n,
                             const std::vector<std::pair<double, double>> &cover);

// Exactly the non-dominated members. Throws on an empty population.
ParetoSet pareto_front(const Population &pop);

struct IterationTrace {
    int iter = 0;
    int pop_size = 0;
    double best_sen = 0.0;
    double best_spe = 0.0;
    double best_auc = 0.0;
    int front_size = 0;
    std::vector<std::pair<double, double>> front_points;  // (sen, spe)
};

struct ImiaResult {
    ParetoSet front;
    Population final_population;
    std::vector<IterationTrace> trace;  // entry 0 = after initialization
};

// Full loop: initialize, then per iteration clone -> mutate -> evaluate ->
// dedup -> truncate, until max_iterations. Truncation covers the previous
// front, so no iteration strictly worsens any front point. Objectives are
// computed on the given (training) dataset. Fully reproducible from the seed.
ImiaResult run_imia(const Dataset &train, const ArchitectureGrid &grid, const ImiaParams &params,
                    std::uint64_t seed);

}  // namespace automo
