#include "automo/imia.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "automo/rng.hpp"

namespace automo {

namespace {

std::vector<double> candidate_scores(const Candidate &cand, const Dataset &data) {
    std::vector<double> scores;
    scores.reserve(data.size());
    for (const auto &s : data.samples)
        scores.push_back(forward(cand.config, cand.params, s.image.pixels).p1);
    return scores;
}

std::vector<int> dataset_labels(const Dataset &data) {
    std::vector<int> labels;
    labels.reserve(data.size());
    for (const auto &s : data.samples) labels.push_back(s.label);
    return labels;
}

double clone_fitness(const Candidate &c) { return 0.5 * (c.metrics.sen + c.metrics.spe); }

// Largest-remainder apportionment of `budget` seats by weight. Equal
// weights (including the all-zero case) share as evenly as possible.
std::vector<int> apportion(const std::vector<double> &weights, int budget) {
    const auto n = weights.size();
    std::vector<int> counts(n, 0);
    if (budget <= 0 || n == 0) return counts;
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> quota(n);
    if (total <= 0.0) {
        const double q = static_cast<double>(budget) / static_cast<double>(n);
        std::fill(quota.begin(), quota.end(), q);
    } else {
        for (std::size_t i = 0; i < n; ++i) quota[i] = budget * weights[i] / total;
    }
    int assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        counts[i] = static_cast<int>(quota[i]);
        assigned += counts[i];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return quota[a] - counts[a] > quota[b] - counts[b];
    });
    for (std::size_t k = 0; assigned < budget; ++k, ++assigned) counts[order[k % n]]++;

    // floor of one clone per parent when the budget allows
    if (budget >= static_cast<int>(n)) {
        for (std::size_t i = 0; i < n; ++i) {
            while (counts[i] == 0) {
                const auto donor = std::max_element(counts.begin(), counts.end()) - counts.begin();
                if (counts[donor] <= 1) return counts;  // nothing left to take
                counts[donor]--;
                counts[i]++;
            }
        }
    }
    return counts;
}

std::vector<std::vector<std::size_t>> sort_fronts(const std::vector<Candidate> &members) {
    const auto n = members.size();
    std::vector<int> dominated_by(n, 0);
    std::vector<std::vector<std::size_t>> dominates_list(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (dominates(members[i].metrics, members[j].metrics)) dominates_list[i].push_back(j);
            else if (dominates(members[j].metrics, members[i].metrics)) dominated_by[i]++;
        }
    std::vector<std::vector<std::size_t>> fronts;
    std::vector<std::size_t> current;
    for (std::size_t i = 0; i < n; ++i)
        if (dominated_by[i] == 0) current.push_back(i);
    while (!current.empty()) {
        fronts.push_back(current);
        std::vector<std::size_t> next;
        for (const auto i : current)
            for (const auto j : dominates_list[i])
                if (--dominated_by[j] == 0) next.push_back(j);
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }
    return fronts;
}

void require_valid_metrics(const Population &pop, const char *who) {
    for (const auto &c : pop.members)
        if (!c.metrics_valid) throw std::logic_error(std::string(who) + ": stale metrics");
}

}  // namespace

bool dominates(const EvalMetrics &a, const EvalMetrics &b) {
    return a.sen >= b.sen && a.spe >= b.spe && (a.sen > b.sen || a.spe > b.spe);
}

void evaluate_population(Population &pop, const Dataset &data, double threshold) {
    const auto labels = dataset_labels(data);
    for (auto &cand : pop.members) {
        if (cand.metrics_valid) continue;
        try {
            const auto scores = candidate_scores(cand, data);
            cand.metrics = eval_metrics(scores, labels, threshold);
        } catch (const EvaluationError &) {
            cand.metrics = EvalMetrics{};  // degenerate; dominated by anything finite
            cand.metrics.balance = balance_ratio(0.0, 0.0);
        }
        cand.metrics_valid = true;
    }
}

Population initialize_population(const ArchitectureGrid &grid, int n, const Dataset &data,
                                 double threshold, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("population size must be >= 2");
    if (grid.num_layers.empty() || grid.hidden_c.empty() || grid.mlp_ds.empty() ||
        grid.mlp_dc.empty())
        throw std::invalid_argument("architecture grid has an empty dimension");
    Population pop;
    pop.capacity = n;
    pop.members.reserve(n);
    for (int i = 0; i < n; ++i) {
        Rng arch_rng(derive_seed(seed, stream::kInitArch, static_cast<std::uint64_t>(i)));
        auto pick = [&](const std::vector<int> &v) {
            return v[static_cast<std::size_t>(arch_rng.uniform_int(0, static_cast<long>(v.size()) - 1))];
        };
        Candidate cand;
        cand.config.image_side = grid.image_side;
        cand.config.patch_size = grid.patch_size;
        cand.config.num_layers = pick(grid.num_layers);
        cand.config.hidden_c = pick(grid.hidden_c);
        cand.config.mlp_ds = pick(grid.mlp_ds);
        cand.config.mlp_dc = pick(grid.mlp_dc);
        validate(cand.config);
        cand.params = init_params(cand.config,
                                  derive_seed(seed, stream::kInitWeights, static_cast<std::uint64_t>(i)));
        cand.id = static_cast<std::uint64_t>(i);
        pop.members.push_back(std::move(cand));
    }
    evaluate_population(pop, data, threshold);
    return pop;
}

Population proportional_clone(const Population &pop, int budget, std::uint64_t id_base) {
    require_valid_metrics(pop, "proportional_clone");
    std::vector<double> fitness(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) fitness[i] = clone_fitness(pop.members[i]);
    const auto counts = apportion(fitness, budget);
    Population clones;
    clones.capacity = pop.capacity;
    clones.members.reserve(budget);
    std::uint64_t next_id = id_base;
    for (std::size_t i = 0; i < pop.size(); ++i)
        for (int k = 0; k < counts[i]; ++k) {
            Candidate copy = pop.members[i];
            copy.id = next_id++;
            clones.members.push_back(std::move(copy));
        }
    return clones;
}

Population mutate(Population pop, double mp, double sigma, double fraction, std::uint64_t seed) {
    if (mp < 0.0 || mp > 1.0) throw std::invalid_argument("mutation probability outside [0,1]");
    if (sigma <= 0.0) throw std::invalid_argument("mutation sigma must be > 0");
    if (fraction <= 0.0 || fraction > 1.0)
        throw std::invalid_argument("mutation fraction outside (0,1]");
    for (std::size_t i = 0; i < pop.size(); ++i) {
        Rng gate(derive_seed(seed, stream::kCloneGate, static_cast<std::uint64_t>(i)));
        if (!(gate.uniform01() > mp)) continue;  // literal gate: mutate when draw exceeds MP
        auto &cand = pop.members[i];
        Rng noise(derive_seed(seed, stream::kMutate, static_cast<std::uint64_t>(i)));
        const std::size_t q = cand.params.size();
        const std::size_t subset =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * q)));
        // partial Fisher-Yates for a uniform subset without replacement
        std::vector<std::size_t> idx(q);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t k = 0; k < subset; ++k) {
            const auto pickk = static_cast<std::size_t>(
                noise.uniform_int(static_cast<long>(k), static_cast<long>(q) - 1));
            std::swap(idx[k], idx[pickk]);
            cand.params.values[idx[k]] += static_cast<float>(noise.normal(0.0, sigma));
        }
        cand.metrics_valid = false;
    }
    return pop;
}

Population dedup(Population pop) {
    require_valid_metrics(pop, "dedup");
    const auto n = pop.members.size();
    std::vector<bool> keep(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        if (!keep[i]) continue;
        std::size_t best = i;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!keep[j]) continue;
            if (pop.members[j].metrics.sen == pop.members[i].metrics.sen &&
                pop.members[j].metrics.spe == pop.members[i].metrics.spe) {
                if (pop.members[j].metrics.auc > pop.members[best].metrics.auc) {
                    keep[best] = false;
                    best = j;
                } else {
                    keep[j] = false;
                }
            }
        }
    }
    Population out;
    out.capacity = pop.capacity;
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) out.members.push_back(std::move(pop.members[i]));
    return out;
}

Population truncate_nondominated(Population pop, int n) {
    require_valid_metrics(pop, "truncate_nondominated");
    if (static_cast<int>(pop.size()) <= n) return pop;
    const auto fronts = sort_fronts(pop.members);
    std::vector<std::size_t> selected;
    selected.reserve(n);
    for (const auto &front : fronts) {
        if (static_cast<int>(selected.size() + front.size()) <= n) {
            selected.insert(selected.end(), front.begin(), front.end());
            if (static_cast<int>(selected.size()) == n) break;
        } else {
            // splitting front: highest AUC first, original order on ties
            std::vector<std::size_t> by_auc = front;
            std::stable_sort(by_auc.begin(), by_auc.end(), [&](std::size_t a, std::size_t b) {
                return pop.members[a].metrics.auc > pop.members[b].metrics.auc;
            });
            by_auc.resize(n - selected.size());
            selected.insert(selected.end(), by_auc.begin(), by_auc.end());
            break;
        }
    }
    std::sort(selected.begin(), selected.end());  // preserve population order
    Population out;
    out.capacity = pop.capacity;
    out.members.reserve(selected.size());
    for (const auto i : selected) out.members.push_back(std::move(pop.members[i]));
    return out;
}

Population truncate_covering(Population pop, int n,
                             const std::vector<std::pair<double, double>> &cover) {
    require_valid_metrics(pop, "truncate_covering");
    if (static_cast<int>(pop.size()) <= n) return pop;
    const auto fronts = sort_fronts(pop.members);
    // A first front that fits is kept whole, and it weakly dominates
    // everything the pool dominates; the plain rule preserves the cover.
    if (static_cast<int>(fronts.front().size()) <= n)
        return truncate_nondominated(std::move(pop), n);

    const auto &first = fronts.front();
    const auto auc_of = [&](std::size_t i) { return pop.members[i].metrics.auc; };

    // One witness per cover point: the highest-AUC first-front member
    // weakly dominating it. Points nothing dominates are uncoverable.
    std::vector<std::size_t> selected;
    for (const auto &p : cover) {
        bool found = false;
        std::size_t best = 0;
        for (const auto idx : first) {
            const auto &m = pop.members[idx].metrics;
            if (m.sen < p.first || m.spe < p.second) continue;
            if (!found || auc_of(idx) > auc_of(best)) {
                best = idx;
                found = true;
            }
        }
        if (found) selected.push_back(best);
    }
    std::sort(selected.begin(), selected.end());
    selected.erase(std::unique(selected.begin(), selected.end()), selected.end());

    if (static_cast<int>(selected.size()) < n) {
        std::vector<std::size_t> rest;
        for (const auto idx : first)
            if (!std::binary_search(selected.begin(), selected.end(), idx)) rest.push_back(idx);
        std::stable_sort(rest.begin(), rest.end(),
                         [&](std::size_t a, std::size_t b) { return auc_of(a) > auc_of(b); });
        rest.resize(static_cast<std::size_t>(n) - selected.size());
        selected.insert(selected.end(), rest.begin(), rest.end());
    } else if (static_cast<int>(selected.size()) > n) {
        // more witnesses than slots: full coverage is infeasible, keep the
        // strongest witnesses
        std::stable_sort(selected.begin(), selected.end(),
                         [&](std::size_t a, std::size_t b) { return auc_of(a) > auc_of(b); });
        selected.resize(static_cast<std::size_t>(n));
    }

    std::sort(selected.begin(), selected.end());  // preserve population order
    Population out;
    out.capacity = pop.capacity;
    out.members.reserve(selected.size());
    for (const auto i : selected) out.members.push_back(std::move(pop.members[i]));
    return out;
}

ParetoSet pareto_front(const Population &pop) {
    require_valid_metrics(pop, "pareto_front");
    if (pop.members.empty()) throw std::invalid_argument("pareto_front: empty population");
    ParetoSet set;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < pop.size() && !dominated; ++j)
            if (i != j && dominates(pop.members[j].metrics, pop.members[i].metrics))
                dominated = true;
        if (!dominated) set.models.push_back(pop.members[i]);
    }
    return set;
}

namespace {

IterationTrace make_trace(int iter, const Population &pop) {
    IterationTrace t;
    t.iter = iter;
    t.pop_size = static_cast<int>(pop.size());
    const auto front = pareto_front(pop);
    t.front_size = static_cast<int>(front.size());
    for (const auto &m : front.models) t.front_points.emplace_back(m.metrics.sen, m.metrics.spe);
    for (const auto &m : pop.members) {
        t.best_sen = std::max(t.best_sen, m.metrics.sen);
        t.best_spe = std::max(t.best_spe, m.metrics.spe);
        t.best_auc = std::max(t.best_auc, m.metrics.auc);
    }
    return t;
}

}  // namespace

ImiaResult run_imia(const Dataset &train, const ArchitectureGrid &grid, const ImiaParams &params,
                    std::uint64_t seed) {
    if (params.max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
    if (!train.has_both_classes())
        throw std::invalid_argument("training dataset must contain both classes");

    const int n = params.population_size;
    const int budget = params.clone_budget > 0 ? params.clone_budget : n;

    ImiaResult result;
    Population pop = initialize_population(grid, n, train, params.threshold, seed);
    result.trace.push_back(make_trace(0, pop));

    std::uint64_t next_id = static_cast<std::uint64_t>(n);
    for (int iter = 1; iter <= params.max_iterations; ++iter) {
        Population clones = proportional_clone(pop, budget, next_id);
        next_id += clones.size();
        clones = mutate(std::move(clones), params.mutation_probability, params.mutation_sigma,
                        params.mutation_fraction,
                        derive_seed(seed, static_cast<std::uint64_t>(iter)));
        evaluate_population(clones, train, params.threshold);

        Population combined;
        combined.capacity = n;
        combined.members.reserve(pop.size() + clones.size());
        for (auto &m : pop.members) combined.members.push_back(std::move(m));
        for (auto &m : clones.members) combined.members.push_back(std::move(m));

        combined = dedup(std::move(combined));
        // covering the previous front keeps every earlier front point
        // dominated-or-equaled even when the first front overfills n
        pop = truncate_covering(std::move(combined), n, result.trace.back().front_points);
        result.trace.push_back(make_trace(iter, pop));
    }

    result.front = pareto_front(pop);
    result.final_population = std::move(pop);
    return result;
}

}  // namespace automo
