#include "automo/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace automo {
namespace {

std::string trim(const std::string &s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void fail(const std::string &origin, int line, const std::string &msg) {
    throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + msg);
}

struct Parser {
    const std::string &origin;
    int line = 0;

    double num(const std::string &v) {
        std::size_t pos = 0;
        double d;
        try {
            d = std::stod(v, &pos);
        } catch (const std::exception &) {
            fail(origin, line, "expected a number, got '" + v + "'");
        }
        if (pos != v.size()) fail(origin, line, "trailing junk in number '" + v + "'");
        return d;
    }

    int integer(const std::string &v) {
        const double d = num(v);
        const int i = static_cast<int>(d);
        if (static_cast<double>(i) != d) fail(origin, line, "expected an integer, got '" + v + "'");
        return i;
    }

    std::uint64_t uint64(const std::string &v) {
        try {
            std::size_t pos = 0;
            const auto u = std::stoull(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("junk");
            return u;
        } catch (const std::exception &) {
            fail(origin, line, "expected an unsigned integer, got '" + v + "'");
        }
    }

    bool boolean(const std::string &v) {
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        fail(origin, line, "expected a boolean, got '" + v + "'");
    }

    std::vector<std::string> list(const std::string &v) {
        // Commas inside parentheses belong to an op argument list, not the
        // item separator: shift(2,2) is one item.
        std::vector<std::string> items;
        std::string cur;
        int depth = 0;
        for (char c : v) {
            if (c == '(') ++depth;
            if (c == ')') --depth;
            if (c == ',' && depth == 0) {
                items.push_back(trim(cur));
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!trim(cur).empty()) items.push_back(trim(cur));
        return items;
    }

    std::vector<int> int_list(const std::string &v) {
        std::vector<int> out;
        for (const auto &item : list(v)) out.push_back(integer(item));
        if (out.empty()) fail(origin, line, "empty list");
        return out;
    }

    std::vector<double> num_list(const std::string &v) {
        std::vector<double> out;
        for (const auto &item : list(v)) out.push_back(num(item));
        if (out.empty()) fail(origin, line, "empty list");
        return out;
    }
};

void apply_augment_list(RunConfig &cfg, Parser &p, const std::string &value) {
    TtaPolicy policy;
    policy.flip = false;
    policy.max_shift = 0;
    policy.noise_sigma = 0.0;
    for (const auto &item : p.list(value)) {
        AugSpec spec;
        try {
            spec = parse_aug_spec(item);
        } catch (const std::exception &e) {
            fail(p.origin, p.line, e.what());
        }
        switch (spec.op) {
            case AugOp::flip_h:
                policy.flip = true;
                break;
            case AugOp::shift:
                policy.max_shift = std::max(std::abs(spec.dx), std::abs(spec.dy));
                break;
            case AugOp::gauss_noise:
                policy.noise_sigma = spec.sigma;
                break;
        }
    }
    cfg.fusion.tta = policy;
}

void validate_config(const RunConfig &cfg) {
    MixerConfig probe;
    probe.image_side = cfg.image_side;
    probe.patch_size = cfg.patch_size;
    validate(probe);

    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in01(cfg.imia.mutation_probability)) {
        throw std::runtime_error("mutation_probability must lie in [0,1]");
    }
    if (!in01(cfg.fusion.lambda)) throw std::runtime_error("lambda must lie in [0,1]");
    if (!(cfg.imia.threshold > 0.0 && cfg.imia.threshold < 1.0)) {
        throw std::runtime_error("threshold must lie in (0,1)");
    }
    if (cfg.imia.mutation_sigma < 0.0) throw std::runtime_error("mutation_sigma must be >= 0");
    if (!(cfg.imia.mutation_fraction > 0.0 && cfg.imia.mutation_fraction <= 1.0)) {
        throw std::runtime_error("mutation_fraction must lie in (0,1]");
    }
    if (cfg.imia.population_size < 2) throw std::runtime_error("population must be >= 2");
    if (cfg.imia.max_iterations < 1) throw std::runtime_error("iterations must be >= 1");
    if (cfg.imia.clone_budget < 0) throw std::runtime_error("clone_budget must be >= 0");
    if (cfg.fusion.tta_rounds < 1) throw std::runtime_error("tta_rounds must be >= 1");
    if (cfg.tune_budget < 1) throw std::runtime_error("tune budget must be >= 1");
    if (cfg.evaluate_repeats < 1) throw std::runtime_error("evaluate repeats must be >= 1");
    if (cfg.synth_train.n_per_class < 1 || cfg.synth_test.n_per_class < 1) {
        throw std::runtime_error("synthetic per-class counts must be >= 1");
    }
    if (cfg.synth_train.imbalance_ratio <= 0.0) {
        throw std::runtime_error("imbalance_ratio must be positive");
    }
    if (cfg.synth_train.noise_sigma < 0.0) {
        throw std::runtime_error("synthetic noise_sigma must be >= 0");
    }

    if (cfg.attack_epsilons.empty()) throw std::runtime_error("epsilons must be non-empty");
    for (std::size_t i = 0; i < cfg.attack_epsilons.size(); ++i) {
        if (!in01(cfg.attack_epsilons[i])) {
            throw std::runtime_error("epsilons must lie in [0,1]");
        }
        if (i > 0 && cfg.attack_epsilons[i] <= cfg.attack_epsilons[i - 1]) {
            throw std::runtime_error("epsilons must be strictly ascending");
        }
    }

    auto positive = [](const std::vector<int> &v) {
        return !v.empty() && std::all_of(v.begin(), v.end(), [](int x) { return x > 0; });
    };
    if (!positive(cfg.grid.hidden_c) || !positive(cfg.grid.mlp_ds) ||
        !positive(cfg.grid.mlp_dc)) {
        throw std::runtime_error("grid widths must be positive and non-empty");
    }
    if (cfg.grid.num_layers.empty() ||
        std::any_of(cfg.grid.num_layers.begin(), cfg.grid.num_layers.end(),
                    [](int x) { return x < 0; })) {
        throw std::runtime_error("grid layer counts must be non-negative and non-empty");
    }
}

}  // namespace

RunConfig parse_run_config(const std::string &text, const std::string &origin) {
    RunConfig cfg;
    Parser p{origin};
    std::string section;
    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
        ++p.line;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') fail(origin, p.line, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            static const char *known[] = {"run",    "model", "grid",     "imia", "fusion",
                                          "attack", "tune",  "evaluate", "synth", "paths"};
            if (std::find_if(std::begin(known), std::end(known), [&](const char *k) {
                    return section == k;
                }) == std::end(known)) {
                fail(origin, p.line, "unknown section [" + section + "]");
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(origin, p.line, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(origin, p.line, "empty key");
        if (value.empty()) fail(origin, p.line, "empty value for '" + key + "'");

        auto unknown_key = [&]() -> void {
            fail(origin, p.line, "unknown key '" + key + "' in section [" + section + "]");
        };

        if (section == "run") {
            if (key == "seed") cfg.seed = p.uint64(value);
            else unknown_key();
        } else if (section == "model") {
            if (key == "image_side") cfg.image_side = p.integer(value);
            else if (key == "patch_size") cfg.patch_size = p.integer(value);
            else unknown_key();
        } else if (section == "grid") {
            if (key == "layers") cfg.grid.num_layers = p.int_list(value);
            else if (key == "hidden") cfg.grid.hidden_c = p.int_list(value);
            else if (key == "token_hidden") cfg.grid.mlp_ds = p.int_list(value);
            else if (key == "channel_hidden") cfg.grid.mlp_dc = p.int_list(value);
            else unknown_key();
        } else if (section == "imia") {
            if (key == "population") cfg.imia.population_size = p.integer(value);
            else if (key == "mutation_probability") cfg.imia.mutation_probability = p.num(value);
            else if (key == "mutation_sigma") cfg.imia.mutation_sigma = p.num(value);
            else if (key == "mutation_fraction") cfg.imia.mutation_fraction = p.num(value);
            else if (key == "clone_budget") cfg.imia.clone_budget = p.integer(value);
            else if (key == "iterations") cfg.imia.max_iterations = p.integer(value);
            else if (key == "threshold") cfg.imia.threshold = p.num(value);
            else unknown_key();
        } else if (section == "fusion") {
            if (key == "lambda") cfg.fusion.lambda = p.num(value);
            else if (key == "tta_rounds") cfg.fusion.tta_rounds = p.integer(value);
            else if (key == "augment") apply_augment_list(cfg, p, value);
            else if (key == "log_base") {
                if (value == "e" || value == "natural") {
                    cfg.fusion.entropy_base = EntropyBase::natural;
                } else if (value == "2") {
                    cfg.fusion.entropy_base = EntropyBase::base2;
                } else {
                    fail(origin, p.line, "log_base must be 'e' or '2'");
                }
            } else unknown_key();
        } else if (section == "attack") {
            if (key == "epsilons") cfg.attack_epsilons = p.num_list(value);
            else unknown_key();
        } else if (section == "tune") {
            if (key == "budget") cfg.tune_budget = p.integer(value);
            else if (key == "random_search") cfg.tune_random_search = p.boolean(value);
            else unknown_key();
        } else if (section == "evaluate") {
            if (key == "repeats") cfg.evaluate_repeats = p.integer(value);
            else unknown_key();
        } else if (section == "synth") {
            if (key == "train_per_class") cfg.synth_train.n_per_class = p.integer(value);
            else if (key == "test_per_class") cfg.synth_test.n_per_class = p.integer(value);
            else if (key == "imbalance_ratio") {
                cfg.synth_train.imbalance_ratio = p.num(value);
                cfg.synth_test.imbalance_ratio = cfg.synth_train.imbalance_ratio;
            } else if (key == "noise_sigma") {
                cfg.synth_train.noise_sigma = p.num(value);
                cfg.synth_test.noise_sigma = cfg.synth_train.noise_sigma;
            } else unknown_key();
        } else if (section == "paths") {
            if (key == "train_manifest") cfg.train_manifest = value;
            else if (key == "test_manifest") cfg.test_manifest = value;
            else if (key == "model_set") cfg.model_set = value;
            else unknown_key();
        } else {
            fail(origin, p.line, "key '" + key + "' appears before any section");
        }
    }

    cfg.grid.image_side = cfg.image_side;
    cfg.grid.patch_size = cfg.patch_size;
    cfg.synth_train.side = cfg.image_side;
    cfg.synth_test.side = cfg.image_side;
    validate_config(cfg);
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path &file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open config " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), file.string());
}

}  // namespace automo
