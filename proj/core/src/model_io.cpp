#include "automo/model_io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace automo {
namespace {

using nlohmann::json;

std::uint64_t fnv1a64(const std::vector<unsigned char> &bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::vector<unsigned char> encode_blob(const ParamVector &params) {
    std::vector<unsigned char> bytes;
    bytes.reserve(params.size() * 4);
    for (float f : params.values) {
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        bytes.push_back(static_cast<unsigned char>(u & 0xff));
        bytes.push_back(static_cast<unsigned char>((u >> 8) & 0xff));
        bytes.push_back(static_cast<unsigned char>((u >> 16) & 0xff));
        bytes.push_back(static_cast<unsigned char>((u >> 24) & 0xff));
    }
    return bytes;
}

ParamVector decode_blob(const std::vector<unsigned char> &bytes) {
    ParamVector params;
    params.values.resize(bytes.size() / 4);
    for (std::size_t i = 0; i < params.values.size(); ++i) {
        std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * i]) |
                          (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                          (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                          (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
        std::memcpy(&params.values[i], &u, 4);
    }
    return params;
}

void check_known_keys(const json &obj, const std::set<std::string> &known,
                      const char *where, std::vector<std::string> *warnings) {
    if (!warnings) return;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!known.count(it.key())) {
            warnings->push_back(std::string("ignoring unknown field '") + it.key() +
                                "' in " + where);
        }
    }
}

}  // namespace

void save_model_set(const ParetoSet &set, std::span<const double> weights,
                    const std::filesystem::path &dir) {
    if (weights.size() != set.models.size()) {
        throw std::invalid_argument("weight count does not match model count");
    }
    std::filesystem::create_directories(dir);

    json manifest;
    manifest["version"] = kModelSetVersion;
    json models = json::array();
    for (std::size_t i = 0; i < set.models.size(); ++i) {
        const Candidate &cand = set.models[i];
        char name[32];
        std::snprintf(name, sizeof(name), "model_%03zu.bin", i);

        const auto bytes = encode_blob(cand.params);
        std::ofstream blob(dir / name, std::ios::binary | std::ios::trunc);
        if (!blob) throw std::runtime_error("cannot write " + (dir / name).string());
        blob.write(reinterpret_cast<const char *>(bytes.data()),
                   static_cast<std::streamsize>(bytes.size()));
        if (!blob) throw std::runtime_error("short write to " + (dir / name).string());

        json m;
        m["id"] = cand.id;
        m["file"] = name;
        m["checksum"] = hex64(fnv1a64(bytes));
        m["weight"] = weights[i];
        m["config"] = {{"image_side", cand.config.image_side},
                       {"patch_size", cand.config.patch_size},
                       {"num_layers", cand.config.num_layers},
                       {"hidden_c", cand.config.hidden_c},
                       {"mlp_ds", cand.config.mlp_ds},
                       {"mlp_dc", cand.config.mlp_dc}};
        m["metrics"] = {{"sen", cand.metrics.sen},
                        {"spe", cand.metrics.spe},
                        {"auc", cand.metrics.auc},
                        {"acc", cand.metrics.acc},
                        {"balance", cand.metrics.balance}};
        models.push_back(std::move(m));
    }
    manifest["models"] = std::move(models);

    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
}

LoadedModelSet load_model_set(const std::filesystem::path &dir,
                              std::vector<std::string> *warnings) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("cannot open " + manifest_path.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::parse_error &e) {
        throw std::runtime_error("malformed manifest " + manifest_path.string() + ": " +
                                 e.what());
    }

    if (!manifest.contains("version") || !manifest["version"].is_number_integer()) {
        throw std::runtime_error("manifest missing version");
    }
    if (manifest["version"].get<int>() != kModelSetVersion) {
        throw std::runtime_error("unsupported model set version " +
                                 manifest["version"].dump());
    }
    if (!manifest.contains("models") || !manifest["models"].is_array()) {
        throw std::runtime_error("manifest missing models array");
    }
    check_known_keys(manifest, {"version", "models"}, "manifest", warnings);

    LoadedModelSet loaded;
    for (const json &m : manifest["models"]) {
        check_known_keys(m, {"id", "file", "checksum", "weight", "config", "metrics"},
                         "model entry", warnings);
        Candidate cand;
        cand.id = m.at("id").get<std::uint64_t>();
        const json &c = m.at("config");
        check_known_keys(c,
                         {"image_side", "patch_size", "num_layers", "hidden_c", "mlp_ds",
                          "mlp_dc"},
                         "model config", warnings);
        cand.config.image_side = c.at("image_side").get<int>();
        cand.config.patch_size = c.at("patch_size").get<int>();
        cand.config.num_layers = c.at("num_layers").get<int>();
        cand.config.hidden_c = c.at("hidden_c").get<int>();
        cand.config.mlp_ds = c.at("mlp_ds").get<int>();
        cand.config.mlp_dc = c.at("mlp_dc").get<int>();
        validate(cand.config);

        const json &mx = m.at("metrics");
        check_known_keys(mx, {"sen", "spe", "auc", "acc", "balance"}, "model metrics",
                         warnings);
        cand.metrics.sen = mx.at("sen").get<double>();
        cand.metrics.spe = mx.at("spe").get<double>();
        cand.metrics.auc = mx.at("auc").get<double>();
        cand.metrics.acc = mx.at("acc").get<double>();
        cand.metrics.balance = mx.at("balance").get<double>();
        cand.metrics_valid = true;

        const auto blob_path = dir / m.at("file").get<std::string>();
        std::ifstream blob(blob_path, std::ios::binary);
        if (!blob) throw std::runtime_error("cannot open " + blob_path.string());
        std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(blob)),
                                         std::istreambuf_iterator<char>());
        const std::size_t expected = 4 * param_count(cand.config);
        if (bytes.size() != expected) {
            throw std::runtime_error(blob_path.string() + " has " +
                                     std::to_string(bytes.size()) + " bytes, expected " +
                                     std::to_string(expected));
        }
        if (hex64(fnv1a64(bytes)) != m.at("checksum").get<std::string>()) {
            throw std::runtime_error("checksum mismatch for " + blob_path.string());
        }
        cand.params = decode_blob(bytes);

        loaded.weights.push_back(m.at("weight").get<double>());
        loaded.set.models.push_back(std::move(cand));
    }
    return loaded;
}

}  // namespace automo
