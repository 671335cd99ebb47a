#include "automo/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace automo {

namespace fs = std::filesystem;

namespace {

float clamp01(double v) { return static_cast<float>(std::min(1.0, std::max(0.0, v))); }

// PGM tokens may be separated by whitespace and '#' comments.
std::string next_pgm_token(std::istream &in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

int parse_pgm_int(std::istream &in, const std::string &what, const fs::path &file) {
    const std::string tok = next_pgm_token(in);
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception &) {
        throw std::runtime_error(file.string() + ": malformed PGM header (" + what + ")");
    }
}

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

Image read_pgm(const fs::path &file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image file " + file.string());
    const std::string magic = next_pgm_token(in);
    if (magic != "P5")
        throw std::runtime_error(file.string() + ": malformed PGM header (magic '" + magic +
                                 "', expected P5)");
    const int width = parse_pgm_int(in, "width", file);
    const int height = parse_pgm_int(in, "height", file);
    const int maxval = parse_pgm_int(in, "maxval", file);
    if (width != height)
        throw std::runtime_error(file.string() + ": image must be square, got " +
                                 std::to_string(width) + "x" + std::to_string(height));
    if (maxval != 255)
        throw std::runtime_error(file.string() + ": only 8-bit PGM supported (maxval 255)");
    // the single whitespace byte after maxval was already consumed by the tokenizer
    std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height);
    in.read(reinterpret_cast<char *>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw std::runtime_error(file.string() + ": truncated PGM pixel data");
    Image img(width);
    for (std::size_t i = 0; i < raw.size(); ++i)
        img.pixels[i] = static_cast<float>(raw[i]) / 255.0f;
    return img;
}

void write_pgm(const fs::path &file, const Image &img) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image file " + file.string());
    out << "P5\n" << img.side << " " << img.side << "\n255\n";
    std::vector<unsigned char> raw(img.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = std::min(1.0, std::max(0.0, static_cast<double>(img.pixels[i])));
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char *>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw std::runtime_error("failed writing " + file.string());
}

Image resize_nearest(const Image &img, int target_side) {
    if (img.side == target_side) return img;
    Image out(target_side);
    for (int y = 0; y < target_side; ++y) {
        const int sy = std::min(img.side - 1, y * img.side / target_side);
        for (int x = 0; x < target_side; ++x) {
            const int sx = std::min(img.side - 1, x * img.side / target_side);
            out.at(y, x) = img.at(sy, sx);
        }
    }
    return out;
}

Dataset load_manifest(const fs::path &manifest, int target_side, Split split) {
    std::ifstream in(manifest);
    if (!in) throw std::runtime_error("cannot open manifest " + manifest.string());
    std::string line;
    if (!std::getline(in, line) || trim(line) != "path,label")
        throw std::runtime_error(manifest.string() + ": manifest must start with 'path,label'");
    Dataset ds;
    ds.split = split;
    std::set<std::string> seen;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto comma = t.rfind(',');
        if (comma == std::string::npos)
            throw std::runtime_error(manifest.string() + ":" + std::to_string(row) +
                                     ": expected 'path,label'");
        const std::string path = trim(t.substr(0, comma));
        const std::string label_text = trim(t.substr(comma + 1));
        if (label_text != "1" && label_text != "2")
            throw std::runtime_error(manifest.string() + ":" + std::to_string(row) + ": label '" +
                                     label_text + "' outside {1,2}");
        if (!seen.insert(path).second)
            throw std::runtime_error(manifest.string() + ":" + std::to_string(row) +
                                     ": duplicate sample id '" + path + "'");
        Sample s;
        s.id = path;
        s.label = label_text == "1" ? 1 : 2;
        s.image = resize_nearest(read_pgm(manifest.parent_path() / path), target_side);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void write_dataset(const Dataset &ds, const fs::path &dir) {
    fs::create_directories(dir);
    std::ofstream manifest(dir / "manifest.csv");
    if (!manifest) throw std::runtime_error("cannot write manifest in " + dir.string());
    manifest << "path,label\n";
    for (const auto &s : ds.samples) {
        const std::string name = s.id + ".pgm";
        write_pgm(dir / name, s.image);
        manifest << name << "," << s.label << "\n";
    }
}

Dataset synth_generate(const SynthSpec &spec, std::uint64_t seed, Split split) {
    if (spec.n_per_class < 1) throw std::invalid_argument("synth: n_per_class must be >= 1");
    if (spec.side < 4) throw std::invalid_argument("synth: side must be >= 4");
    const int n_neg = spec.n_per_class;
    const int n_pos = static_cast<int>(std::llround(spec.imbalance_ratio * spec.n_per_class));

    Dataset ds;
    ds.split = split;
    const double cx = (spec.side - 1) / 2.0;
    const double cy = (spec.side - 1) / 2.0;

    auto render = [&](int label, int index) {
        Rng rng(derive_seed(seed, stream::kSynth, static_cast<std::uint64_t>(label),
                            static_cast<std::uint64_t>(index)));
        const double amp = rng.uniform(0.55, 0.95);
        Image img(spec.side);
        if (label == 1) {
            // blob; wide draws approach small rings in appearance
            const double sigma = rng.uniform(0.10, 0.24) * spec.side;
            for (int y = 0; y < spec.side; ++y)
                for (int x = 0; x < spec.side; ++x) {
                    const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                    img.at(y, x) = clamp01(amp * std::exp(-r2 / (2.0 * sigma * sigma)));
                }
        } else {
            const double radius = rng.uniform(0.16, 0.34) * spec.side;
            const double width = rng.uniform(0.05, 0.09) * spec.side;
            for (int y = 0; y < spec.side; ++y)
                for (int x = 0; x < spec.side; ++x) {
                    const double r = std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy));
                    const double d = r - radius;
                    img.at(y, x) = clamp01(amp * std::exp(-d * d / (2.0 * width * width)));
                }
        }
        if (spec.noise_sigma > 0.0)
            for (auto &p : img.pixels) p = clamp01(p + rng.normal(0.0, spec.noise_sigma));
        Sample s;
        s.id = (label == 1 ? "pos_" : "neg_") + std::to_string(index);
        s.label = label;
        s.image = std::move(img);
        return s;
    };

    for (int i = 0; i < n_pos; ++i) ds.samples.push_back(render(1, i));
    for (int i = 0; i < n_neg; ++i) ds.samples.push_back(render(2, i));
    return ds;
}

AugSpec parse_aug_spec(const std::string &text) {
    const std::string t = trim(text);
    AugSpec spec;
    if (t == "flip-h") {
        spec.op = AugOp::flip_h;
        return spec;
    }
    const auto paren = t.find('(');
    const std::string name = paren == std::string::npos ? t : t.substr(0, paren);
    std::string args;
    if (paren != std::string::npos) {
        const auto close = t.rfind(')');
        if (close == std::string::npos || close < paren)
            throw std::invalid_argument("augmentation spec '" + text + "': unbalanced parens");
        args = t.substr(paren + 1, close - paren - 1);
    }
    if (name == "shift") {
        spec.op = AugOp::shift;
        std::istringstream in(args);
        char comma = 0;
        if (!(in >> spec.dx >> comma >> spec.dy) || comma != ',')
            throw std::invalid_argument("augmentation spec '" + text + "': expected shift(dx,dy)");
        return spec;
    }
    if (name == "gauss-noise") {
        spec.op = AugOp::gauss_noise;
        try {
            spec.sigma = std::stod(args);
        } catch (const std::exception &) {
            throw std::invalid_argument("augmentation spec '" + text +
                                        "': expected gauss-noise(sigma)");
        }
        if (spec.sigma < 0) throw std::invalid_argument("gauss-noise sigma must be >= 0");
        return spec;
    }
    throw std::invalid_argument("unknown augmentation op '" + name + "'");
}

Image augment(const Image &img, const AugSpec &spec, Rng &rng) {
    switch (spec.op) {
        case AugOp::flip_h: {
            Image out(img.side);
            for (int y = 0; y < img.side; ++y)
                for (int x = 0; x < img.side; ++x) out.at(y, x) = img.at(y, img.side - 1 - x);
            return out;
        }
        case AugOp::shift: {
            if (spec.dx == 0 && spec.dy == 0) return img;
            Image out(img.side);
            const int n = img.side;
            for (int y = 0; y < n; ++y) {
                const int sy = ((y - spec.dy) % n + n) % n;
                for (int x = 0; x < n; ++x) {
                    const int sx = ((x - spec.dx) % n + n) % n;
                    out.at(y, x) = img.at(sy, sx);
                }
            }
            return out;
        }
        case AugOp::gauss_noise: {
            if (spec.sigma == 0.0) return img;
            Image out = img;
            for (auto &p : out.pixels) p = clamp01(p + rng.normal(0.0, spec.sigma));
            return out;
        }
    }
    throw std::invalid_argument("unknown augmentation op");
}

Image tta_variant(const Image &img, const TtaPolicy &policy, Rng &rng) {
    Image out = img;
    if (policy.flip && rng.uniform01() < 0.5) {
        AugSpec flip{AugOp::flip_h};
        out = augment(out, flip, rng);
    }
    if (policy.max_shift > 0) {
        AugSpec shift{AugOp::shift};
        shift.dx = static_cast<int>(rng.uniform_int(-policy.max_shift, policy.max_shift));
        shift.dy = static_cast<int>(rng.uniform_int(-policy.max_shift, policy.max_shift));
        out = augment(out, shift, rng);
    }
    if (policy.noise_sigma > 0.0) {
        AugSpec noise{AugOp::gauss_noise};
        noise.sigma = policy.noise_sigma;
        out = augment(out, noise, rng);
    }
    return out;
}

}  // namespace automo
