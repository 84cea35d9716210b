#include "matt/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace matt::io {

namespace {

constexpr const char* kCheckpointFormat = "matt-checkpoint-v1";

std::ifstream open_in(const fs::path& path) {
    if (!fs::exists(path)) throw MissingInput("missing file '" + path.string() + "'");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return in;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

void finish(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in, const fs::path& path) {
    std::string tok;
    while (true) {
        int c = in.get();
        if (c == EOF) throw IoError("truncated PGM header in '" + path.string() + "'");
        if (c == '#') {
            while (c != '\n' && c != EOF) c = in.get();
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
}

int pgm_int(std::istream& in, const fs::path& path) {
    const std::string t = pgm_token(in, path);
    try {
        std::size_t used = 0;
        const int v = std::stoi(t, &used);
        if (used != t.size()) throw std::invalid_argument(t);
        return v;
    } catch (const std::exception&) {
        throw IoError("bad PGM header field '" + t + "' in '" + path.string() + "'");
    }
}

std::uint16_t to_sample(double v) {
    return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

Json parse_json(const fs::path& path) {
    std::ifstream in = open_in(path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

} // namespace

// ------------------------------------------------------------------- PGM

void write_pgm16(const fs::path& path, const DenseGrid& image) {
    std::ofstream out = open_out(path);
    out << "P5\n" << image.cols << ' ' << image.rows << "\n65535\n";
    std::vector<unsigned char> buf(image.values.size() * 2);
    for (std::size_t i = 0; i < image.values.size(); ++i) {
        const std::uint16_t s = to_sample(image.values[i]);
        buf[2 * i] = static_cast<unsigned char>(s >> 8);
        buf[2 * i + 1] = static_cast<unsigned char>(s & 0xff);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    finish(out, path);
}

DenseGrid read_pgm16(const fs::path& path) {
    std::ifstream in = open_in(path);
    if (pgm_token(in, path) != "P5") throw IoError("'" + path.string() + "' is not a binary PGM (P5)");
    const int w = pgm_int(in, path);
    const int h = pgm_int(in, path);
    const int maxval = pgm_int(in, path);
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
        throw IoError("bad PGM dimensions or maxval in '" + path.string() + "'");
    // pgm_token consumed exactly one whitespace byte after maxval.
    const std::size_t n = static_cast<std::size_t>(w) * h;
    const std::size_t bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(n * bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size())
        throw IoError("truncated PGM data in '" + path.string() + "'");
    DenseGrid g(h, w, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned s = bytes == 2 ? (unsigned{buf[2 * i]} << 8) | buf[2 * i + 1] : buf[i];
        g.values[i] = static_cast<double>(s) / maxval;
    }
    return g;
}

void write_density_pgm(const fs::path& path, const DensityGrid& density) {
    double peak = 0.0;
    for (double v : density.values) peak = std::max(peak, v);
    const double scale = peak > 0.0 ? peak : 1.0;
    DenseGrid normalized(density.rows, density.cols, 0.0);
    for (std::size_t i = 0; i < density.values.size(); ++i) normalized.values[i] = density.values[i] / scale;
    write_pgm16(path, normalized);
    Json side{{"scale", scale}, {"sum", density.sum()}};
    write_text(fs::path(path.string() + ".json"), side.dump(2) + "\n");
}

DensityGrid read_density_pgm(const fs::path& path) {
    DenseGrid g = read_pgm16(path);
    const Json side = parse_json(fs::path(path.string() + ".json"));
    if (!side.contains("scale") || !side["scale"].is_number())
        throw IoError("density sidecar for '" + path.string() + "' lacks a numeric scale");
    const double scale = side["scale"].get<double>();
    for (double& v : g.values) v *= scale;
    return g;
}

// ---------------------------------------------------------------- DotMap

Json dotmap_to_json(const DotMap& dots) {
    Json pts = Json::array();
    for (const Point& p : dots.points) pts.push_back(Json::array({p.x, p.y}));
    return {{"width", dots.width}, {"height", dots.height}, {"points", pts}};
}

DotMap dotmap_from_json(const Json& j) {
    try {
        DotMap d;
        d.width = j.at("width").get<int>();
        d.height = j.at("height").get<int>();
        for (const Json& p : j.at("points")) {
            if (!p.is_array() || p.size() != 2) throw IoError("dot entries must be [x, y]");
            d.points.push_back({p[0].get<double>(), p[1].get<double>()});
        }
        d.validate();
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed dot map: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw IoError(std::string("invalid dot map: ") + e.what());
    }
}

void write_dotmap(const fs::path& path, const DotMap& dots) {
    write_text(path, dotmap_to_json(dots).dump() + "\n");
}

DotMap read_dotmap(const fs::path& path) {
    try {
        return dotmap_from_json(parse_json(path));
    } catch (const MissingInput&) {
        throw;
    } catch (const IoError& e) {
        throw IoError("'" + path.string() + "': " + e.what());
    }
}

// ------------------------------------------------------------ checkpoint

void save_checkpoint(const fs::path& path, const ModelParams& params, std::uint64_t seed, long long step) {
    static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes little-endian");
    const auto tensors = params.tensors();
    Json shapes = Json::array();
    for (const auto& t : tensors) shapes.push_back(t.shape());
    Json header{{"format", kCheckpointFormat},
                {"model", to_json(params.config)},
                {"seed", seed},
                {"step", step},
                {"shapes", shapes}};
    std::ofstream out = open_out(path);
    out << header.dump() << '\n';
    for (const auto& t : tensors)
        out.write(reinterpret_cast<const char*>(t.data().data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    finish(out, path);
}

static Checkpoint read_checkpoint(const fs::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty checkpoint '" + path.string() + "'");
    Json header;
    try {
        header = Json::parse(line);
    } catch (const nlohmann::json::exception&) {
        throw IoError("'" + path.string() + "' is not a checkpoint (bad header)");
    }
    if (!header.is_object() || header.value("format", "") != kCheckpointFormat)
        throw IoError("'" + path.string() + "' is not a " + kCheckpointFormat + " file");
    ModelConfig config;
    try {
        config = model_from_json(header.at("model"));
    } catch (const std::exception& e) {
        throw IoError("checkpoint '" + path.string() + "' has an unusable model config: " + e.what());
    }
    Checkpoint ck{init_model(config, 0)};
    auto tensors = ck.params.tensors();
    if (!header.contains("shapes") || !header.contains("seed") || !header.contains("step"))
        throw IoError("checkpoint '" + path.string() + "' header is incomplete");
    ck.seed = header["seed"].get<std::uint64_t>();
    ck.step = header["step"].get<long long>();
    const Json& shapes = header["shapes"];
    if (!shapes.is_array() || shapes.size() != tensors.size())
        throw IoError("checkpoint '" + path.string() + "' tensor list does not match its model config");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (shapes[i].get<ad::Shape>() != tensors[i].shape())
            throw IoError("checkpoint '" + path.string() + "' tensor " + std::to_string(i) + " has a wrong shape");
        auto dst = tensors[i].mutable_data();
        in.read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(dst.size() * sizeof(double)));
        if (static_cast<std::size_t>(in.gcount()) != dst.size() * sizeof(double))
            throw IoError("checkpoint '" + path.string() + "' is truncated");
    }
    if (in.peek() != EOF) throw IoError("checkpoint '" + path.string() + "' has trailing bytes");
    return ck;
}

Checkpoint load_checkpoint(const fs::path& path) {
    try {
        return read_checkpoint(path);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("checkpoint '" + path.string() + "' has a malformed header: " + e.what());
    }
}

// -------------------------------------------------------------- manifest

namespace {

Json entry_json(const ManifestEntry& e, const std::string& role) {
    Json j{{"id", e.id}, {"role", role}, {"level", e.level}, {"count", e.count}, {"image", "images/" + e.id + ".pgm"}};
    if (role == "seed") j["dots"] = "dots/" + e.id + ".json";
    else j["hidden"] = "hidden/" + e.id + ".json";
    return j;
}

void write_entry(const fs::path& dir, const ManifestEntry& e, const std::string& role) {
    write_pgm16(dir / "images" / (e.id + ".pgm"), e.image);
    write_dotmap(dir / (role == "seed" ? "dots" : "hidden") / (e.id + ".json"), e.dots);
}

ManifestEntry read_entry(const fs::path& dir, const Json& j) {
    ManifestEntry e;
    try {
        e.id = j.at("id").get<std::string>();
        e.level = j.at("level").get<int>();
        e.count = j.at("count").get<double>();
        e.image = read_pgm16(dir / j.at("image").get<std::string>());
        const std::string dots = j.contains("dots") ? j["dots"].get<std::string>() : j.at("hidden").get<std::string>();
        e.dots = read_dotmap(dir / dots);
    } catch (const nlohmann::json::exception& ex) {
        throw IoError("malformed manifest entry: " + std::string(ex.what()));
    }
    return e;
}

} // namespace

void save_manifest(const fs::path& dir, const DatasetManifest& m) {
    fs::create_directories(dir);
    Json samples = Json::array();
    auto add = [&](const ManifestEntry& e, const std::string& role) {
        samples.push_back(entry_json(e, role));
        write_entry(dir, e, role);
    };
    add(m.seed_sample, "seed");
    for (const auto& e : m.weak_samples) add(e, "weak");
    for (const auto& e : m.val_samples) add(e, "val");
    for (const auto& e : m.test_samples) add(e, "test");
    Json j{{"generator_seed", m.generator_seed}, {"scene", to_json(m.scene_spec)}, {"samples", samples}};
    write_text(dir / "manifest.json", j.dump(2) + "\n");
}

DatasetManifest load_manifest(const fs::path& dir) {
    const Json j = parse_json(dir / "manifest.json");
    DatasetManifest m;
    try {
        m.generator_seed = j.at("generator_seed").get<std::uint64_t>();
        m.scene_spec = scene_from_json(j.at("scene"));
        bool have_seed = false;
        for (const Json& s : j.at("samples")) {
            const std::string role = s.at("role").get<std::string>();
            ManifestEntry e = read_entry(dir, s);
            if (role == "seed") {
                if (have_seed) throw IoError("manifest has more than one seed sample");
                m.seed_sample = std::move(e);
                have_seed = true;
            } else if (role == "weak") {
                m.weak_samples.push_back(std::move(e));
            } else if (role == "val") {
                m.val_samples.push_back(std::move(e));
            } else if (role == "test") {
                m.test_samples.push_back(std::move(e));
            } else {
                throw IoError("manifest sample '" + e.id + "' has unknown role '" + role + "'");
            }
        }
        if (!have_seed) throw IoError("manifest has no seed sample");
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest '" + (dir / "manifest.json").string() + "': " + e.what());
    } catch (const InvalidArgument& e) {
        throw IoError("manifest scene spec: " + std::string(e.what()));
    }
    return m;
}

// ------------------------------------------------------------------ text

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out = open_out(path);
    out << text;
    finish(out, path);
}

std::string read_text(const fs::path& path) {
    std::ifstream in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace matt::io
