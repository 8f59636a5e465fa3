#include "core/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

namespace lfb {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'L', 'F', 'B', 'C'};
constexpr std::uint32_t kVersion = 1;

void write_bytes(std::ofstream& f, const void* p, std::size_t n) {
    f.write(static_cast<const char*>(p), std::streamsize(n));
}

template <typename T>
void write_pod(std::ofstream& f, T v) {
    write_bytes(f, &v, sizeof v);
}

void read_bytes(std::ifstream& f, void* p, std::size_t n, const std::string& path) {
    f.read(static_cast<char*>(p), std::streamsize(n));
    if (std::size_t(f.gcount()) != n)
        throw format_error("checkpoint truncated: " + path);
}

template <typename T>
T read_pod(std::ifstream& f, const std::string& path) {
    T v;
    read_bytes(f, &v, sizeof v, path);
    return v;
}

json model_config_json(const ModelConfig& cfg) {
    json j;
    j["classes"] = cfg.classes;
    j["image_size"] = cfg.image_size;
    j["base_channels"] = cfg.base_channels;
    j["latent_channels"] = cfg.latent_channels;
    j["feedback_base"] = cfg.feedback_base;
    j["use_se"] = cfg.use_se;
    j["se_reduction"] = cfg.se_reduction;
    j["merge"] = cfg.merge;
    return j;
}

ModelConfig model_config_from(const json& j) {
    static const std::set<std::string> allowed = {
        "classes", "image_size", "base_channels", "latent_channels",
        "feedback_base", "use_se", "se_reduction", "merge"};
    require(j.is_object(), "model config: not a JSON object");
    for (const auto& item : j.items())
        require(allowed.count(item.key()) > 0,
                "model config: unknown key '" + item.key() + "'");
    ModelConfig cfg;
    auto get = [&](const char* k, auto& dst) {
        if (j.contains(k)) dst = j.at(k).get<std::decay_t<decltype(dst)>>();
    };
    get("classes", cfg.classes);
    get("image_size", cfg.image_size);
    get("base_channels", cfg.base_channels);
    get("latent_channels", cfg.latent_channels);
    get("feedback_base", cfg.feedback_base);
    get("use_se", cfg.use_se);
    get("se_reduction", cfg.se_reduction);
    get("merge", cfg.merge);
    cfg.validate();
    return cfg;
}

json meta_json(const CheckpointMeta& m) {
    json j;
    j["format"] = "lfbnet-checkpoint";
    j["variant"] = m.variant;
    j["cycle"] = m.cycle;
    j["model"] = model_config_json(m.model);
    j["normalization"] = {{"mean", m.norm.mean}, {"stddev", m.norm.stddev}};
    j["with_feedback"] = m.with_feedback;
    return j;
}

CheckpointMeta meta_from(const json& j) {
    require(j.is_object() && j.value("format", "") == "lfbnet-checkpoint",
            "checkpoint: bad metadata block");
    CheckpointMeta m;
    m.variant = j.at("variant").get<std::string>();
    require(m.variant == "fs" || m.variant == "fs_star" || m.variant == "lfb",
            "checkpoint: unknown variant '" + m.variant + "'");
    m.cycle = j.at("cycle").get<int>();
    m.model = model_config_from(j.at("model"));
    m.norm.mean = j.at("normalization").at("mean").get<double>();
    m.norm.stddev = j.at("normalization").at("stddev").get<double>();
    m.with_feedback = j.at("with_feedback").get<bool>();
    require(m.norm.stddev > 0.0, "checkpoint: non-positive normalization stddev");
    return m;
}

void write_records(std::ofstream& f, ParamSet& ps) {
    for (const auto& e : ps.entries()) {
        write_pod<std::uint32_t>(f, std::uint32_t(e.name.size()));
        write_bytes(f, e.name.data(), e.name.size());
        write_pod<std::uint32_t>(f, 4);
        const Shape4 s = e.tensor->shape;
        for (int d : {s.n, s.c, s.h, s.w}) write_pod<std::uint64_t>(f, std::uint64_t(d));
        write_bytes(f, e.tensor->data(), e.tensor->size() * sizeof(double));
    }
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
    return model_config_json(cfg).dump();
}

ModelConfig model_config_from_json(const std::string& text) {
    try {
        return model_config_from(json::parse(text));
    } catch (const json::exception& e) {
        throw format_error(std::string("model config: ") + e.what());
    }
}

std::string checkpoint_meta_json(const CheckpointMeta& meta) {
    return meta_json(meta).dump();
}

CheckpointMeta checkpoint_meta_from_json(const std::string& text) {
    try {
        return meta_from(json::parse(text));
    } catch (const json::exception& e) {
        throw format_error(std::string("checkpoint metadata: ") + e.what());
    }
}

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     ForwardSystem& fwd, FeedbackSystem* fb) {
    require(meta.with_feedback == (fb != nullptr),
            "save_checkpoint: with_feedback flag does not match systems");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot open for writing: " + path);

    write_bytes(f, kMagic, 4);
    write_pod<std::uint32_t>(f, kVersion);
    const std::string meta_text = checkpoint_meta_json(meta);
    write_pod<std::uint64_t>(f, meta_text.size());
    write_bytes(f, meta_text.data(), meta_text.size());

    write_records(f, fwd.params());
    if (fb) write_records(f, fb->params());
    if (!f.good()) throw io_error("write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open checkpoint: " + path);

    char magic[4];
    read_bytes(f, magic, 4, path);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw format_error("not a checkpoint (bad magic): " + path);
    const auto version = read_pod<std::uint32_t>(f, path);
    if (version != kVersion)
        throw format_error("unsupported checkpoint version " +
                                 std::to_string(version) + ": " + path);
    const auto meta_len = read_pod<std::uint64_t>(f, path);
    if (meta_len == 0 || meta_len > (1u << 20))
        throw format_error("bad metadata length: " + path);
    std::string meta_text(meta_len, '\0');
    read_bytes(f, meta_text.data(), meta_len, path);

    LoadedCheckpoint out;
    out.meta = checkpoint_meta_from_json(meta_text);
    out.systems = build_systems(out.meta.model, 0, out.meta.with_feedback);

    // Read every record, then fill by name and demand an exact set match.
    std::map<std::string, Tensor4> records;
    while (true) {
        std::uint32_t name_len;
        f.read(reinterpret_cast<char*>(&name_len), sizeof name_len);
        if (f.gcount() == 0 && f.eof()) break;
        if (std::size_t(f.gcount()) != sizeof name_len)
            throw format_error("checkpoint truncated: " + path);
        if (name_len == 0 || name_len > 4096)
            throw format_error("bad record name length: " + path);
        std::string name(name_len, '\0');
        read_bytes(f, name.data(), name_len, path);
        const auto rank = read_pod<std::uint32_t>(f, path);
        if (rank != 4) throw format_error("bad record rank: " + path);
        std::uint64_t dims[4];
        for (auto& d : dims) {
            d = read_pod<std::uint64_t>(f, path);
            if (d == 0 || d > (1u << 24))
                throw format_error("bad record dims: " + path);
        }
        Tensor4 t({int(dims[0]), int(dims[1]), int(dims[2]), int(dims[3])});
        read_bytes(f, t.data(), t.size() * sizeof(double), path);
        if (!records.emplace(std::move(name), std::move(t)).second)
            throw format_error("duplicate record in checkpoint: " + path);
    }

    auto fill = [&](ParamSet& ps) {
        for (auto& e : ps.entries()) {
            auto it = records.find(e.name);
            if (it == records.end())
                throw format_error("checkpoint missing record '" + e.name + "': " +
                                         path);
            if (!(it->second.shape == e.tensor->shape))
                throw format_error("checkpoint record '" + e.name +
                                         "' has shape " + it->second.shape.str() +
                                         ", expected " + e.tensor->shape.str() + ": " + path);
            *e.tensor = std::move(it->second);
            records.erase(it);
        }
    };
    fill(out.systems.forward->params());
    if (out.systems.feedback) fill(out.systems.feedback->params());
    if (!records.empty())
        throw format_error("checkpoint has " + std::to_string(records.size()) +
                                 " unexpected records (first: '" +
                                 records.begin()->first + "'): " + path);
    return out;
}

}  // namespace lfb
