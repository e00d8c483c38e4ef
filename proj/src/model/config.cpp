#include "fdx/model/config.hpp"

#include "fdx/core/error.hpp"
#include "fdx/core/random.hpp"

#include <cstdio>

namespace fdx::model {

std::string visual_mode_name(VisualMode m) {
    switch (m) {
    case VisualMode::None: return "none";
    case VisualMode::ContextPrefix: return "context";
    case VisualMode::Stream: return "stream";
    }
    return "none";
}

VisualMode parse_visual_mode(const std::string& s) {
    if (s == "none") return VisualMode::None;
    if (s == "context") return VisualMode::ContextPrefix;
    if (s == "stream") return VisualMode::Stream;
    throw Error(ErrorCode::InvalidArgument, "unknown visual mode '" + s + "'");
}

void ModelConfig::validate() const {
    if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 || max_frames <= 0 || d_v <= 0)
        throw Error(ErrorCode::InvalidArgument, "model dimensions must be positive");
    if (d_model % n_heads != 0) throw Error(ErrorCode::InvalidArgument, "d_model must be divisible by n_heads");
    if (vocab.text_size <= 0 || vocab.audio_size <= 0 || vocab.action_size <= 0)
        throw Error(ErrorCode::InvalidArgument, "model vocabulary is empty");
}

json config_fields(const ModelConfig& c) {
    json j;
    j["d_model"] = c.d_model;
    j["n_layers"] = c.n_layers;
    j["n_heads"] = c.n_heads;
    j["d_ff"] = c.d_ff;
    j["max_frames"] = c.max_frames;
    j["vocab"] = vocabulary_fields(c.vocab);
    j["visual_mode"] = visual_mode_name(c.visual_mode);
    j["d_v"] = c.d_v;
    j["seed"] = c.seed;
    j["scene_seed"] = c.scene_seed;
    return j;
}

ModelConfig config_from_fields(const json& j) {
    try {
        ModelConfig c;
        c.d_model = j.at("d_model").get<int>();
        c.n_layers = j.at("n_layers").get<int>();
        c.n_heads = j.at("n_heads").get<int>();
        c.d_ff = j.at("d_ff").get<int>();
        c.max_frames = j.at("max_frames").get<int>();
        c.vocab = vocabulary_from_fields(j.at("vocab"));
        c.visual_mode = parse_visual_mode(j.at("visual_mode").get<std::string>());
        c.d_v = j.at("d_v").get<int>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.scene_seed = j.at("scene_seed").get<std::uint64_t>();
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("model config: ") + e.what());
    }
}

std::uint64_t config_hash(const ModelConfig& c) {
    const std::string s = to_line(config_fields(c));
    return fnv1a64(s.data(), s.size());
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace fdx::model
