#include "fdx/model/parameters.hpp"

#include "fdx/core/error.hpp"
#include "fdx/core/random.hpp"

#include <cmath>

namespace fdx::model {

namespace {

class LayoutBuilder {
public:
    explicit LayoutBuilder(ParamLayout& l) : l_(l) {}

    std::size_t add(std::string name, std::vector<int> shape) {
        std::size_t size = 1;
        for (int d : shape) size *= static_cast<std::size_t>(d);
        const std::size_t off = l_.total;
        l_.tensors.push_back(TensorInfo{std::move(name), std::move(shape), off, size});
        l_.total += size;
        return off;
    }

private:
    ParamLayout& l_;
};

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

const TensorInfo& ParamLayout::find(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t;
    }
    throw Error(ErrorCode::InvalidArgument, "no tensor named " + name);
}

ParamLayout make_layout(const ModelConfig& cfg) {
    cfg.validate();
    ParamLayout l;
    LayoutBuilder b(l);
    const int d = cfg.d_model;
    const auto& v = cfg.vocab;
    l.emb_listen = b.add("embed.listen", {v.audio_size, d});
    l.emb_speak = b.add("embed.speak", {v.audio_size, d});
    l.emb_text = b.add("embed.text", {v.text_size, d});
    l.emb_action = b.add("embed.action", {v.action_size, d});
    l.pos = b.add("embed.position", {cfg.max_frames, d});
    l.vis_w = b.add("visual.w", {cfg.d_v, d});
    l.vis_b = b.add("visual.b", {d});
    for (int i = 0; i < cfg.n_layers; ++i) {
        const std::string p = "layer" + std::to_string(i) + ".";
        LayerOffsets o{};
        o.ln1_g = b.add(p + "ln1.g", {d});
        o.ln1_b = b.add(p + "ln1.b", {d});
        o.wq = b.add(p + "attn.wq", {d, d});
        o.bq = b.add(p + "attn.bq", {d});
        o.wk = b.add(p + "attn.wk", {d, d});
        o.bk = b.add(p + "attn.bk", {d});
        o.wv = b.add(p + "attn.wv", {d, d});
        o.bv = b.add(p + "attn.bv", {d});
        o.wo = b.add(p + "attn.wo", {d, d});
        o.bo = b.add(p + "attn.bo", {d});
        o.ln2_g = b.add(p + "ln2.g", {d});
        o.ln2_b = b.add(p + "ln2.b", {d});
        o.w1 = b.add(p + "ff.w1", {d, cfg.d_ff});
        o.b1 = b.add(p + "ff.b1", {cfg.d_ff});
        o.w2 = b.add(p + "ff.w2", {cfg.d_ff, d});
        o.b2 = b.add(p + "ff.b2", {d});
        l.layers.push_back(o);
    }
    l.lnf_g = b.add("final_ln.g", {d});
    l.lnf_b = b.add("final_ln.b", {d});
    l.text_w = b.add("head.text.w", {d, v.text_size});
    l.text_b = b.add("head.text.b", {v.text_size});
    l.speak_w = b.add("head.speak.w", {d, v.audio_size});
    l.speak_b = b.add("head.speak.b", {v.audio_size});
    l.action_w = b.add("head.action.w", {d, v.action_size});
    l.action_b = b.add("head.action.b", {v.action_size});
    return l;
}

template <typename T>
Parameters<T> wrap_parameters(const ModelConfig& cfg, std::vector<T> values) {
    auto layout = std::make_shared<const ParamLayout>(make_layout(cfg));
    if (values.size() != layout->total)
        throw Error(ErrorCode::DimMismatch, "parameter vector has " + std::to_string(values.size()) +
                                                " values, layout needs " + std::to_string(layout->total));
    auto scenes = std::make_shared<const SceneBank>(cfg.vocab.num_scenes, cfg.d_v, cfg.scene_seed);
    return Parameters<T>{cfg, std::move(layout), std::move(scenes), std::move(values)};
}

template Parameters<float> wrap_parameters(const ModelConfig&, std::vector<float>);
template Parameters<double> wrap_parameters(const ModelConfig&, std::vector<double>);

Parameters<float> init_parameters(const ModelConfig& cfg) {
    const ParamLayout layout = make_layout(cfg);
    std::vector<float> values(layout.total, 0.0f);
    Rng rng(cfg.seed);
    const double s = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    for (const auto& t : layout.tensors) {
        float* w = values.data() + t.offset;
        const bool is_gain = ends_with(t.name, ".g");
        const bool is_bias = t.shape.size() == 1 && !is_gain;
        for (std::size_t i = 0; i < t.size; ++i) {
            if (is_gain) w[i] = 1.0f;
            else if (is_bias) w[i] = 0.0f;
            else w[i] = static_cast<float>(rng.uniform(-s, s));
        }
    }
    return wrap_parameters(cfg, std::move(values));
}

bool all_finite(const std::vector<float>& v) {
    for (float x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

} // namespace fdx::model
