#pragma once

#include "fdx/core/scene.hpp"
#include "fdx/model/config.hpp"

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace fdx::model {

struct TensorInfo {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;  // in elements
    std::size_t size = 0;
};

struct LayerOffsets {
    std::size_t ln1_g, ln1_b;
    std::size_t wq, bq, wk, bk, wv, bv, wo, bo;
    std::size_t ln2_g, ln2_b;
    std::size_t w1, b1, w2, b2;
};

// Flat parameter vector layout. Matrices are stored [in][out] row-major so a
// forward affine map is a sequence of row axpys.
struct ParamLayout {
    std::vector<TensorInfo> tensors;
    std::size_t total = 0;

    std::size_t emb_listen, emb_speak, emb_text, emb_action, pos;
    std::size_t vis_w, vis_b;
    std::vector<LayerOffsets> layers;
    std::size_t lnf_g, lnf_b;
    std::size_t text_w, text_b, speak_w, speak_b, action_w, action_b;

    const TensorInfo& find(const std::string& name) const;
};

ParamLayout make_layout(const ModelConfig& cfg);

template <typename T>
struct Parameters {
    ModelConfig config;
    std::shared_ptr<const ParamLayout> layout;
    std::shared_ptr<const SceneBank> scenes;
    std::vector<T> values;

    const T* at(std::size_t offset) const { return values.data() + offset; }
    T* at(std::size_t offset) { return values.data() + offset; }
    const ParamLayout& lay() const { return *layout; }
};

// Seeded: weights U(-s, s) with s = 1/sqrt(d_model), biases 0, norm gains 1.
Parameters<float> init_parameters(const ModelConfig& cfg);

template <typename To, typename From>
Parameters<To> cast_parameters(const Parameters<From>& p) {
    Parameters<To> out{p.config, p.layout, p.scenes, {}};
    out.values.assign(p.values.begin(), p.values.end());
    return out;
}

// Layout and scene bank for an existing value vector (used by loaders).
template <typename T>
Parameters<T> wrap_parameters(const ModelConfig& cfg, std::vector<T> values);

bool all_finite(const std::vector<float>& v);

} // namespace fdx::model
