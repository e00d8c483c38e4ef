#include "fdx/core/scene.hpp"

#include "fdx/core/error.hpp"
#include "fdx/core/random.hpp"

namespace fdx {

SceneBank::SceneBank(int num_scenes, int d_v, std::uint64_t seed) : d_v_(d_v) {
    if (num_scenes < 0 || d_v <= 0) throw Error(ErrorCode::InvalidArgument, "scene bank needs d_v > 0");
    Rng rng(seed);
    scenes_.reserve(static_cast<std::size_t>(num_scenes));
    for (int s = 0; s < num_scenes; ++s) {
        SceneVector sv;
        sv.scene_id = s;
        sv.features.resize(static_cast<std::size_t>(d_v));
        for (auto& f : sv.features) f = static_cast<float>(rng.uniform(-1.0, 1.0));
        scenes_.push_back(std::move(sv));
    }
}

const SceneVector& SceneBank::at(int scene_id) const {
    if (scene_id < 0 || scene_id >= size())
        throw Error(ErrorCode::InvalidArgument, "scene id " + std::to_string(scene_id) + " out of range");
    return scenes_[static_cast<std::size_t>(scene_id)];
}

} // namespace fdx
