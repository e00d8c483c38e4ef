#pragma once

#include <cstdint>
#include <vector>

namespace fdx {

struct SceneVector {
    int scene_id = 0;
    std::vector<float> features;

    friend bool operator==(const SceneVector&, const SceneVector&) = default;
};

// Fixed feature vectors for every scene id, drawn once from a seed.
class SceneBank {
public:
    SceneBank() = default;
    SceneBank(int num_scenes, int d_v, std::uint64_t seed);

    int size() const { return static_cast<int>(scenes_.size()); }
    int dim() const { return d_v_; }
    const SceneVector& at(int scene_id) const;

    friend bool operator==(const SceneBank&, const SceneBank&) = default;

private:
    int d_v_ = 0;
    std::vector<SceneVector> scenes_;
};

} // namespace fdx
