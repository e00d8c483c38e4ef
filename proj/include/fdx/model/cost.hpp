#pragma once

#include "fdx/core/frame.hpp"

#include <cstdint>

namespace fdx::model {

struct CostMode {
    enum class Kind { Parallel, TDM };
    Kind kind = Kind::Parallel;
    int chunk_frames = 1;

    static CostMode parallel() { return {}; }
    static CostMode tdm(int chunk) { return {Kind::TDM, chunk}; }
};

struct AttentionCost {
    std::int64_t sequence_positions = 0;
    std::int64_t attention_pair_count = 0;
    std::int64_t worst_case_response_frames = 0;

    friend bool operator==(const AttentionCost&, const AttentionCost&) = default;
};

// Causal attention over T frames. Parallel streams share one position per
// frame; TDM serializes k channels into k*T positions and can only answer at
// the next chunk boundary.
AttentionCost attention_cost(std::int64_t horizon_frames, CostMode mode, int channels_serialized = 2);

// Exact pairs(a) / pairs(b).
Rational pair_ratio(const AttentionCost& a, const AttentionCost& b);

} // namespace fdx::model
