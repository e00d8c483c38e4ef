#include "fdx/model/cost.hpp"

#include "fdx/core/error.hpp"

namespace fdx::model {

AttentionCost attention_cost(std::int64_t horizon_frames, CostMode mode, int channels_serialized) {
    if (horizon_frames < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be >= 1 frame");
    AttentionCost c;
    if (mode.kind == CostMode::Kind::Parallel) {
        c.sequence_positions = horizon_frames;
        c.worst_case_response_frames = 1;
    } else {
        if (mode.chunk_frames < 1) throw Error(ErrorCode::InvalidArgument, "chunk must be >= 1 frame");
        if (channels_serialized < 2) throw Error(ErrorCode::InvalidArgument, "TDM serializes at least 2 channels");
        c.sequence_positions = channels_serialized * horizon_frames;
        c.worst_case_response_frames = mode.chunk_frames;
    }
    c.attention_pair_count = c.sequence_positions * (c.sequence_positions + 1) / 2;
    return c;
}

Rational pair_ratio(const AttentionCost& a, const AttentionCost& b) {
    return Rational::reduced(a.attention_pair_count, b.attention_pair_count);
}

} // namespace fdx::model
