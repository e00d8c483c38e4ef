#include "fdx/core/frame.hpp"

#include "fdx/core/error.hpp"

namespace fdx {

void FrameSpec::validate() const {
    if (frame_ms <= 0) throw Error(ErrorCode::InvalidArgument, "frame_ms must be positive");
}

FrameIndex ms_to_frames(std::int64_t ms, const FrameSpec& spec) {
    spec.validate();
    if (ms < 0) throw Error(ErrorCode::InvalidArgument, "duration must be non-negative");
    return static_cast<FrameIndex>(ms / spec.frame_ms);
}

std::int64_t frames_to_ms(FrameIndex frames, const FrameSpec& spec) {
    return static_cast<std::int64_t>(frames) * spec.frame_ms;
}

} // namespace fdx
