#pragma once

#include "fdx/core/frame.hpp"
#include "fdx/core/random.hpp"
#include "fdx/model/parameters.hpp"
#include "fdx/model/sampling.hpp"
#include "fdx/model/transformer.hpp"

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fdx::runtime {

using Params = model::Parameters<float>;

enum class Mode { Idle, UserSpeaking, AssistantSpeaking, Overlap };

std::string mode_name(Mode m);
Mode parse_mode(const std::string& s);

// SIL versus anything else on each side.
Mode classify_mode(int listen, int speak, const Vocabulary& v);

struct TickInput {
    int listen = 0;
    std::optional<int> scene;  // SceneSet taking effect at this frame
    bool barge_in_mark = false;

    friend bool operator==(const TickInput&, const TickInput&) = default;
};

struct TickOutput {
    FrameIndex frame = 0;
    int speak = 0;
    int text = 0;
    int action = 0;
    Mode mode = Mode::Idle;
    std::int64_t tick_wall_time_us = 0;  // 0 unless the session is timed

    friend bool operator==(const TickOutput&, const TickOutput&) = default;
};

struct SessionMetrics {
    std::vector<std::int64_t> tick_wall_time_us;
    std::vector<FrameIndex> barge_in_marks;
    int overrun_count = 0;
};

struct SessionState {
    std::shared_ptr<const Params> params;
    FrameIndex frame = 0;
    model::DecodeCache<float> cache;
    Mode mode = Mode::Idle;
    std::optional<int> scene;
    std::deque<int> pending;  // queued listen tokens
    SessionMetrics metrics;
    std::uint64_t seed = 0;
    model::SamplingPolicy policy;
    Rng rng{0};
    // Model-side tokens of the coming frame, sampled on the previous tick.
    model::SampledTokens next;
    bool timed = false;
    bool ended = false;
};

// Throws ConfigMismatch when cfg differs from the parameters' config. In
// ContextPrefix mode the initial scene becomes the session's visual context.
SessionState new_session(std::shared_ptr<const Params> params, const model::ModelConfig& cfg,
                         std::optional<int> scene, std::uint64_t seed,
                         const model::SamplingPolicy& policy = model::SamplingPolicy::greedy());

// Assembles the frame from the input listen token and the model's own
// previous outputs (fill tokens on the first tick), runs one decode step and
// samples the next frame's tokens. The output describes the frame just
// consumed. Throws SessionExhausted at max_frames and InvalidArgument on
// out-of-range ids.
TickOutput session_tick(SessionState& s, const TickInput& in);

// The frame session_tick will assemble for this input, without advancing.
TimelineFrame assemble_frame(const SessionState& s, const TickInput& in);

void queue_listen(SessionState& s, const std::vector<int>& audio);
// Pops the next queued listen token, or SIL when the queue is empty.
TickInput next_queued_input(SessionState& s);

} // namespace fdx::runtime
