#pragma once

#include "fdx/core/dialogue.hpp"
#include "fdx/core/serialize.hpp"
#include "fdx/runtime/session.hpp"

#include <filesystem>

namespace fdx::runtime {

struct UserSpan {
    FrameIndex start = 0;
    FrameIndex end = 0;  // one past the last audio frame

    friend bool operator==(const UserSpan&, const UserSpan&) = default;
};

// User side of a session: one input per frame plus the user utterance spans
// the duplex measurements anchor on.
struct ScriptedFeed {
    std::vector<TickInput> inputs;
    std::vector<UserSpan> user_spans;
    std::optional<int> initial_scene;

    int size() const { return static_cast<int>(inputs.size()); }
};

// Listen tokens, scene changes and barge-in marks from the script's user
// utterances and events.
ScriptedFeed feed_from_script(const DialogueScript& s, const Vocabulary& v);
// Listen tokens and scene changes from a composed timeline (keeps injected
// noise); spans and barge-in marks from the script.
ScriptedFeed feed_from_timeline(const Timeline& t, const DialogueScript& s);
// Inputs received live: user spans are the maximal runs of voiced listen
// tokens.
ScriptedFeed feed_from_inputs(const std::vector<TickInput>& inputs, std::optional<int> initial_scene,
                              const Vocabulary& v);

enum class ClockMode { Lockstep, Realtime };

std::string clock_mode_name(ClockMode m);
ClockMode parse_clock_mode(const std::string& s);

struct RunOptions {
    std::uint64_t seed = 0;
    model::SamplingPolicy policy;
    FrameSpec frame_spec;
};

// -1 marks a barge-in never answered or a turn never taken.
struct DuplexMetrics {
    std::vector<int> barge_in_response_frames;
    std::vector<int> turn_take_latency_frames;

    friend bool operator==(const DuplexMetrics&, const DuplexMetrics&) = default;
};

struct SessionRun {
    std::vector<TickOutput> trace;
    DuplexMetrics duplex;
    int overrun_count = 0;
};

// Lockstep ticks back to back with tick_wall_time 0. Realtime ticks once per
// frame_ms on a steady clock and counts overruns without skipping frames.
SessionRun run_scripted_session(std::shared_ptr<const Params> params, const ScriptedFeed& feed, ClockMode mode,
                                const RunOptions& opt = {});

inline constexpr int kNotApplicable = -2;

// Frames from a user onset until the assistant's speech next falls to SIL.
// Unmarked onsets count only when the assistant speaks at the onset
// (kNotApplicable otherwise). A marked barge-in also counts speech that
// starts after the onset, so a reply that lags behind the user is measured
// until it yields. -1 when the assistant never falls silent.
int barge_in_response(const std::vector<TickOutput>& trace, FrameIndex onset, bool marked, int sil);
// Frames from a user end until the assistant's first non-SIL speak frame;
// kNotApplicable when the assistant is speaking at the end, -1 when it never
// speaks afterwards.
int turn_take_latency(const std::vector<TickOutput>& trace, FrameIndex end, int sil);

// Applies both measures to every user span of the feed, keeping the
// applicable ones.
DuplexMetrics measure_duplex(const std::vector<TickOutput>& trace, const ScriptedFeed& feed, int sil);

// The timeline a lockstep session consumed: feed listen and scenes with the
// trace's model-side tokens.
Timeline session_timeline(const ScriptedFeed& feed, const std::vector<TickOutput>& trace, const Vocabulary& v,
                          const FrameSpec& spec = {});

json tick_output_fields(const TickOutput& o);
TickOutput tick_output_from_fields(const json& j);

// JSONL, one versioned TickOutput per line.
void write_trace(const std::vector<TickOutput>& trace, const std::filesystem::path& path);
std::vector<TickOutput> read_trace(const std::filesystem::path& path);

json metrics_document(const DuplexMetrics& m, int overrun_count);

} // namespace fdx::runtime
