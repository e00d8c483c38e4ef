#pragma once

#include "fdx/core/frame.hpp"
#include "fdx/core/timeline.hpp"

#include <optional>
#include <variant>
#include <vector>

namespace fdx {

enum class Speaker { User, Assistant };

struct Utterance {
    Speaker speaker = Speaker::User;
    std::vector<int> transcript;
    std::vector<int> audio;
    FrameIndex start_frame = 0;
    // Per-transcript-token frame offsets from start_frame.
    std::optional<std::vector<int>> word_times;

    // One past the last audio frame.
    FrameIndex end_frame() const { return start_frame + static_cast<int>(audio.size()); }

    friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct BargeIn {
    FrameIndex frame = 0;
    friend bool operator==(const BargeIn&, const BargeIn&) = default;
};

struct SceneSet {
    FrameIndex frame = 0;
    int scene_id = 0;
    friend bool operator==(const SceneSet&, const SceneSet&) = default;
};

struct NoiseBurst {
    FrameIndex frame = 0;
    int length = 0;
    friend bool operator==(const NoiseBurst&, const NoiseBurst&) = default;
};

using ScriptEvent = std::variant<BargeIn, SceneSet, NoiseBurst>;

FrameIndex event_frame(const ScriptEvent& e);

struct DialogueScript {
    std::vector<Utterance> utterances;
    std::vector<ScriptEvent> events;
    int horizon = 0;

    friend bool operator==(const DialogueScript&, const DialogueScript&) = default;
};

// Checks the utterance and script invariants (ordering, same-speaker
// overlap, event frames, word timing).
ValidationReport validate_utterance(const Utterance& u, const Vocabulary& vocab);
ValidationReport validate_script(const DialogueScript& s, const Vocabulary& vocab);

} // namespace fdx
