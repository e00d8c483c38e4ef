#pragma once

#include "fdx/core/dialogue.hpp"
#include "fdx/core/timeline.hpp"

#include <cstdint>
#include <vector>

namespace fdx::align {

struct AlignConfig {
    int spk_delay = 2;
    int turn_gap = 3;
    int interrupt_truncate = 2;
    double noise_prob = 0.1;
    bool strict = true;

    void validate() const;
};

enum class Channel { Listen, Speak, Text };

struct ChannelSegment {
    Channel channel = Channel::Text;
    FrameIndex start_frame = 0;
    std::vector<int> tokens;

    FrameIndex end_frame() const { return start_frame + static_cast<int>(tokens.size()); }
    friend bool operator==(const ChannelSegment&, const ChannelSegment&) = default;
};

enum class StreamMode { TextFirst, WordLevel };

// Text-first placement: the first audio token sits at the utterance start t,
// the whole transcript is laid out from t - spk_delay, then WAIT until the
// last audio frame. User utterances only contribute their audio.
std::vector<ChannelSegment> align_text_first(const Utterance& u, const AlignConfig& cfg, const Vocabulary& vocab);

// Word-level baseline: each token at start_frame + word_times[k], EPAD on the
// frame before a word that follows a gap, PAD elsewhere up to the end of the
// audio.
std::vector<ChannelSegment> align_word_level(const Utterance& u, int horizon, const Vocabulary& vocab);

Timeline compose_timeline(const DialogueScript& script, StreamMode mode, const AlignConfig& cfg,
                          const Vocabulary& vocab, const FrameSpec& spec = {});

// Truncates the assistant speech interrupted by every BargeIn event.
Timeline inject_interruption(const Timeline& t, const DialogueScript& script, const AlignConfig& cfg);

Timeline inject_noise(const Timeline& t, const AlignConfig& cfg, std::uint64_t seed);

struct RecoveredTranscript {
    FrameIndex start_frame = 0;
    std::vector<int> tokens;

    friend bool operator==(const RecoveredTranscript&, const RecoveredTranscript&) = default;
};

// Maximal non-WAIT runs of the text channel, in frame order.
std::vector<RecoveredTranscript> strip_transcript(const Timeline& t);

} // namespace fdx::align
