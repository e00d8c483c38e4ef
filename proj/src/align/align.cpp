#include "fdx/align/align.hpp"

#include "fdx/core/error.hpp"
#include "fdx/core/random.hpp"

#include <algorithm>
#include <array>
#include <map>

namespace fdx::align {

void AlignConfig::validate() const {
    if (spk_delay < 0) throw Error(ErrorCode::InvalidArgument, "spk_delay must be >= 0");
    if (turn_gap < 0) throw Error(ErrorCode::InvalidArgument, "turn_gap must be >= 0");
    if (interrupt_truncate < 0) throw Error(ErrorCode::InvalidArgument, "interrupt_truncate must be >= 0");
    if (!(noise_prob >= 0.0 && noise_prob <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "noise_prob must lie in [0, 1]");
}

namespace {

Channel audio_channel(Speaker s) { return s == Speaker::User ? Channel::Listen : Channel::Speak; }

ChannelSegment audio_segment(const Utterance& u) {
    if (u.audio.empty()) throw Error(ErrorCode::InvalidUtterance, "utterance has no audio");
    return ChannelSegment{audio_channel(u.speaker), u.start_frame, u.audio};
}

} // namespace

std::vector<ChannelSegment> align_text_first(const Utterance& u, const AlignConfig& cfg, const Vocabulary& vocab) {
    cfg.validate();
    if (u.start_frame < 0) throw Error(ErrorCode::InvalidUtterance, "negative start frame");
    std::vector<ChannelSegment> out;
    out.push_back(audio_segment(u));
    if (u.speaker == Speaker::User) return out;

    if (u.transcript.empty()) throw Error(ErrorCode::InvalidUtterance, "assistant utterance has no transcript");
    const int t = u.start_frame;
    const int n_a = static_cast<int>(u.audio.size());
    const int n_w = static_cast<int>(u.transcript.size());
    if (cfg.strict && t < cfg.spk_delay) {
        throw Error(ErrorCode::StartTooEarly, "utterance starts at frame " + std::to_string(t) +
                                                  " but the monologue needs a lead of " +
                                                  std::to_string(cfg.spk_delay));
    }
    const int mono_start = std::max(0, t - cfg.spk_delay);
    const int lead = t - mono_start;
    if (n_w > lead + n_a) {
        throw Error(ErrorCode::OverlongMonologue, std::to_string(n_w) + " text tokens cannot finish within " +
                                                      std::to_string(lead) + " lead + " + std::to_string(n_a) +
                                                      " audio frames");
    }
    ChannelSegment text{Channel::Text, mono_start, u.transcript};
    text.tokens.resize(static_cast<std::size_t>(lead + n_a), vocab.text.wait);
    out.push_back(std::move(text));
    return out;
}

std::vector<ChannelSegment> align_word_level(const Utterance& u, int horizon, const Vocabulary& vocab) {
    if (u.start_frame < 0) throw Error(ErrorCode::InvalidUtterance, "negative start frame");
    std::vector<ChannelSegment> out;
    out.push_back(audio_segment(u));
    if (u.speaker == Speaker::Assistant) {
        if (u.transcript.empty()) throw Error(ErrorCode::InvalidUtterance, "assistant utterance has no transcript");
        if (!u.word_times) throw Error(ErrorCode::MissingTimestamps, "word-level alignment needs word_times");
        const auto& wt = *u.word_times;
        const int n_a = static_cast<int>(u.audio.size());
        if (wt.size() != u.transcript.size())
            throw Error(ErrorCode::InvalidUtterance, "word_times must have one offset per transcript token");
        for (std::size_t k = 0; k < wt.size(); ++k) {
            if (k > 0 && wt[k] == wt[k - 1])
                throw Error(ErrorCode::CollidingWords, "words " + std::to_string(k - 1) + " and " +
                                                           std::to_string(k) + " share frame offset " +
                                                           std::to_string(wt[k]));
            if (wt[k] < 0 || wt[k] >= n_a) throw Error(ErrorCode::InvalidUtterance, "word offset outside audio");
            if (k > 0 && wt[k] < wt[k - 1])
                throw Error(ErrorCode::InvalidUtterance, "word offsets must be strictly increasing");
        }
        ChannelSegment text{Channel::Text, u.start_frame,
                            std::vector<int>(static_cast<std::size_t>(n_a), vocab.text.pad)};
        int prev = -1;
        for (std::size_t k = 0; k < wt.size(); ++k) {
            const int off = wt[k];
            text.tokens[static_cast<std::size_t>(off)] = u.transcript[k];
            if (off - 1 > prev) text.tokens[static_cast<std::size_t>(off - 1)] = vocab.text.epad;
            prev = off;
        }
        out.push_back(std::move(text));
    }
    for (const auto& seg : out) {
        if (seg.end_frame() > horizon)
            throw Error(ErrorCode::OutOfHorizon, "segment ends at frame " + std::to_string(seg.end_frame()) +
                                                     " beyond horizon " + std::to_string(horizon));
    }
    return out;
}

namespace {

int& cell(TimelineFrame& f, Channel c) {
    switch (c) {
    case Channel::Listen: return f.listen;
    case Channel::Speak: return f.speak;
    case Channel::Text: return f.text;
    }
    return f.text;
}

const char* channel_name(Channel c) {
    switch (c) {
    case Channel::Listen: return "listen";
    case Channel::Speak: return "speak";
    case Channel::Text: return "text";
    }
    return "?";
}

} // namespace

Timeline compose_timeline(const DialogueScript& input, StreamMode mode, const AlignConfig& cfg,
                          const Vocabulary& vocab, const FrameSpec& spec) {
    cfg.validate();
    spec.validate();
    // Writes do not depend on utterance order; sorting only normalizes the
    // script so its invariants can be checked.
    DialogueScript script = input;
    std::stable_sort(script.utterances.begin(), script.utterances.end(),
                     [](const Utterance& a, const Utterance& b) { return a.start_frame < b.start_frame; });
    if (auto r = validate_script(script, vocab); !r.ok()) throw Error(ErrorCode::InvalidScript, r.summary());

    Timeline t = fill_timeline(script.horizon, vocab, spec);
    // Which segment wrote each cell; equal writes from two segments are fine.
    std::array<std::vector<bool>, 3> written;
    for (auto& w : written) w.assign(static_cast<std::size_t>(script.horizon), false);

    for (std::size_t i = 0; i < script.utterances.size(); ++i) {
        std::vector<ChannelSegment> segs;
        try {
            segs = mode == StreamMode::TextFirst ? align_text_first(script.utterances[i], cfg, vocab)
                                                 : align_word_level(script.utterances[i], script.horizon, vocab);
        } catch (const Error& e) {
            throw Error(e.code(), "utterance " + std::to_string(i) + ": " + e.detail());
        }
        for (const auto& seg : segs) {
            if (seg.start_frame < 0 || seg.end_frame() > script.horizon) {
                throw Error(ErrorCode::OutOfHorizon, "utterance " + std::to_string(i) + ": " + channel_name(seg.channel) +
                                                         " segment [" + std::to_string(seg.start_frame) + ", " +
                                                         std::to_string(seg.end_frame()) + ") exceeds horizon " +
                                                         std::to_string(script.horizon));
            }
            auto& mask = written[static_cast<std::size_t>(seg.channel)];
            for (std::size_t k = 0; k < seg.tokens.size(); ++k) {
                const int f = seg.start_frame + static_cast<int>(k);
                int& slot = cell(t[f], seg.channel);
                if (mask[static_cast<std::size_t>(f)] && slot != seg.tokens[k]) {
                    throw Error(ErrorCode::OverlapWrite, "utterance " + std::to_string(i) + ": " +
                                                             channel_name(seg.channel) + " frame " +
                                                             std::to_string(f) + " already holds " +
                                                             std::to_string(slot));
                }
                slot = seg.tokens[k];
                mask[static_cast<std::size_t>(f)] = true;
            }
        }
    }

    // Scene changes persist until the next SceneSet; a timeline carries visual
    // ids on all frames or none, so the first scene must be set at frame 0.
    std::map<int, int> scene_at;
    for (const auto& e : script.events) {
        if (const auto* ss = std::get_if<SceneSet>(&e)) scene_at[ss->frame] = ss->scene_id;
    }
    if (!scene_at.empty()) {
        if (scene_at.begin()->first != 0)
            throw Error(ErrorCode::InvalidScript, "the first SceneSet must be at frame 0");
        int current = scene_at.begin()->second;
        for (int f = 0; f < t.size(); ++f) {
            if (auto it = scene_at.find(f); it != scene_at.end()) current = it->second;
            t[f].visual = current;
        }
    }

    for (const auto& e : script.events) {
        const auto* nb = std::get_if<NoiseBurst>(&e);
        if (!nb) continue;
        if (vocab.noise.empty()) throw Error(ErrorCode::InvalidScript, "NoiseBurst needs NOISE ids in the vocabulary");
        const int k = static_cast<int>(vocab.noise.size());
        for (int f = nb->frame; f < std::min(nb->frame + nb->length, t.size()); ++f) {
            if (t[f].listen == vocab.sil) t[f].listen = vocab.noise[static_cast<std::size_t>(f % k)];
        }
    }
    return t;
}

Timeline inject_interruption(const Timeline& t, const DialogueScript& script, const AlignConfig& cfg) {
    cfg.validate();
    Timeline out = t;
    const auto& vocab = t.vocab;
    for (const auto& e : script.events) {
        const auto* bi = std::get_if<BargeIn>(&e);
        if (!bi) continue;
        const int f = bi->frame;
        if (f < 0 || f >= t.size()) throw Error(ErrorCode::InvalidScript, "BargeIn frame outside timeline");
        if (t[f].speak == vocab.sil)
            throw Error(ErrorCode::NoSpeechAtFrame, "speak channel is silent at barge-in frame " + std::to_string(f));
        const bool user_onset = std::any_of(script.utterances.begin(), script.utterances.end(), [&](const Utterance& u) {
            return u.speaker == Speaker::User && u.start_frame == f;
        });
        if (!user_onset)
            throw Error(ErrorCode::InvalidScript, "no user utterance starts at barge-in frame " + std::to_string(f));
        const auto it = std::find_if(script.utterances.begin(), script.utterances.end(), [&](const Utterance& u) {
            return u.speaker == Speaker::Assistant && u.start_frame <= f && f < u.end_frame();
        });
        if (it == script.utterances.end())
            throw Error(ErrorCode::NoSpeechAtFrame, "no assistant utterance spans frame " + std::to_string(f));
        const int end = std::min(it->end_frame(), t.size());
        for (int g = f + cfg.interrupt_truncate; g < end; ++g) {
            out[g].speak = vocab.sil;
            out[g].text = vocab.text.wait;
        }
    }
    return out;
}

Timeline inject_noise(const Timeline& t, const AlignConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Timeline out = t;
    const auto& vocab = t.vocab;
    if (vocab.noise.empty() || cfg.noise_prob <= 0.0) return out;
    Rng rng(seed);
    const int k = static_cast<int>(vocab.noise.size());
    for (auto& f : out.frames) {
        if (f.listen != vocab.sil) continue;
        if (rng.bernoulli(cfg.noise_prob)) f.listen = vocab.noise[static_cast<std::size_t>(rng.below(k))];
    }
    return out;
}

std::vector<RecoveredTranscript> strip_transcript(const Timeline& t) {
    std::vector<RecoveredTranscript> runs;
    const int wait = t.vocab.text.wait;
    for (int f = 0; f < t.size(); ++f) {
        if (t[f].text == wait) continue;
        if (f == 0 || t[f - 1].text == wait) runs.push_back(RecoveredTranscript{f, {}});
        runs.back().tokens.push_back(t[f].text);
    }
    return runs;
}

} // namespace fdx::align
