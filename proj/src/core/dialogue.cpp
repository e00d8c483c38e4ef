#include "fdx/core/dialogue.hpp"

#include <algorithm>

namespace fdx {

FrameIndex event_frame(const ScriptEvent& e) {
    return std::visit([](const auto& ev) { return ev.frame; }, e);
}

ValidationReport validate_utterance(const Utterance& u, const Vocabulary& vocab) {
    ValidationReport r;
    auto bad = [&](std::string field, std::string msg) {
        r.violations.push_back(Violation{u.start_frame, std::move(field), std::move(msg)});
    };
    if (u.start_frame < 0) bad("start_frame", "negative start frame");
    if (!u.transcript.empty() && u.audio.empty()) bad("audio", "transcript without audio");
    for (int w : u.transcript) {
        if (w < vocab.first_free_text() || w >= vocab.text_size) bad("transcript", "special or out-of-range text id");
    }
    for (int a : u.audio) {
        if (a == vocab.sil || a < 0 || a >= vocab.audio_size) bad("audio", "SIL or out-of-range audio id");
    }
    if (u.word_times) {
        const auto& wt = *u.word_times;
        if (wt.size() != u.transcript.size()) bad("word_times", "one offset per transcript token required");
        for (std::size_t k = 0; k < wt.size(); ++k) {
            if (wt[k] < 0 || wt[k] >= static_cast<int>(u.audio.size())) bad("word_times", "offset outside audio");
            if (k > 0 && wt[k] <= wt[k - 1]) bad("word_times", "offsets must be strictly increasing");
        }
    }
    return r;
}

ValidationReport validate_script(const DialogueScript& s, const Vocabulary& vocab) {
    ValidationReport r;
    if (s.horizon < 0) r.violations.push_back({std::nullopt, "horizon", "negative horizon"});
    for (std::size_t i = 0; i < s.utterances.size(); ++i) {
        auto ur = validate_utterance(s.utterances[i], vocab);
        for (auto& v : ur.violations) {
            v.field = "utterance " + std::to_string(i) + " " + v.field;
            r.violations.push_back(std::move(v));
        }
        if (i > 0 && s.utterances[i].start_frame < s.utterances[i - 1].start_frame)
            r.violations.push_back({s.utterances[i].start_frame, "utterances", "not sorted by start_frame"});
    }
    for (std::size_t i = 0; i < s.utterances.size(); ++i) {
        for (std::size_t j = i + 1; j < s.utterances.size(); ++j) {
            const auto& a = s.utterances[i];
            const auto& b = s.utterances[j];
            if (a.speaker != b.speaker) continue;
            if (a.start_frame < b.end_frame() && b.start_frame < a.end_frame())
                r.violations.push_back({b.start_frame, "utterances",
                                        "same-speaker utterances " + std::to_string(i) + " and " +
                                            std::to_string(j) + " overlap"});
        }
    }
    for (const auto& e : s.events) {
        const FrameIndex f = event_frame(e);
        if (f < 0 || f >= s.horizon) r.violations.push_back({f, "events", "event frame outside horizon"});
        if (const auto* ss = std::get_if<SceneSet>(&e)) {
            if (ss->scene_id < 0 || ss->scene_id >= vocab.num_scenes)
                r.violations.push_back({f, "events", "scene id out of range"});
        }
        if (const auto* nb = std::get_if<NoiseBurst>(&e)) {
            if (nb->length <= 0) r.violations.push_back({f, "events", "noise burst needs positive length"});
        }
    }
    return r;
}

} // namespace fdx
