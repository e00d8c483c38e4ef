#include "fdx/runtime/session.hpp"

#include "fdx/core/error.hpp"
#include "fdx/model/config.hpp"

#include <chrono>

namespace fdx::runtime {

std::string mode_name(Mode m) {
    switch (m) {
    case Mode::Idle: return "idle";
    case Mode::UserSpeaking: return "user";
    case Mode::AssistantSpeaking: return "assistant";
    case Mode::Overlap: return "overlap";
    }
    return "idle";
}

Mode parse_mode(const std::string& s) {
    for (Mode m : {Mode::Idle, Mode::UserSpeaking, Mode::AssistantSpeaking, Mode::Overlap}) {
        if (mode_name(m) == s) return m;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown mode '" + s + "'");
}

Mode classify_mode(int listen, int speak, const Vocabulary& v) {
    const bool user = listen != v.sil;
    const bool assistant = speak != v.sil;
    if (user && assistant) return Mode::Overlap;
    if (user) return Mode::UserSpeaking;
    if (assistant) return Mode::AssistantSpeaking;
    return Mode::Idle;
}

SessionState new_session(std::shared_ptr<const Params> params, const model::ModelConfig& cfg,
                         std::optional<int> scene, std::uint64_t seed, const model::SamplingPolicy& policy) {
    if (!params) throw Error(ErrorCode::InvalidArgument, "session needs parameters");
    if (model::config_hash(cfg) != model::config_hash(params->config))
        throw Error(ErrorCode::ConfigMismatch, "session config " + model::hex64(model::config_hash(cfg)) +
                                                   " differs from parameters " +
                                                   model::hex64(model::config_hash(params->config)));
    policy.validate();
    const auto& v = cfg.vocab;
    if (scene && (*scene < 0 || *scene >= v.num_scenes))
        throw Error(ErrorCode::InvalidArgument, "scene " + std::to_string(*scene) + " out of range");
    SessionState s;
    s.params = std::move(params);
    s.scene = scene;
    s.seed = seed;
    s.policy = policy;
    s.rng = Rng(seed);
    s.next = {v.text.wait, v.sil, v.noop};
    if (cfg.visual_mode == model::VisualMode::ContextPrefix && scene) {
        const auto ctx = model::encode_visual_context<float>({s.params->scenes->at(*scene)}, *s.params);
        s.cache = model::new_cache(*s.params, &ctx);
    } else {
        s.cache = model::new_cache(*s.params);
    }
    return s;
}

TimelineFrame assemble_frame(const SessionState& s, const TickInput& in) {
    const auto& v = s.params->config.vocab;
    if (in.listen < 0 || in.listen >= v.audio_size)
        throw Error(ErrorCode::InvalidArgument, "listen id " + std::to_string(in.listen) + " out of range");
    if (in.scene && (*in.scene < 0 || *in.scene >= v.num_scenes))
        throw Error(ErrorCode::InvalidArgument, "scene " + std::to_string(*in.scene) + " out of range");
    TimelineFrame f;
    f.listen = in.listen;
    f.speak = s.next.speak;
    f.text = s.next.text;
    f.action = s.next.action;
    f.visual = in.scene ? in.scene : s.scene;
    return f;
}

TickOutput session_tick(SessionState& s, const TickInput& in) {
    if (s.ended) throw Error(ErrorCode::InvalidArgument, "session has ended");
    const auto& p = *s.params;
    if (s.cache.positions() >= p.config.max_frames)
        throw Error(ErrorCode::SessionExhausted, "session reached max_frames " + std::to_string(p.config.max_frames));
    const auto start = std::chrono::steady_clock::now();
    const TimelineFrame frame = assemble_frame(s, in);
    if (in.scene) s.scene = in.scene;
    if (in.barge_in_mark) s.metrics.barge_in_marks.push_back(s.frame);

    const auto step = model::decode_step(s.cache, frame, p);
    s.next = model::sample_heads(step.logits(), s.policy, s.rng);

    TickOutput out;
    out.frame = s.frame;
    out.speak = frame.speak;
    out.text = frame.text;
    out.action = frame.action;
    out.mode = classify_mode(frame.listen, frame.speak, p.config.vocab);
    s.mode = out.mode;
    if (s.timed) {
        out.tick_wall_time_us = std::chrono::duration_cast<std::chrono::microseconds>(
                                    std::chrono::steady_clock::now() - start)
                                    .count();
        s.metrics.tick_wall_time_us.push_back(out.tick_wall_time_us);
    }
    ++s.frame;
    return out;
}

void queue_listen(SessionState& s, const std::vector<int>& audio) {
    s.pending.insert(s.pending.end(), audio.begin(), audio.end());
}

TickInput next_queued_input(SessionState& s) {
    TickInput in;
    in.listen = s.params->config.vocab.sil;
    if (!s.pending.empty()) {
        in.listen = s.pending.front();
        s.pending.pop_front();
    }
    return in;
}

} // namespace fdx::runtime
