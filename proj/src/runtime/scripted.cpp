#include "fdx/runtime/scripted.hpp"

#include "fdx/core/error.hpp"

#include <chrono>
#include <fstream>
#include <thread>

namespace fdx::runtime {

namespace {

void mark_events(const DialogueScript& s, ScriptedFeed& feed) {
    for (const auto& u : s.utterances) {
        if (u.speaker == Speaker::User) feed.user_spans.push_back({u.start_frame, u.end_frame()});
    }
    for (const auto& e : s.events) {
        if (const auto* b = std::get_if<BargeIn>(&e); b && b->frame < feed.size())
            feed.inputs[static_cast<std::size_t>(b->frame)].barge_in_mark = true;
    }
}

} // namespace

ScriptedFeed feed_from_script(const DialogueScript& s, const Vocabulary& v) {
    ScriptedFeed feed;
    feed.inputs.assign(static_cast<std::size_t>(s.horizon), TickInput{v.sil, std::nullopt, false});
    for (const auto& u : s.utterances) {
        if (u.speaker != Speaker::User) continue;
        for (std::size_t k = 0; k < u.audio.size(); ++k) {
            const int f = u.start_frame + static_cast<int>(k);
            if (f < feed.size()) feed.inputs[static_cast<std::size_t>(f)].listen = u.audio[k];
        }
    }
    for (const auto& e : s.events) {
        if (const auto* sc = std::get_if<SceneSet>(&e); sc && sc->frame < feed.size()) {
            feed.inputs[static_cast<std::size_t>(sc->frame)].scene = sc->scene_id;
            if (sc->frame == 0) feed.initial_scene = sc->scene_id;
        }
    }
    mark_events(s, feed);
    return feed;
}

ScriptedFeed feed_from_timeline(const Timeline& t, const DialogueScript& s) {
    ScriptedFeed feed;
    std::optional<int> scene;
    for (int f = 0; f < t.size(); ++f) {
        TickInput in{t[f].listen, std::nullopt, false};
        if (t[f].visual != scene) in.scene = t[f].visual;
        scene = t[f].visual;
        feed.inputs.push_back(in);
    }
    if (!t.empty()) feed.initial_scene = t[0].visual;
    mark_events(s, feed);
    return feed;
}

ScriptedFeed feed_from_inputs(const std::vector<TickInput>& inputs, std::optional<int> initial_scene,
                              const Vocabulary& v) {
    ScriptedFeed feed;
    feed.inputs = inputs;
    feed.initial_scene = initial_scene;
    const int n = feed.size();
    for (int f = 0; f < n;) {
        if (!v.is_voiced(inputs[static_cast<std::size_t>(f)].listen)) {
            ++f;
            continue;
        }
        const int start = f;
        while (f < n && v.is_voiced(inputs[static_cast<std::size_t>(f)].listen)) ++f;
        feed.user_spans.push_back({start, f});
    }
    return feed;
}

std::string clock_mode_name(ClockMode m) { return m == ClockMode::Lockstep ? "lockstep" : "realtime"; }

ClockMode parse_clock_mode(const std::string& s) {
    if (s == "lockstep") return ClockMode::Lockstep;
    if (s == "realtime") return ClockMode::Realtime;
    throw Error(ErrorCode::InvalidArgument, "unknown clock mode '" + s + "'");
}

SessionRun run_scripted_session(std::shared_ptr<const Params> params, const ScriptedFeed& feed, ClockMode mode,
                                const RunOptions& opt) {
    if (!params) throw Error(ErrorCode::InvalidArgument, "session needs parameters");
    opt.frame_spec.validate();
    const auto cfg = params->config;
    auto s = new_session(std::move(params), cfg, feed.initial_scene, opt.seed, opt.policy);
    s.timed = mode == ClockMode::Realtime;
    SessionRun run;
    run.trace.reserve(feed.inputs.size());
    const auto period = std::chrono::milliseconds(opt.frame_spec.frame_ms);
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < feed.inputs.size(); ++i) {
        if (mode == ClockMode::Realtime) std::this_thread::sleep_until(start + period * static_cast<int>(i));
        run.trace.push_back(session_tick(s, feed.inputs[i]));
        if (mode == ClockMode::Realtime && run.trace.back().tick_wall_time_us > opt.frame_spec.frame_ms * 1000)
            ++s.metrics.overrun_count;
    }
    run.overrun_count = s.metrics.overrun_count;
    run.duplex = measure_duplex(run.trace, feed, cfg.vocab.sil);
    return run;
}

int barge_in_response(const std::vector<TickOutput>& trace, FrameIndex onset, bool marked, int sil) {
    const int n = static_cast<int>(trace.size());
    int f = onset;
    if (marked) {
        while (f < n && trace[static_cast<std::size_t>(f)].speak == sil) ++f;
    } else if (f >= n || trace[static_cast<std::size_t>(f)].speak == sil) {
        return kNotApplicable;
    }
    for (; f < n; ++f) {
        if (trace[static_cast<std::size_t>(f)].speak == sil) return f - onset;
    }
    return -1;
}

int turn_take_latency(const std::vector<TickOutput>& trace, FrameIndex end, int sil) {
    const int n = static_cast<int>(trace.size());
    if (end >= n || trace[static_cast<std::size_t>(end)].speak != sil) return kNotApplicable;
    for (int f = end; f < n; ++f) {
        if (trace[static_cast<std::size_t>(f)].speak != sil) return f - end;
    }
    return -1;
}

DuplexMetrics measure_duplex(const std::vector<TickOutput>& trace, const ScriptedFeed& feed, int sil) {
    DuplexMetrics m;
    for (const auto& span : feed.user_spans) {
        const bool marked = span.start < feed.size() && feed.inputs[static_cast<std::size_t>(span.start)].barge_in_mark;
        if (const int r = barge_in_response(trace, span.start, marked, sil); r != kNotApplicable)
            m.barge_in_response_frames.push_back(r);
        if (const int l = turn_take_latency(trace, span.end, sil); l != kNotApplicable)
            m.turn_take_latency_frames.push_back(l);
    }
    return m;
}

Timeline session_timeline(const ScriptedFeed& feed, const std::vector<TickOutput>& trace, const Vocabulary& v,
                          const FrameSpec& spec) {
    if (trace.size() > feed.inputs.size())
        throw Error(ErrorCode::LengthMismatch, "trace is longer than its feed");
    Timeline t;
    t.vocab = v;
    t.frame_spec = spec;
    std::optional<int> scene = feed.initial_scene;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (feed.inputs[i].scene) scene = feed.inputs[i].scene;
        t.frames.push_back({feed.inputs[i].listen, trace[i].speak, trace[i].text, trace[i].action, scene});
    }
    return t;
}

json tick_output_fields(const TickOutput& o) {
    return json{{"frame", o.frame},
                {"speak", o.speak},
                {"text", o.text},
                {"action", o.action},
                {"mode", mode_name(o.mode)},
                {"tick_wall_time", o.tick_wall_time_us}};
}

TickOutput tick_output_from_fields(const json& j) {
    try {
        TickOutput o;
        o.frame = j.at("frame").get<int>();
        o.speak = j.at("speak").get<int>();
        o.text = j.at("text").get<int>();
        o.action = j.at("action").get<int>();
        o.mode = parse_mode(j.at("mode").get<std::string>());
        o.tick_wall_time_us = j.at("tick_wall_time").get<std::int64_t>();
        return o;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("tick output: ") + e.what());
    }
}

void write_trace(const std::vector<TickOutput>& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    for (const auto& o : trace) {
        json j{{"version", kFormatVersion}};
        j.update(tick_output_fields(o));
        out << to_line(j) << '\n';
    }
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<TickOutput> read_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::vector<TickOutput> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
        }
        require_version(j);
        out.push_back(tick_output_from_fields(j));
    }
    return out;
}

json metrics_document(const DuplexMetrics& m, int overrun_count) {
    return json{{"version", kFormatVersion},
                {"barge_in_response_frames", m.barge_in_response_frames},
                {"turn_take_latency_frames", m.turn_take_latency_frames},
                {"overrun_count", overrun_count}};
}

} // namespace fdx::runtime
