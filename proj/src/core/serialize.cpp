#include "fdx/core/serialize.hpp"

#include "fdx/core/error.hpp"

namespace fdx {

namespace {

template <typename F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad ") + what + " document: " + e.what());
    }
}

const char* speaker_name(Speaker s) { return s == Speaker::User ? "User" : "Assistant"; }

Speaker speaker_from(const std::string& s) {
    if (s == "User") return Speaker::User;
    if (s == "Assistant") return Speaker::Assistant;
    throw Error(ErrorCode::InvalidArgument, "unknown speaker '" + s + "'");
}

json event_fields(const ScriptEvent& e) {
    return std::visit(
        [](const auto& ev) -> json {
            using E = std::decay_t<decltype(ev)>;
            if constexpr (std::is_same_v<E, BargeIn>) {
                return json{{"kind", "BargeIn"}, {"frame", ev.frame}};
            } else if constexpr (std::is_same_v<E, SceneSet>) {
                return json{{"kind", "SceneSet"}, {"frame", ev.frame}, {"scene_id", ev.scene_id}};
            } else {
                return json{{"kind", "NoiseBurst"}, {"frame", ev.frame}, {"len", ev.length}};
            }
        },
        e);
}

ScriptEvent event_from(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "BargeIn") return BargeIn{j.at("frame").get<int>()};
    if (kind == "SceneSet") return SceneSet{j.at("frame").get<int>(), j.at("scene_id").get<int>()};
    if (kind == "NoiseBurst") return NoiseBurst{j.at("frame").get<int>(), j.at("len").get<int>()};
    throw Error(ErrorCode::InvalidArgument, "unknown event kind '" + kind + "'");
}

Utterance utterance_from(const json& j) {
    Utterance u;
    u.speaker = speaker_from(j.at("speaker").get<std::string>());
    u.transcript = j.at("transcript").get<std::vector<int>>();
    u.audio = j.at("audio").get<std::vector<int>>();
    u.start_frame = j.at("start_frame").get<int>();
    if (j.contains("word_times") && !j.at("word_times").is_null())
        u.word_times = j.at("word_times").get<std::vector<int>>();
    return u;
}

} // namespace

json vocabulary_fields(const Vocabulary& v) {
    json audio = json::object();
    audio["SIL"] = v.sil;
    for (std::size_t i = 0; i < v.noise.size(); ++i) audio["NOISE_" + std::to_string(i + 1)] = v.noise[i];
    return json{{"text_size", v.text_size},
                {"audio_size", v.audio_size},
                {"action_size", v.action_size},
                {"num_scenes", v.num_scenes},
                {"specials",
                 {{"text",
                   {{"WAIT", v.text.wait}, {"BOS", v.text.bos}, {"EOS", v.text.eos}, {"PAD", v.text.pad},
                    {"EPAD", v.text.epad}}},
                  {"audio", audio},
                  {"action", {{"NOOP", v.noop}}}}}};
}

Vocabulary vocabulary_from_fields(const json& j) {
    return guarded("vocabulary", [&] {
        Vocabulary v;
        v.text_size = j.at("text_size").get<int>();
        v.audio_size = j.at("audio_size").get<int>();
        v.action_size = j.at("action_size").get<int>();
        v.num_scenes = j.value("num_scenes", 0);
        const auto& sp = j.at("specials");
        const auto& t = sp.at("text");
        v.text = TextSpecials{t.at("WAIT").get<int>(), t.at("BOS").get<int>(), t.at("EOS").get<int>(),
                              t.at("PAD").get<int>(), t.at("EPAD").get<int>()};
        const auto& a = sp.at("audio");
        v.sil = a.at("SIL").get<int>();
        for (int i = 1;; ++i) {
            const auto key = "NOISE_" + std::to_string(i);
            if (!a.contains(key)) break;
            v.noise.push_back(a.at(key).get<int>());
        }
        v.noop = sp.at("action").at("NOOP").get<int>();
        return v;
    });
}

json timeline_fields(const Timeline& t) {
    json frames = json::array();
    for (const auto& f : t.frames) {
        frames.push_back(json{{"listen", f.listen},
                              {"speak", f.speak},
                              {"text", f.text},
                              {"action", f.action},
                              {"visual", f.visual ? json(*f.visual) : json(nullptr)}});
    }
    return json{{"frames", std::move(frames)},
                {"frame_spec", {{"frame_ms", t.frame_spec.frame_ms}}},
                {"vocab", vocabulary_fields(t.vocab)}};
}

Timeline timeline_from_fields(const json& j) {
    return guarded("timeline", [&] {
        Timeline t;
        t.frame_spec.frame_ms = j.at("frame_spec").at("frame_ms").get<int>();
        t.vocab = vocabulary_from_fields(j.at("vocab"));
        for (const auto& f : j.at("frames")) {
            TimelineFrame fr;
            fr.listen = f.at("listen").get<int>();
            fr.speak = f.at("speak").get<int>();
            fr.text = f.at("text").get<int>();
            fr.action = f.at("action").get<int>();
            if (f.contains("visual") && !f.at("visual").is_null()) fr.visual = f.at("visual").get<int>();
            t.frames.push_back(fr);
        }
        return t;
    });
}

json utterance_fields(const Utterance& u) {
    return json{{"speaker", speaker_name(u.speaker)},
                {"transcript", u.transcript},
                {"audio", u.audio},
                {"start_frame", u.start_frame},
                {"word_times", u.word_times ? json(*u.word_times) : json(nullptr)}};
}

json script_fields(const DialogueScript& s) {
    json utts = json::array();
    for (const auto& u : s.utterances) utts.push_back(utterance_fields(u));
    json events = json::array();
    for (const auto& e : s.events) events.push_back(event_fields(e));
    return json{{"utterances", std::move(utts)}, {"events", std::move(events)}, {"horizon", s.horizon}};
}

DialogueScript script_from_fields(const json& j) {
    return guarded("script", [&] {
        DialogueScript s;
        for (const auto& u : j.at("utterances")) s.utterances.push_back(utterance_from(u));
        for (const auto& e : j.at("events")) s.events.push_back(event_from(e));
        s.horizon = j.at("horizon").get<int>();
        return s;
    });
}

void require_version(const json& j) {
    if (!j.is_object() || !j.contains("version") || j.at("version") != kFormatVersion)
        throw Error(ErrorCode::InvalidArgument, "document is missing \"version\":\"v1\"");
}

namespace {
json versioned(json fields) {
    fields["version"] = kFormatVersion;
    return fields;
}
} // namespace

json to_document(const Vocabulary& v) { return versioned(vocabulary_fields(v)); }
json to_document(const Timeline& t) { return versioned(timeline_fields(t)); }
json to_document(const DialogueScript& s) { return versioned(script_fields(s)); }

Vocabulary vocabulary_from_document(const json& j) {
    require_version(j);
    return vocabulary_from_fields(j);
}
Timeline timeline_from_document(const json& j) {
    require_version(j);
    return timeline_from_fields(j);
}
DialogueScript script_from_document(const json& j) {
    require_version(j);
    return script_from_fields(j);
}

std::string to_line(const json& j) { return j.dump(); }

} // namespace fdx
