#include "fdx/service/protocol.hpp"

#include "fdx/core/error.hpp"
#include "fdx/core/serialize.hpp"

namespace fdx::service {

namespace {

using ojson = nlohmann::ordered_json;

[[noreturn]] void malformed(std::size_t offset, const std::string& what) {
    throw Error(ErrorCode::MalformedMessage, "at byte " + std::to_string(offset) + ": " + what);
}

struct Encoder {
    ojson& o;

    void operator()(const Hello& m) const {
        o["protocol"] = m.protocol;
        o["mode"] = m.mode;
        o["checkpoint"] = m.checkpoint;
        o["seed"] = m.seed;
        o["temperature"] = m.temperature;
        if (m.scene) o["scene"] = *m.scene;
    }
    void operator()(const Ready& m) const {
        o["session"] = m.session;
        o["mode"] = m.mode;
        o["frame_ms"] = m.frame_ms;
        o["max_frames"] = m.max_frames;
        o["config_hash"] = m.config_hash;
        o["vocab"] = ojson::parse(vocabulary_fields(m.vocab).dump());
    }
    void operator()(const TickIn& m) const {
        o["frame"] = m.frame;
        o["listen"] = m.listen;
        if (m.scene) o["scene"] = *m.scene;
        if (m.barge_in) o["barge_in"] = true;
    }
    void operator()(const TickOut& m) const {
        o["frame"] = m.frame;
        o["speak"] = m.speak;
        o["text"] = m.text;
        o["action"] = m.action;
        o["mode"] = m.mode;
        o["tick_wall_time"] = m.tick_wall_time;
    }
    void operator()(const Metrics& m) const {
        o["barge_in_response_frames"] = m.barge_in_response_frames;
        o["turn_take_latency_frames"] = m.turn_take_latency_frames;
        o["overrun_count"] = m.overrun_count;
    }
    void operator()(const End&) const {}
    void operator()(const ErrorMessage& m) const {
        o["code"] = m.code;
        o["message"] = m.message;
    }
};

template <typename T>
T field(const json& j, const char* key) {
    return j.at(key).get<T>();
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
    if (!j.contains(key)) return std::nullopt;
    return j.at(key).get<T>();
}

Body decode_body(const std::string& kind, const json& j) {
    if (kind == "Hello")
        return Hello{field<std::string>(j, "protocol"), field<std::string>(j, "mode"),
                     field<std::string>(j, "checkpoint"), field<std::uint64_t>(j, "seed"),
                     field<double>(j, "temperature"), optional_field<int>(j, "scene")};
    if (kind == "Ready")
        return Ready{field<std::string>(j, "session"),     field<std::string>(j, "mode"),
                     field<int>(j, "frame_ms"),            field<int>(j, "max_frames"),
                     field<std::string>(j, "config_hash"), vocabulary_from_fields(j.at("vocab"))};
    if (kind == "TickIn")
        return TickIn{field<int>(j, "frame"), field<int>(j, "listen"), optional_field<int>(j, "scene"),
                      optional_field<bool>(j, "barge_in").value_or(false)};
    if (kind == "TickOut")
        return TickOut{field<int>(j, "frame"),         field<int>(j, "speak"),
                       field<int>(j, "text"),          field<int>(j, "action"),
                       field<std::string>(j, "mode"), field<std::int64_t>(j, "tick_wall_time")};
    if (kind == "Metrics")
        return Metrics{field<std::vector<int>>(j, "barge_in_response_frames"),
                       field<std::vector<int>>(j, "turn_take_latency_frames"), field<int>(j, "overrun_count")};
    if (kind == "End") return End{};
    if (kind == "Error") return ErrorMessage{field<std::string>(j, "code"), field<std::string>(j, "message")};
    throw std::invalid_argument("unknown kind '" + kind + "'");
}

} // namespace

std::string kind_name(const Body& b) {
    static constexpr const char* names[] = {"Hello", "Ready", "TickIn", "TickOut", "Metrics", "End", "Error"};
    return names[b.index()];
}

std::string encode_message(const WireMessage& m) {
    ojson o;
    o["v"] = m.v;
    o["kind"] = kind_name(m.body);
    std::visit(Encoder{o}, m.body);
    return o.dump();
}

WireMessage decode_message(const std::string& bytes) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::parse_error& e) {
        malformed(e.byte > 0 ? e.byte - 1 : 0, e.what());
    }
    if (!j.is_object()) malformed(0, "message is not a JSON object");
    try {
        WireMessage m;
        m.v = field<std::string>(j, "v");
        m.body = decode_body(field<std::string>(j, "kind"), j);
        return m;
    } catch (const json::exception& e) {
        malformed(bytes.size(), e.what());
    } catch (const std::invalid_argument& e) {
        malformed(bytes.size(), e.what());
    } catch (const Error& e) {
        malformed(bytes.size(), e.what());
    }
}

TickOut to_wire(const runtime::TickOutput& o) {
    return {o.frame, o.speak, o.text, o.action, runtime::mode_name(o.mode), o.tick_wall_time_us};
}

runtime::TickInput from_wire(const TickIn& in) { return {in.listen, in.scene, in.barge_in}; }

} // namespace fdx::service
