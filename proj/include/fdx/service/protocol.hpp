#pragma once

#include "fdx/core/vocabulary.hpp"
#include "fdx/runtime/session.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace fdx::service {

inline constexpr const char* kProtocolVersion = "1";

// Wire error codes.
namespace wire_error {
inline constexpr const char* kUnsupportedVersion = "unsupported_version";
inline constexpr const char* kTooManySessions = "too_many_sessions";
inline constexpr const char* kMalformedMessage = "malformed_message";
inline constexpr const char* kProtocolError = "protocol_error";
inline constexpr const char* kUnknownCheckpoint = "unknown_checkpoint";
inline constexpr const char* kSessionExhausted = "session_exhausted";
inline constexpr const char* kInvalidArgument = "invalid_argument";
} // namespace wire_error

struct Hello {
    std::string protocol = kProtocolVersion;
    std::string mode = "lockstep";  // lockstep | realtime
    std::string checkpoint;         // empty accepts whatever the server loaded
    std::uint64_t seed = 0;
    double temperature = 0;  // 0 selects greedy decoding
    std::optional<int> scene;

    friend bool operator==(const Hello&, const Hello&) = default;
};

struct Ready {
    std::string session;
    std::string mode;
    int frame_ms = 80;
    int max_frames = 0;
    std::string config_hash;
    Vocabulary vocab;

    friend bool operator==(const Ready&, const Ready&) = default;
};

struct TickIn {
    int frame = 0;
    int listen = 0;
    std::optional<int> scene;
    bool barge_in = false;

    friend bool operator==(const TickIn&, const TickIn&) = default;
};

struct TickOut {
    int frame = 0;
    int speak = 0;
    int text = 0;
    int action = 0;
    std::string mode = "idle";
    std::int64_t tick_wall_time = 0;

    friend bool operator==(const TickOut&, const TickOut&) = default;
};

struct Metrics {
    std::vector<int> barge_in_response_frames;
    std::vector<int> turn_take_latency_frames;
    int overrun_count = 0;

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct End {
    friend bool operator==(const End&, const End&) = default;
};

struct ErrorMessage {
    std::string code;
    std::string message;

    friend bool operator==(const ErrorMessage&, const ErrorMessage&) = default;
};

using Body = std::variant<Hello, Ready, TickIn, TickOut, Metrics, End, ErrorMessage>;

// One JSON object per connection frame: "v", "kind", then the payload fields
// at top level. Optional fields are omitted when absent.
struct WireMessage {
    std::string v = kProtocolVersion;
    Body body;

    friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

std::string kind_name(const Body& b);

std::string encode_message(const WireMessage& m);
// Throws MalformedMessage whose text names the 0-based byte offset of the
// problem (the end of the input for missing or mistyped fields).
WireMessage decode_message(const std::string& bytes);

TickOut to_wire(const runtime::TickOutput& o);
runtime::TickInput from_wire(const TickIn& in);

} // namespace fdx::service
