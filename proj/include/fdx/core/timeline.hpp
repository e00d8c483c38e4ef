#pragma once

#include "fdx/core/frame.hpp"
#include "fdx/core/vocabulary.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fdx {

struct TimelineFrame {
    int listen = 0;
    int speak = 0;
    int text = 0;
    int action = 0;
    std::optional<int> visual;

    friend bool operator==(const TimelineFrame&, const TimelineFrame&) = default;
};

// Frame-indexed parallel token streams.
struct Timeline {
    std::vector<TimelineFrame> frames;
    FrameSpec frame_spec;
    Vocabulary vocab;

    int size() const { return static_cast<int>(frames.size()); }
    bool empty() const { return frames.empty(); }
    TimelineFrame& operator[](int i) { return frames[static_cast<std::size_t>(i)]; }
    const TimelineFrame& operator[](int i) const { return frames[static_cast<std::size_t>(i)]; }

    friend bool operator==(const Timeline&, const Timeline&) = default;
};

// Fill tokens on every channel: SIL, SIL, WAIT, NOOP, no visual.
TimelineFrame fill_frame(const Vocabulary& vocab);
Timeline fill_timeline(int horizon, const Vocabulary& vocab, const FrameSpec& spec);

struct Violation {
    std::optional<FrameIndex> frame;
    std::string field;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    std::string summary() const;
};

ValidationReport validate_timeline(const Timeline& t);

} // namespace fdx
