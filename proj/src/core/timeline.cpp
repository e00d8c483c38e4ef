#include "fdx/core/timeline.hpp"

#include <sstream>

namespace fdx {

TimelineFrame fill_frame(const Vocabulary& vocab) {
    return TimelineFrame{vocab.sil, vocab.sil, vocab.text.wait, vocab.noop, std::nullopt};
}

Timeline fill_timeline(int horizon, const Vocabulary& vocab, const FrameSpec& spec) {
    Timeline t;
    t.frames.assign(static_cast<std::size_t>(horizon > 0 ? horizon : 0), fill_frame(vocab));
    t.frame_spec = spec;
    t.vocab = vocab;
    return t;
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& v : violations) {
        if (v.frame) os << "frame " << *v.frame << " ";
        os << v.field << ": " << v.message << "\n";
    }
    return os.str();
}

namespace {
void check_range(ValidationReport& r, int frame, const char* field, int id, int size) {
    if (id < 0 || id >= size) {
        r.violations.push_back(Violation{frame, field,
                                         std::string(field) + " out of range (" + std::to_string(id) +
                                             " not in [0," + std::to_string(size) + "))"});
    }
}
} // namespace

ValidationReport validate_timeline(const Timeline& t) {
    ValidationReport r;
    if (t.frame_spec.frame_ms <= 0) r.violations.push_back({std::nullopt, "frame_spec", "frame_ms must be positive"});
    const auto& v = t.vocab;
    int with_visual = 0;
    for (int i = 0; i < t.size(); ++i) {
        const auto& f = t[i];
        check_range(r, i, "listen", f.listen, v.audio_size);
        check_range(r, i, "speak", f.speak, v.audio_size);
        check_range(r, i, "text", f.text, v.text_size);
        check_range(r, i, "action", f.action, v.action_size);
        if (f.visual) {
            ++with_visual;
            check_range(r, i, "visual", *f.visual, v.num_scenes);
        }
    }
    if (with_visual != 0 && with_visual != t.size()) {
        r.violations.push_back({std::nullopt, "visual",
                                "mixed visual presence (" + std::to_string(with_visual) + " of " +
                                    std::to_string(t.size()) + " frames)"});
    }
    return r;
}

} // namespace fdx
