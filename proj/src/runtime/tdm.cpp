#include "fdx/runtime/tdm.hpp"

#include "fdx/core/error.hpp"

namespace fdx::runtime {

namespace {

int block_count(int frames, int c) { return (frames + c - 1) / c; }

} // namespace

Timeline tdm_serialize(const Timeline& t, int c) {
    if (c < 1) throw Error(ErrorCode::InvalidArgument, "chunk_frames must be >= 1");
    const auto& v = t.vocab;
    const TimelineFrame fill = fill_frame(v);
    Timeline out;
    out.vocab = v;
    out.frame_spec = t.frame_spec;
    const int blocks = block_count(t.size(), c);
    for (int j = 0; j < blocks; ++j) {
        for (int k = 0; k < c; ++k) {
            const int f = j * c + k;
            TimelineFrame p = fill;
            if (f < t.size()) {
                p.listen = t[f].listen;
                p.visual = t[f].visual;
            } else if (!t.empty()) {
                p.visual = t[t.size() - 1].visual;
            }
            out.frames.push_back(p);
        }
        for (int k = 0; k < c; ++k) {
            const int f = j * c + k;
            TimelineFrame p = fill;
            if (f < t.size()) {
                p = t[f];
                p.listen = v.sil;
            } else if (!t.empty()) {
                p.visual = t[t.size() - 1].visual;
            }
            out.frames.push_back(p);
        }
    }
    return out;
}

TdmRun tdm_session(std::shared_ptr<const Params> params, const ScriptedFeed& feed, int c, const RunOptions& opt) {
    if (!params) throw Error(ErrorCode::InvalidArgument, "session needs parameters");
    if (c < 1) throw Error(ErrorCode::InvalidArgument, "chunk_frames must be >= 1");
    const auto& p = *params;
    const auto& v = p.config.vocab;
    const int frames = feed.size();
    const int blocks = block_count(frames, c);
    if (2 * blocks * c > p.config.max_frames)
        throw Error(ErrorCode::SessionExhausted, std::to_string(2 * blocks * c) + " TDM positions exceed max_frames " +
                                                     std::to_string(p.config.max_frames));
    opt.policy.validate();

    auto cache = model::new_cache(p);
    Rng rng(opt.seed);
    std::optional<int> scene = feed.initial_scene;
    std::vector<std::optional<int>> visual(static_cast<std::size_t>(blocks * c));
    const model::SampledTokens fill{v.text.wait, v.sil, v.noop};
    std::vector<model::SampledTokens> played(static_cast<std::size_t>(blocks * c + c), fill);

    TdmRun out;
    model::SampledTokens tok = fill;
    for (int j = 0; j < blocks; ++j) {
        for (int k = 0; k < c; ++k) {
            const int f = j * c + k;
            int listen = v.sil;
            if (f < frames) {
                const auto& in = feed.inputs[static_cast<std::size_t>(f)];
                if (in.scene) scene = in.scene;
                listen = in.listen;
            }
            visual[static_cast<std::size_t>(f)] = scene;
            const auto step = model::decode_step(cache, TimelineFrame{listen, v.sil, v.text.wait, v.noop, scene}, p);
            tok = model::sample_heads(step.logits(), opt.policy, rng);
            ++out.positions;
        }
        for (int k = 0; k < c; ++k) {
            const int f = j * c + k;
            played[static_cast<std::size_t>(f + c)] = tok;
            const TimelineFrame pos{v.sil, tok.speak, tok.text, tok.action, visual[static_cast<std::size_t>(f)]};
            const auto step = model::decode_step(cache, pos, p);
            tok = model::sample_heads(step.logits(), opt.policy, rng);
            ++out.positions;
        }
    }
    for (int f = 0; f < frames; ++f) {
        const auto& t = played[static_cast<std::size_t>(f)];
        out.run.trace.push_back({f, t.speak, t.text, t.action,
                                 classify_mode(feed.inputs[static_cast<std::size_t>(f)].listen, t.speak, v), 0});
    }
    out.run.duplex = measure_duplex(out.run.trace, feed, v.sil);
    return out;
}

} // namespace fdx::runtime
