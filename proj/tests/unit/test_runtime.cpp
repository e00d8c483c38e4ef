#include "doctest.h"

#include "fdx/core/error.hpp"
#include "fdx/core/random.hpp"
#include "fdx/runtime/scripted.hpp"
#include "fdx/runtime/tdm.hpp"
#include "fdx/train/corpus.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

using namespace fdx;
using namespace fdx::runtime;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an fdx::Error");
    return ErrorCode::InvalidArgument;
}

model::ModelConfig small_config(model::VisualMode mode = model::VisualMode::Stream) {
    model::ModelConfig c;
    c.d_model = 16;
    c.n_layers = 2;
    c.n_heads = 2;
    c.d_ff = 32;
    c.max_frames = 64;
    c.visual_mode = mode;
    c.seed = 11;
    return c;
}

std::shared_ptr<const Params> params_for(const model::ModelConfig& cfg) {
    return std::make_shared<const Params>(model::init_parameters(cfg));
}

ScriptedFeed random_feed(const Vocabulary& v, int n, std::uint64_t seed) {
    Rng rng(seed);
    ScriptedFeed feed;
    feed.initial_scene = rng.below(v.num_scenes);
    for (int f = 0; f < n; ++f) {
        TickInput in{rng.uniform(0, 1) < 0.5 ? v.sil : rng.below(v.audio_size), std::nullopt, false};
        if (f > 0 && rng.uniform(0, 1) < 0.1) in.scene = rng.below(v.num_scenes);
        feed.inputs.push_back(in);
    }
    return feed;
}

std::vector<TickOutput> speaking_trace(const std::vector<int>& speak) {
    std::vector<TickOutput> t;
    for (std::size_t f = 0; f < speak.size(); ++f) t.push_back({static_cast<int>(f), speak[f], 0, 0, Mode::Idle, 0});
    return t;
}

const train::ToyLanguage& language() {
    static const train::ToyLanguage lang = train::make_toy_language(model::ModelConfig{}.vocab, 0);
    return lang;
}

} // namespace

TEST_CASE("a new session starts empty") {
    const auto cfg = small_config();
    const auto p = params_for(cfg);
    const auto s = new_session(p, cfg, 3, 0);
    CHECK(s.frame == 0);
    CHECK(s.mode == Mode::Idle);
    CHECK(s.cache.positions() == 0);
    CHECK(s.pending.empty());
    CHECK(s.scene == 3);
    CHECK(s.next.speak == cfg.vocab.sil);
    CHECK(s.next.text == cfg.vocab.text.wait);

    const auto ctx_cfg = small_config(model::VisualMode::ContextPrefix);
    const auto ctx = new_session(params_for(ctx_cfg), ctx_cfg, 3, 0);
    CHECK(ctx.cache.prefix == 1);

    auto other = cfg;
    other.seed = 12;
    CHECK(code_of([&] { new_session(p, other, std::nullopt, 0); }) == ErrorCode::ConfigMismatch);
    CHECK(code_of([&] { new_session(p, cfg, 99, 0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("greedy ticks reproduce the batch forward pass") {
    for (const auto mode : {model::VisualMode::Stream, model::VisualMode::ContextPrefix}) {
        const auto cfg = small_config(mode);
        const auto p = params_for(cfg);
        const auto feed = random_feed(cfg.vocab, 10, 4);
        const auto run = run_scripted_session(p, feed, ClockMode::Lockstep);
        REQUIRE(run.trace.size() == 10);
        const auto t = session_timeline(feed, run.trace, cfg.vocab);
        model::VisualContext<float> ctx;
        if (mode == model::VisualMode::ContextPrefix) ctx = model::encode_visual_context<float>({p->scenes->at(*feed.initial_scene)}, *p);
        const auto out = model::forward_full<float>(t, mode == model::VisualMode::ContextPrefix ? &ctx : nullptr, *p);
        for (int f = 0; f + 1 < 10; ++f) {
            const auto g = model::sample_heads(out.logits_at(f), model::SamplingPolicy::greedy());
            CHECK(g.speak == run.trace[static_cast<std::size_t>(f + 1)].speak);
            CHECK(g.text == run.trace[static_cast<std::size_t>(f + 1)].text);
            CHECK(g.action == run.trace[static_cast<std::size_t>(f + 1)].action);
        }
        CHECK(run.trace[0].speak == cfg.vocab.sil);
    }
}

TEST_CASE("sessions end at max_frames") {
    auto cfg = small_config();
    cfg.max_frames = 8;
    auto s = new_session(params_for(cfg), cfg, std::nullopt, 0);
    for (int i = 0; i < 8; ++i) session_tick(s, {cfg.vocab.sil, std::nullopt, false});
    CHECK(code_of([&] { session_tick(s, {cfg.vocab.sil, std::nullopt, false}); }) == ErrorCode::SessionExhausted);
    auto fresh = new_session(params_for(cfg), cfg, std::nullopt, 0);
    CHECK(code_of([&] { session_tick(fresh, {cfg.vocab.audio_size, std::nullopt, false}); }) ==
          ErrorCode::InvalidArgument);
}

TEST_CASE("lockstep runs are deterministic, including under sampling") {
    const auto cfg = small_config();
    const auto p = params_for(cfg);
    const auto feed = random_feed(cfg.vocab, 40, 9);
    RunOptions opt;
    opt.seed = 5;
    opt.policy = model::SamplingPolicy::temperature(1.0, 5);
    const auto a = run_scripted_session(p, feed, ClockMode::Lockstep, opt);
    const auto b = run_scripted_session(p, feed, ClockMode::Lockstep, opt);
    CHECK(a.trace == b.trace);
    for (const auto& o : a.trace) CHECK(o.tick_wall_time_us == 0);
    opt.seed = 6;
    CHECK(run_scripted_session(p, feed, ClockMode::Lockstep, opt).trace != a.trace);
}

TEST_CASE("online and offline views agree") {
    const auto cfg = small_config();
    const auto p = params_for(cfg);
    const auto feed = random_feed(cfg.vocab, 30, 2);
    const auto run = run_scripted_session(p, feed, ClockMode::Lockstep);
    const auto t = session_timeline(feed, run.trace, cfg.vocab);
    CHECK(validate_timeline(t).ok());
    for (int f = 0; f < t.size(); ++f) {
        const auto& o = run.trace[static_cast<std::size_t>(f)];
        CHECK(o.frame == f);
        CHECK(t[f].listen == feed.inputs[static_cast<std::size_t>(f)].listen);
        CHECK(o.mode == classify_mode(t[f].listen, o.speak, cfg.vocab));
    }
    auto longer = run.trace;
    longer.push_back(longer.back());
    CHECK(code_of([&] { session_timeline(feed, longer, cfg.vocab); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("interleaved sessions do not affect each other") {
    const auto cfg = small_config();
    const auto p = params_for(cfg);
    const auto fa = random_feed(cfg.vocab, 20, 1);
    const auto fb = random_feed(cfg.vocab, 20, 2);
    RunOptions opt;
    opt.policy = model::SamplingPolicy::temperature(0.8, 3);
    const auto alone_a = run_scripted_session(p, fa, ClockMode::Lockstep, opt).trace;
    const auto alone_b = run_scripted_session(p, fb, ClockMode::Lockstep, opt).trace;
    auto a = new_session(p, cfg, fa.initial_scene, 0, opt.policy);
    auto b = new_session(p, cfg, fb.initial_scene, 0, opt.policy);
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(session_tick(b, fb.inputs[i]) == alone_b[i]);
        CHECK(session_tick(a, fa.inputs[i]) == alone_a[i]);
    }
}

TEST_CASE("realtime ticks follow the frame clock") {
    const auto cfg = small_config();
    const auto feed = random_feed(cfg.vocab, 6, 3);
    RunOptions opt;
    opt.frame_spec.frame_ms = 20;
    const auto start = std::chrono::steady_clock::now();
    const auto run = run_scripted_session(params_for(cfg), feed, ClockMode::Realtime, opt);
    const auto elapsed = std::chrono::steady_clock::now() - start;
    CHECK(elapsed >= std::chrono::milliseconds(5 * 20));
    CHECK(run.overrun_count == 0);
    for (const auto& o : run.trace) CHECK(o.tick_wall_time_us > 0);
    const auto lock = run_scripted_session(params_for(cfg), feed, ClockMode::Lockstep, opt);
    for (std::size_t i = 0; i < run.trace.size(); ++i) {
        CHECK(run.trace[i].speak == lock.trace[i].speak);
        CHECK(run.trace[i].text == lock.trace[i].text);
    }
    CHECK(parse_clock_mode("realtime") == ClockMode::Realtime);
}

TEST_CASE("queued listen input") {
    const auto cfg = small_config();
    auto s = new_session(params_for(cfg), cfg, std::nullopt, 0);
    queue_listen(s, {20, 21});
    CHECK(next_queued_input(s).listen == 20);
    CHECK(next_queued_input(s).listen == 21);
    CHECK(next_queued_input(s).listen == cfg.vocab.sil);
    const auto frame = assemble_frame(s, {22, 4, false});
    CHECK(frame.listen == 22);
    CHECK(frame.visual == 4);
    CHECK(s.frame == 0);
}

TEST_CASE("duplex measures on hand-written traces") {
    const int sil = 0;
    ScriptedFeed feed;
    feed.inputs.assign(20, TickInput{});
    feed.user_spans = {{2, 5}, {10, 14}};
    feed.inputs[10].barge_in_mark = true;
    //                         0  1  2  3  4  5  6  7  8  9 10 11 12 13 14 15 16 17 18 19
    const auto trace = speaking_trace({0, 0, 0, 0, 0, 0, 0, 0, 0, 9, 9, 9, 9, 0, 0, 0, 0, 0, 9, 9});
    const auto m = measure_duplex(trace, feed, sil);
    CHECK(m.barge_in_response_frames == std::vector<int>{3});
    CHECK(m.turn_take_latency_frames == std::vector<int>{4, 4});

    CHECK(barge_in_response(trace, 10, false, sil) == 3);
    CHECK(barge_in_response(trace, 2, false, sil) == kNotApplicable);
    CHECK(barge_in_response(trace, 2, true, sil) == 11);
    CHECK(barge_in_response(trace, 18, true, sil) == -1);
    CHECK(turn_take_latency(trace, 10, sil) == kNotApplicable);
    CHECK(turn_take_latency(speaking_trace({9, 0, 0}), 1, sil) == -1);
}

TEST_CASE("replaying the ground truth gives the scripted timings") {
    const auto& lang = language();
    const align::AlignConfig cfg;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto s = train::gen_sample(train::TaskKind::BargeIn, lang, cfg, seed);
        const auto feed = feed_from_timeline(s.timeline, s.script);
        std::vector<int> speak;
        for (const auto& f : s.timeline.frames) speak.push_back(f.speak);
        const auto m = measure_duplex(speaking_trace(speak), feed, lang.vocab.sil);
        CHECK(m.barge_in_response_frames == std::vector<int>{cfg.interrupt_truncate});
        CHECK(m.turn_take_latency_frames == std::vector<int>{cfg.turn_gap + cfg.spk_delay, cfg.turn_gap + cfg.spk_delay});

        const auto from_script = feed_from_script(s.script, lang.vocab);
        CHECK(from_script.user_spans == feed.user_spans);
        CHECK(from_script.initial_scene == feed.initial_scene);
        for (std::size_t f = 0; f < feed.inputs.size(); ++f) CHECK(from_script.inputs[f] == feed.inputs[f]);
    }
}

TEST_CASE("tdm serialization") {
    const auto& v = language().vocab;
    Rng rng(8);
    Timeline t = fill_timeline(100, v, FrameSpec{});
    for (auto& f : t.frames) {
        f.listen = rng.below(v.audio_size);
        f.speak = rng.below(v.audio_size);
        f.text = rng.below(v.text_size);
        f.action = rng.below(v.action_size);
        f.visual = 2;
    }
    CHECK(tdm_serialize(t, 1).size() == 200);
    const auto s = tdm_serialize(t, 12);
    REQUIRE(s.size() == 2 * 12 * 9);
    for (int j = 0; j < 9; ++j) {
        for (int k = 0; k < 12; ++k) {
            const int f = j * 12 + k;
            const auto& l = s[2 * j * 12 + k];
            const auto& sp = s[2 * j * 12 + 12 + k];
            CHECK(l.speak == v.sil);
            CHECK(l.text == v.text.wait);
            CHECK(sp.listen == v.sil);
            CHECK(sp.visual == 2);
            if (f < 100) {
                CHECK(l.listen == t[f].listen);
                CHECK(sp.speak == t[f].speak);
                CHECK(sp.text == t[f].text);
                CHECK(sp.action == t[f].action);
            } else {
                CHECK(l.listen == v.sil);
                CHECK(sp.speak == v.sil);
            }
        }
    }
    CHECK(code_of([&] { tdm_serialize(t, 0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("tdm output cannot react inside a chunk") {
    auto cfg = small_config();
    cfg.max_frames = 128;
    const auto p = params_for(cfg);
    const int c = 6;
    const auto feed = random_feed(cfg.vocab, 40, 5);
    RunOptions opt;
    opt.policy = model::SamplingPolicy::temperature(1.0, 1);
    const auto base = tdm_session(p, feed, c, opt);
    CHECK(base.positions == 2 * c * 7);
    REQUIRE(base.run.trace.size() == 40);
    for (int f = 0; f < c; ++f) CHECK(base.run.trace[static_cast<std::size_t>(f)].speak == cfg.vocab.sil);
    for (int onset = 0; onset < 40; onset += 5) {
        auto changed = feed;
        for (int f = onset; f < 40; ++f) changed.inputs[static_cast<std::size_t>(f)].listen = (f * 7) % 50 + 10;
        const auto alt = tdm_session(p, changed, c, opt);
        // Heard in block onset / c, answered in its speak chunk, played one block later.
        const int first = (onset / c + 1) * c;
        for (int f = 0; f < std::min(first, 40); ++f)
            CHECK(alt.run.trace[static_cast<std::size_t>(f)].speak == base.run.trace[static_cast<std::size_t>(f)].speak);
    }
    cfg.max_frames = 64;
    CHECK(code_of([&] { tdm_session(params_for(cfg), feed, c); }) == ErrorCode::SessionExhausted);
}

TEST_CASE("traces round-trip through JSONL") {
    const auto cfg = small_config();
    const auto run = run_scripted_session(params_for(cfg), random_feed(cfg.vocab, 12, 1), ClockMode::Lockstep);
    const auto dir = fs::temp_directory_path() / "fdx_test_runtime_trace";
    fs::create_directories(dir);
    write_trace(run.trace, dir / "t.jsonl");
    CHECK(read_trace(dir / "t.jsonl") == run.trace);
    {
        std::ofstream out(dir / "bad.jsonl");
        out << R"({"frame":0,"speak":0,"text":1,"action":0,"mode":"idle","tick_wall_time":0})" << '\n';
    }
    CHECK(code_of([&] { read_trace(dir / "bad.jsonl"); }) == ErrorCode::InvalidArgument);
    const auto doc = metrics_document(run.duplex, 0);
    CHECK(doc.at("overrun_count") == 0);
    CHECK(parse_mode(mode_name(Mode::Overlap)) == Mode::Overlap);
    fs::remove_all(dir);
}
