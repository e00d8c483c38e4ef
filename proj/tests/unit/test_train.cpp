#include "doctest.h"

#include "fdx/core/error.hpp"
#include "fdx/core/random.hpp"
#include "fdx/model/checkpoint.hpp"
#include "fdx/train/eval.hpp"
#include "fdx/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

using namespace fdx;
using namespace fdx::train;
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

model::ModelConfig tiny_config() {
    model::ModelConfig c;
    c.d_model = 16;
    c.n_layers = 1;
    c.n_heads = 2;
    c.d_ff = 32;
    c.max_frames = 128;
    c.seed = 5;
    return c;
}

const ToyLanguage& language() {
    static const ToyLanguage lang = make_toy_language(model::ModelConfig{}.vocab, 0);
    return lang;
}

fs::path scratch_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("fdx_test_train_" + name);
    fs::remove_all(p);
    return p;
}

std::vector<int> words_of(const Utterance& u) { return u.transcript; }

const Utterance& first_of(const DialogueScript& s, Speaker who) {
    for (const auto& u : s.utterances) {
        if (u.speaker == who) return u;
    }
    FAIL("no utterance of that speaker");
    return s.utterances.front();
}

} // namespace

TEST_CASE("toy language partition and audio map") {
    const auto& lang = language();
    CHECK(lang.commands.size() == 4);
    CHECK(static_cast<int>(lang.scenes.size()) == lang.vocab.num_scenes);
    std::set<int> first_audio;
    for (int w : lang.word_ids) {
        const auto audio = lang.word_to_audio(w);
        REQUIRE(audio.size() == 3);
        for (int a : audio) CHECK(lang.vocab.is_voiced(a));
        CHECK(first_audio.insert(audio[0]).second);
        CHECK(lang.audio_to_word(audio[0]) == w);
    }
    for (const auto& s : lang.scenes) {
        CHECK(s.description.size() == 3);
        CHECK(std::find(s.description.begin(), s.description.end(), s.name_word) == s.description.end());
    }
    CHECK(code_of([] { make_toy_language(build_vocabulary(VocabSizes{16, 16, 8, 4}), 0); }) ==
          ErrorCode::SizeTooSmall);
}

TEST_CASE("corpus generation is deterministic and valid") {
    const auto& lang = language();
    const align::AlignConfig cfg;
    const auto a = gen_posttrain_corpus(60, lang, cfg, 9);
    const auto b = gen_posttrain_corpus(60, lang, cfg, 9);
    const auto c = gen_sft_corpus(60, lang, cfg, 9);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(sample_document(a[i]) == sample_document(b[i]));
    CHECK(sample_document(a[1]) != sample_document(gen_posttrain_corpus(60, lang, cfg, 10)[1]));
    for (const auto* corpus : {&a, &c}) {
        for (const auto& s : *corpus) {
            INFO(task_name(s.task));
            CHECK(validate_script(s.script, lang.vocab).ok());
            CHECK(validate_timeline(s.timeline).ok());
            CHECK(s.timeline.size() == s.script.horizon);
            CHECK(s.timeline[0].visual.has_value());
        }
    }
    std::set<TaskKind> post, sft;
    for (const auto& s : a) post.insert(s.task);
    for (const auto& s : c) sft.insert(s.task);
    CHECK(post == std::set<TaskKind>{TaskKind::Asr, TaskKind::Tts, TaskKind::Vqa});
    CHECK(sft.count(TaskKind::BargeIn));
    CHECK(sft.count(TaskKind::Telepathy));
    CHECK(code_of([&] { gen_sft_corpus(0, lang, cfg, 1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("held-out split") {
    const auto& lang = language();
    const align::AlignConfig cfg;
    const auto corpus = gen_posttrain_corpus(1000, lang, cfg, 4);
    const auto held = std::count_if(corpus.begin(), corpus.end(), [](const auto& s) { return s.held_out(); });
    CHECK(held > 60);
    CHECK(held < 140);
    const auto eval = held_out_samples(TaskKind::Locomotion, 12, lang, cfg, 4);
    REQUIRE(eval.size() == 12);
    for (const auto& s : eval) {
        CHECK(s.held_out());
        CHECK(s.task == TaskKind::Locomotion);
    }
}

TEST_CASE("task-specific script properties") {
    const auto& lang = language();
    const align::AlignConfig cfg;
    SUBCASE("asr echoes the user's words") {
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            const auto s = gen_sample(TaskKind::Asr, lang, cfg, seed);
            const auto& u = first_of(s.script, Speaker::User);
            const auto& a = first_of(s.script, Speaker::Assistant);
            CHECK(words_of(a) == words_of(u));
            CHECK(std::set<int>(u.transcript.begin(), u.transcript.end()).size() == u.transcript.size());
            CHECK(a.start_frame == u.end_frame() + cfg.turn_gap + cfg.spk_delay);
        }
    }
    SUBCASE("telepathy describes without naming") {
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            const auto s = gen_sample(TaskKind::Telepathy, lang, cfg, seed);
            const int scene = s.timeline[0].visual.value();
            const auto& entry = lang.scenes[static_cast<std::size_t>(scene)];
            const auto& a = first_of(s.script, Speaker::Assistant);
            CHECK(a.transcript == entry.description);
            for (const auto& f : s.timeline.frames) CHECK(f.text != entry.name_word);
        }
    }
    SUBCASE("locomotion acts while repeating the command") {
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            const auto s = gen_sample(TaskKind::Locomotion, lang, cfg, seed);
            const auto& a = first_of(s.script, Speaker::Assistant);
            REQUIRE(a.transcript.size() == 1);
            const int act = lang.instruction_to_action.at(a.transcript[0]);
            for (int f = 0; f < s.timeline.size(); ++f) {
                const bool on = f >= a.start_frame && f < a.end_frame();
                CHECK(s.timeline[f].action == (on ? act : lang.vocab.noop));
            }
        }
    }
    SUBCASE("barge-in interrupts a running answer") {
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            const auto s = gen_sample(TaskKind::BargeIn, lang, cfg, seed);
            int onset = -1;
            for (const auto& e : s.script.events) {
                if (const auto* b = std::get_if<BargeIn>(&e)) onset = b->frame;
            }
            const auto& first = s.script.utterances[1];
            REQUIRE(first.speaker == Speaker::Assistant);
            CHECK(onset > first.start_frame);
            CHECK(onset < first.end_frame());
            for (int f = onset; f < onset + cfg.interrupt_truncate; ++f) CHECK(s.timeline[f].speak != lang.vocab.sil);
            CHECK(s.timeline[onset + cfg.interrupt_truncate].speak == lang.vocab.sil);
        }
    }
}

TEST_CASE("corpus files round-trip") {
    const auto& lang = language();
    const auto corpus = gen_sft_corpus(20, lang, align::AlignConfig{}, 2);
    const auto dir = scratch_dir("corpus");
    fs::create_directories(dir);
    write_corpus(corpus, dir / "c.jsonl");
    const auto back = read_corpus(dir / "c.jsonl");
    REQUIRE(back.size() == corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        CHECK(back[i].seed == corpus[i].seed);
        CHECK(back[i].task == corpus[i].task);
        CHECK(back[i].script == corpus[i].script);
        CHECK(back[i].timeline.frames == corpus[i].timeline.frames);
    }
    fs::remove_all(dir);
}

TEST_CASE("loss examples") {
    const auto& v = language().vocab;
    Timeline t = fill_timeline(3, v, FrameSpec{});
    t[1].text = 9;
    t[2].speak = 11;
    t[2].action = 2;
    model::ForwardOutput<double> out;
    out.frames = 2;
    out.text_size = v.text_size;
    out.audio_size = v.audio_size;
    out.action_size = v.action_size;
    out.text.assign(static_cast<std::size_t>(2 * v.text_size), 0.0);
    out.speak.assign(static_cast<std::size_t>(2 * v.audio_size), 0.0);
    out.action.assign(static_cast<std::size_t>(2 * v.action_size), 0.0);

    SUBCASE("uniform logits") {
        const auto b = compute_loss(out, t, LossWeights{});
        CHECK(b.text == doctest::Approx(2 * std::log(64.0)).epsilon(1e-12));
        CHECK(b.speak == doctest::Approx(2 * std::log(64.0)).epsilon(1e-12));
        CHECK(b.action == doctest::Approx(2 * std::log(8.0)).epsilon(1e-12));
        CHECK(b.total == doctest::Approx(4 * std::log(64.0) + 2 * std::log(8.0)).epsilon(1e-12));
    }
    SUBCASE("a confident correct prediction costs almost nothing") {
        for (int f = 0; f < 2; ++f) {
            const auto i = static_cast<std::size_t>(f);
            out.text[i * 64 + static_cast<std::size_t>(t[f + 1].text)] = 20;
            out.speak[i * 64 + static_cast<std::size_t>(t[f + 1].speak)] = 20;
            out.action[i * 8 + static_cast<std::size_t>(t[f + 1].action)] = 20;
        }
        CHECK(compute_loss(out, t, LossWeights{}).total < 1e-3);
    }
    SUBCASE("zero weights") {
        model::HeadGrads<double> g;
        const auto b = compute_loss(out, t, LossWeights{0, 0, 0}, &g);
        CHECK(b.total == 0.0);
        for (double x : g.text) CHECK(x == 0.0);
    }
    SUBCASE("gradient is softmax minus one-hot") {
        model::HeadGrads<double> g;
        compute_loss(out, t, LossWeights{2, 1, 1}, &g, 0.5);
        CHECK(g.text[9 + 64 * 0] == doctest::Approx(2 * 0.5 * (1.0 / 64 - 1)));
        CHECK(g.text[3] == doctest::Approx(2 * 0.5 / 64));
        CHECK(g.action[8 + 2] == doctest::Approx(0.5 * (1.0 / 8 - 1)));
    }
    SUBCASE("length mismatch") {
        out.frames = 3;
        CHECK(code_of([&] { compute_loss(out, t, LossWeights{}); }) == ErrorCode::LengthMismatch);
    }
}

TEST_CASE("loss gradients through the model match central differences") {
    auto cfg = tiny_config();
    cfg.d_model = 8;
    cfg.n_heads = 1;
    cfg.d_ff = 16;
    const auto& lang = language();
    const auto sample = gen_sample(TaskKind::Asr, lang, align::AlignConfig{}, 3);
    Timeline t = sample.timeline;
    t.frames.resize(10);
    Timeline input = t;
    input.frames.pop_back();
    auto p = model::cast_parameters<double>(model::init_parameters(cfg));
    Rng rng(1);
    for (auto& w : p.values) w += rng.uniform(-0.1, 0.1);

    for (const double dropout : {0.0, 0.3}) {
        CAPTURE(dropout);
        auto loss_at = [&](const model::Parameters<double>& q, std::vector<double>* grad) {
            model::Tape<double> tape;
            tape.dropout = dropout;
            tape.dropout_seed = 77;
            const auto out = model::forward_train(input, {}, q, tape);
            model::HeadGrads<double> g;
            const auto b = compute_loss(out, t, LossWeights{1, 0.5, 2}, grad ? &g : nullptr);
            if (grad) model::backward(tape, q, model::prepare_backward(q), g, *grad);
            return b.total;
        };
        std::vector<double> grad;
        loss_at(p, &grad);
        const double h = 1e-5;
        double worst = 0;
        for (int k = 0; k < 60; ++k) {
            const auto i = static_cast<std::size_t>(rng.below(static_cast<int>(grad.size())));
            auto plus = p;
            auto minus = p;
            plus.values[i] += h;
            minus.values[i] -= h;
            const double numeric = (loss_at(plus, nullptr) - loss_at(minus, nullptr)) / (2 * h);
            worst = std::max(worst, std::abs(numeric - grad[i]) / std::max({std::abs(numeric), std::abs(grad[i]), 1e-6}));
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("learning rate schedule") {
    TrainConfig tc;
    tc.learning_rate = 1e-2;
    tc.warmup_steps = 10;
    tc.steps = 110;
    tc.min_lr_ratio = 0.1;
    CHECK(learning_rate_at(tc, 0) == doctest::Approx(1e-3));
    CHECK(learning_rate_at(tc, 9) == doctest::Approx(1e-2));
    CHECK(learning_rate_at(tc, 60) == doctest::Approx(1e-3 + 0.5 * 9e-3));
    CHECK(learning_rate_at(tc, 110) == doctest::Approx(1e-3));
    for (int s = 10; s < 110; ++s) CHECK(learning_rate_at(tc, s + 1) <= learning_rate_at(tc, s));
}

TEST_CASE("train config validation") {
    TrainConfig tc;
    tc.validate();
    auto bad = [](auto mutate) {
        TrainConfig c;
        mutate(c);
        return code_of([&] { c.validate(); });
    };
    CHECK(bad([](TrainConfig& c) { c.batch_size = 0; }) == ErrorCode::InvalidArgument);
    CHECK(bad([](TrainConfig& c) { c.learning_rate = -1; }) == ErrorCode::InvalidArgument);
    CHECK(bad([](TrainConfig& c) { c.dropout = 1; }) == ErrorCode::InvalidArgument);
    CHECK(bad([](TrainConfig& c) { c.steps = -1; }) == ErrorCode::InvalidArgument);
    CHECK(parse_stage(stage_name(Stage::SFT)) == Stage::SFT);
    CHECK(task_weights(LossWeights{}, TaskKind::Tts).text == 0.0);
    CHECK(task_weights(LossWeights{}, TaskKind::Asr).text == 1.0);
}

TEST_CASE("training is deterministic and lr 0 leaves parameters untouched") {
    const auto cfg = tiny_config();
    const auto corpus = gen_posttrain_corpus(40, language(), align::AlignConfig{}, 1);
    const auto init = model::init_parameters(cfg);
    TrainConfig tc;
    tc.steps = 6;
    tc.batch_size = 4;
    tc.learning_rate = 1e-2;
    tc.warmup_steps = 2;
    tc.dropout = 0.1;
    tc.weight_decay = 0.1;
    const auto a = train_stage(init, corpus, tc);
    const auto b = train_stage(init, corpus, tc);
    CHECK(a.params.values == b.params.values);
    CHECK(a.loss == b.loss);
    CHECK(a.params.values != init.values);
    REQUIRE(a.loss.size() == 6);

    tc.learning_rate = 0;
    const auto z = train_stage(init, corpus, tc);
    CHECK(z.params.values == init.values);

    const auto wrong_lang = make_toy_language(build_vocabulary(VocabSizes{64, 64, 8, 8}), 0);
    const auto wrong = gen_posttrain_corpus(10, wrong_lang, align::AlignConfig{}, 1);
    CHECK(code_of([&] { train_stage(init, wrong, tc); }) == ErrorCode::ConfigMismatch);
}

TEST_CASE("checkpoints and divergence") {
    const auto cfg = tiny_config();
    const auto corpus = gen_posttrain_corpus(40, language(), align::AlignConfig{}, 1);
    const auto init = model::init_parameters(cfg);
    const auto dir = scratch_dir("ckpt");
    TrainConfig tc;
    tc.steps = 4;
    tc.batch_size = 2;
    tc.eval_every = 2;
    tc.checkpoint_dir = dir;
    const auto r = train_stage(init, corpus, tc);
    REQUIRE(r.checkpoints.size() == 2);
    CHECK(r.checkpoints[0].filename() == "step_000002");
    CHECK(model::load_checkpoint(r.checkpoints[1]).values == r.params.values);

    tc.learning_rate = 1e30;
    tc.grad_clip = 0;
    tc.warmup_steps = 0;
    tc.eval_every = 0;
    tc.steps = 20;
    CHECK(code_of([&] { train_stage(init, corpus, tc); }) == ErrorCode::DivergenceDetected);
    CHECK(fs::exists(dir / "last_good" / "weights.bin"));
    CHECK(model::all_finite(model::load_checkpoint(dir / "last_good").values));
    fs::remove_all(dir);
}

TEST_CASE("default post-train loss falls over the first 200 steps") {
    const model::ModelConfig cfg;
    const auto corpus = gen_posttrain_corpus(2000, make_toy_language(cfg.vocab, 0), align::AlignConfig{}, 0);
    TrainConfig tc;
    tc.steps = 200;
    const auto r = train_stage(model::init_parameters(cfg), corpus, tc);
    REQUIRE(r.loss.size() == 200);
    std::vector<double> avg;
    for (int end = 50; end <= 200; end += 50)
        avg.push_back(std::accumulate(r.loss.begin() + end - 50, r.loss.begin() + end, 0.0) / 50);
    for (std::size_t i = 1; i < avg.size(); ++i) CHECK(avg[i] < avg[i - 1]);
}

TEST_CASE("evaluation suites") {
    const auto& lang = language();
    const align::AlignConfig cfg;
    EvalOptions opt;
    opt.samples_per_task = 10;

    SUBCASE("the ground truth scores perfectly") {
        OracleResponder oracle;
        const auto post = evaluate_suite(oracle, Suite::PostTrain, lang, cfg, 3, opt);
        CHECK(post.accuracy.at("asr_text").rate() == 1.0);
        CHECK(post.accuracy.at("tts_speak").rate() == 1.0);
        CHECK(post.accuracy.at("vqa_text").rate() == 1.0);
        const auto duplex = evaluate_suite(oracle, Suite::Duplex, lang, cfg, 3, opt);
        REQUIRE(duplex.barge_in_response_frames.size() == 10);
        for (int r : duplex.barge_in_response_frames) CHECK(r == cfg.interrupt_truncate);
        for (int l : duplex.turn_take_latency_frames) CHECK(l == cfg.turn_gap + cfg.spk_delay);
        const auto emb = evaluate_suite(oracle, Suite::Embodied, lang, cfg, 3, opt);
        CHECK(emb.success.at("locomotion").rate() == 1.0);
        CHECK(emb.success.at("telepathy").rate() == 1.0);
        CHECK(emb.telepathy_name_emission.correct == 0);
    }
    SUBCASE("an untrained model scores near zero and reproducibly") {
        auto p = std::make_shared<const runtime::Params>(model::init_parameters(model::ModelConfig{}));
        ModelResponder model(p);
        const auto a = evaluate_suite(model, Suite::PostTrain, lang, cfg, 3, opt);
        const auto b = evaluate_suite(model, Suite::PostTrain, lang, cfg, 3, opt);
        CHECK(a == b);
        CHECK(report_document(a) == report_document(b));
        CHECK(a.accuracy.at("asr_text").rate() < 0.2);
        CHECK(a.accuracy.at("tts_speak").rate() < 0.2);
    }
    CHECK(parse_suite("embodied") == Suite::Embodied);
    CHECK(code_of([] { parse_suite("x"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("duplex statistics") {
    CHECK(fraction_within({1, 2, 3, 9, -1}, 0, 3) == doctest::Approx(0.6));
    CHECK(fraction_within({}, 0, 3) == 0.0);
    CHECK(median_frames({5, 1, 3}) == 3.0);
    CHECK(median_frames({1, 2, 3, 4}) == 2.5);
    CHECK(std::isinf(median_frames({1, -1, -1})));
    CHECK(std::isnan(median_frames({})));
}
