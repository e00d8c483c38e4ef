#include "doctest.h"

#include "fdx/align/align.hpp"
#include "fdx/align/grid.hpp"
#include "fdx/core/error.hpp"
#include "fdx/core/random.hpp"

#include <algorithm>

using namespace fdx;
using namespace fdx::align;

namespace {

const Vocabulary kVocab = build_vocabulary(VocabSizes{});

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an fdx::Error");
    return ErrorCode::InvalidArgument;
}

std::vector<int> audio_run(int n, int first = 20) {
    std::vector<int> a;
    for (int i = 0; i < n; ++i) a.push_back(first + i);
    return a;
}

Utterance assistant(std::vector<int> words, int n_audio, int start) {
    return Utterance{Speaker::Assistant, std::move(words), audio_run(n_audio), start, std::nullopt};
}

} // namespace

TEST_CASE("text-first placement of the worked example") {
    AlignConfig cfg;
    cfg.spk_delay = 2;
    const auto segs = align_text_first(assistant({10, 11, 12}, 9, 4), cfg, kVocab);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].channel == Channel::Speak);
    CHECK(segs[0].start_frame == 4);
    CHECK(segs[0].end_frame() == 13);
    CHECK(segs[1].channel == Channel::Text);
    CHECK(segs[1].start_frame == 2);
    CHECK(segs[1].end_frame() == 13);
    CHECK(std::vector<int>(segs[1].tokens.begin(), segs[1].tokens.begin() + 3) == std::vector<int>{10, 11, 12});
    CHECK(std::all_of(segs[1].tokens.begin() + 3, segs[1].tokens.end(), [](int x) { return x == 0; }));

    DialogueScript s{{assistant({10, 11, 12}, 9, 4)}, {}, 16};
    const auto t = compose_timeline(s, StreamMode::TextFirst, cfg, kVocab);
    REQUIRE(t.size() == 16);
    CHECK(t[2].text == 10);
    CHECK(t[3].text == 11);
    CHECK(t[4].text == 12);
    for (int f = 5; f <= 12; ++f) CHECK(t[f].text == kVocab.text.wait);
    for (int f = 0; f < 16; ++f) {
        const bool speaking = f >= 4 && f <= 12;
        CHECK(t[f].speak == (speaking ? 20 + f - 4 : kVocab.sil));
        CHECK(t[f].listen == kVocab.sil);
        CHECK(t[f].action == kVocab.noop);
    }
}

TEST_CASE("text-first error cases") {
    AlignConfig cfg;
    CHECK(code_of([&] { align_text_first(assistant(std::vector<int>(12, 10), 9, 4), cfg, kVocab); }) ==
          ErrorCode::OverlongMonologue);
    // 11 = 2 + 9 still fits exactly, with no WAIT at all.
    const auto tight = align_text_first(assistant(std::vector<int>(11, 10), 9, 4), cfg, kVocab);
    CHECK(tight[1].tokens.size() == 11);
    CHECK(code_of([&] { align_text_first(assistant({10}, 3, 1), cfg, kVocab); }) == ErrorCode::StartTooEarly);
    cfg.strict = false;
    const auto clamped = align_text_first(assistant({10}, 3, 1), cfg, kVocab);
    CHECK(clamped[1].start_frame == 0);
}

TEST_CASE("zero speech delay boundary") {
    AlignConfig cfg;
    cfg.spk_delay = 0;
    const auto segs = align_text_first(assistant({10}, 3, 0), cfg, kVocab);
    CHECK(segs[0].start_frame == 0);
    CHECK(segs[0].tokens.size() == 3);
    CHECK(segs[1].start_frame == 0);
    CHECK(segs[1].tokens == std::vector<int>{10, 0, 0});
}

TEST_CASE("user utterances never produce text") {
    const Utterance u{Speaker::User, {10, 11}, audio_run(6), 3, std::nullopt};
    const auto segs = align_text_first(u, AlignConfig{}, kVocab);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].channel == Channel::Listen);
}

TEST_CASE("word-level placement with PAD and EPAD") {
    Utterance u = assistant({10, 11}, 6, 10);
    u.word_times = std::vector<int>{0, 4};
    const auto segs = align_word_level(u, 20, kVocab);
    REQUIRE(segs.size() == 2);
    const auto& text = segs[1];
    CHECK(text.start_frame == 10);
    CHECK(text.tokens == std::vector<int>{10, kVocab.text.pad, kVocab.text.pad, kVocab.text.epad, 11, kVocab.text.pad});

    u.word_times.reset();
    CHECK(code_of([&] { align_word_level(u, 20, kVocab); }) == ErrorCode::MissingTimestamps);
    u.word_times = std::vector<int>{0, 0};
    CHECK(code_of([&] { align_word_level(u, 20, kVocab); }) == ErrorCode::CollidingWords);
    u.word_times = std::vector<int>{0, 4};
    CHECK(code_of([&] { align_word_level(u, 15, kVocab); }) == ErrorCode::OutOfHorizon);
}

TEST_CASE("word-level adjacent words get no EPAD, a leading gap does") {
    Utterance u = assistant({10, 11, 12}, 6, 0);
    u.word_times = std::vector<int>{1, 2, 5};
    const auto segs = align_word_level(u, 10, kVocab);
    const int P = kVocab.text.pad, E = kVocab.text.epad;
    CHECK(segs[1].tokens == std::vector<int>{E, 10, 11, P, E, 12});
}

TEST_CASE("compose_timeline fill and scenes") {
    const AlignConfig cfg;
    const auto empty = compose_timeline(DialogueScript{{}, {}, 5}, StreamMode::TextFirst, cfg, kVocab);
    REQUIRE(empty.size() == 5);
    for (const auto& f : empty.frames) CHECK(f == fill_frame(kVocab));

    const auto scened = compose_timeline(DialogueScript{{}, {SceneSet{0, 7}}, 6}, StreamMode::TextFirst, cfg, kVocab);
    for (const auto& f : scened.frames) CHECK(f.visual == 7);

    const auto switched =
        compose_timeline(DialogueScript{{}, {SceneSet{0, 7}, SceneSet{3, 2}}, 6}, StreamMode::TextFirst, cfg, kVocab);
    CHECK(switched[2].visual == 7);
    CHECK(switched[3].visual == 2);
    CHECK(validate_timeline(switched).ok());

    CHECK(code_of([&] {
              compose_timeline(DialogueScript{{}, {SceneSet{2, 7}}, 6}, StreamMode::TextFirst, cfg, kVocab);
          }) == ErrorCode::InvalidScript);
}

TEST_CASE("compose_timeline reports overlap and annotates the utterance") {
    AlignConfig cfg;
    DialogueScript s;
    s.horizon = 30;
    s.utterances.push_back(assistant({10, 11}, 6, 4));
    // Second monologue starts at 9 while the first utterance's WAIT runs to 9.
    s.utterances.push_back(assistant({12}, 3, 11));
    try {
        compose_timeline(s, StreamMode::TextFirst, cfg, kVocab);
        FAIL("expected OverlapWrite");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OverlapWrite);
        CHECK(std::string(e.what()).find("utterance 1") != std::string::npos);
    }
    s.utterances[1] = assistant(std::vector<int>(20, 10), 3, 14);
    try {
        compose_timeline(s, StreamMode::TextFirst, cfg, kVocab);
        FAIL("expected OverlongMonologue");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OverlongMonologue);
        CHECK(std::string(e.what()).find("utterance 1") != std::string::npos);
    }
}

TEST_CASE("noise bursts only touch silent listen frames") {
    DialogueScript s;
    s.horizon = 12;
    s.utterances.push_back(Utterance{Speaker::User, {10}, {30, 31, 32}, 4, std::nullopt});
    s.events.push_back(NoiseBurst{2, 6});
    const auto t = compose_timeline(s, StreamMode::TextFirst, AlignConfig{}, kVocab);
    CHECK(kVocab.is_noise(t[2].listen));
    CHECK(kVocab.is_noise(t[3].listen));
    CHECK(t[4].listen == 30);
    CHECK(kVocab.is_noise(t[7].listen));
    CHECK(t[8].listen == kVocab.sil);
}

namespace {

// Assistant speaking on frames 4..12 with a user onset at 7.
DialogueScript barge_script(int onset) {
    DialogueScript s;
    s.horizon = 20;
    s.utterances.push_back(assistant({10, 11, 12}, 9, 4));
    s.utterances.push_back(Utterance{Speaker::User, {13}, {40, 41, 42}, onset, std::nullopt});
    std::sort(s.utterances.begin(), s.utterances.end(),
              [](const Utterance& a, const Utterance& b) { return a.start_frame < b.start_frame; });
    s.events.push_back(BargeIn{onset});
    return s;
}

} // namespace

TEST_CASE("inject_interruption truncates the interrupted utterance") {
    AlignConfig cfg;
    cfg.interrupt_truncate = 2;
    const auto s = barge_script(7);
    const auto t = compose_timeline(s, StreamMode::TextFirst, cfg, kVocab);
    const auto cut = inject_interruption(t, s, cfg);
    CHECK(cut[7].speak == t[7].speak);
    CHECK(cut[8].speak == t[8].speak);
    for (int f = 9; f <= 12; ++f) {
        CHECK(cut[f].speak == kVocab.sil);
        CHECK(cut[f].text == kVocab.text.wait);
    }
    for (int f = 0; f < t.size(); ++f) {
        CHECK(cut[f].listen == t[f].listen);
        CHECK(cut[f].action == t[f].action);
        if (f < 9 || f > 12) CHECK(cut[f] == t[f]);
    }

    cfg.interrupt_truncate = 0;
    const auto zero = inject_interruption(t, s, cfg);
    for (int f = 7; f <= 12; ++f) CHECK(zero[f].speak == kVocab.sil);
    CHECK(zero[6].speak == t[6].speak);
}

TEST_CASE("inject_interruption at a silent frame") {
    auto s = barge_script(14);
    const auto t = compose_timeline(s, StreamMode::TextFirst, AlignConfig{}, kVocab);
    CHECK(code_of([&] { inject_interruption(t, s, AlignConfig{}); }) == ErrorCode::NoSpeechAtFrame);
}

TEST_CASE("inject_noise") {
    auto s = barge_script(7);
    const auto t = compose_timeline(s, StreamMode::TextFirst, AlignConfig{}, kVocab);
    AlignConfig cfg;

    cfg.noise_prob = 0.0;
    CHECK(inject_noise(t, cfg, 5) == t);

    cfg.noise_prob = 1.0;
    const auto all = inject_noise(t, cfg, 5);
    for (int f = 0; f < t.size(); ++f) {
        if (t[f].listen == kVocab.sil)
            CHECK(kVocab.is_noise(all[f].listen));
        else
            CHECK(all[f].listen == t[f].listen);
        CHECK(all[f].speak == t[f].speak);
        CHECK(all[f].text == t[f].text);
    }

    cfg.noise_prob = 0.3;
    CHECK(inject_noise(t, cfg, 9) == inject_noise(t, cfg, 9));
}

TEST_CASE("strip_transcript") {
    const AlignConfig cfg;
    DialogueScript one{{assistant({10, 11, 12}, 9, 4)}, {}, 16};
    const auto runs = strip_transcript(compose_timeline(one, StreamMode::TextFirst, cfg, kVocab));
    REQUIRE(runs.size() == 1);
    CHECK(runs[0] == RecoveredTranscript{2, {10, 11, 12}});

    CHECK(strip_transcript(fill_timeline(8, kVocab, FrameSpec{})).empty());

    DialogueScript two{{assistant({10, 11, 12}, 9, 4), assistant({20, 21}, 6, 17)}, {}, 26};
    const auto both = strip_transcript(compose_timeline(two, StreamMode::TextFirst, cfg, kVocab));
    REQUIRE(both.size() == 2);
    CHECK(both[0] == RecoveredTranscript{2, {10, 11, 12}});
    CHECK(both[1] == RecoveredTranscript{15, {20, 21}});
}

TEST_CASE("property: random utterances round-trip through composition") {
    Rng rng(2024);
    for (int trial = 0; trial < 500; ++trial) {
        AlignConfig cfg;
        cfg.spk_delay = rng.between(0, 4);
        const int n_a = rng.between(1, 15);
        const int n_w = rng.between(1, 15);
        const int start = rng.between(cfg.spk_delay, cfg.spk_delay + 6);
        std::vector<int> words;
        for (int i = 0; i < n_w; ++i) words.push_back(rng.between(5, 63));
        Utterance u{Speaker::Assistant, words, audio_run(n_a, 8), start, std::nullopt};
        DialogueScript s{{u}, {}, start + n_a + rng.between(0, 3)};
        if (n_w > cfg.spk_delay + n_a) {
            CHECK(code_of([&] { compose_timeline(s, StreamMode::TextFirst, cfg, kVocab); }) ==
                  ErrorCode::OverlongMonologue);
            continue;
        }
        const auto t = compose_timeline(s, StreamMode::TextFirst, cfg, kVocab);
        CHECK(validate_timeline(t).ok());
        const auto runs = strip_transcript(t);
        REQUIRE(runs.size() == 1);
        CHECK(runs[0].start_frame == start - cfg.spk_delay);
        CHECK(runs[0].tokens == words);
        int last_speak = -1;
        for (int f = 0; f < t.size(); ++f)
            if (t[f].speak != kVocab.sil) last_speak = f;
        CHECK(runs[0].start_frame + n_w - 1 <= last_speak);
        if (n_w < cfg.spk_delay + n_a) CHECK(runs[0].start_frame + n_w - 1 < last_speak);
    }
}

TEST_CASE("property: composition is order independent") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        DialogueScript s;
        int cursor = 2;
        for (int k = 0; k < 4; ++k) {
            const int n_w = rng.between(1, 3);
            std::vector<int> words;
            for (int i = 0; i < n_w; ++i) words.push_back(rng.between(5, 60));
            const bool user = rng.bernoulli(0.5);
            Utterance u{user ? Speaker::User : Speaker::Assistant, words, audio_run(3 * n_w, 8), cursor, std::nullopt};
            s.utterances.push_back(u);
            cursor += 3 * n_w + 3;
        }
        s.horizon = cursor;
        const auto a = compose_timeline(s, StreamMode::TextFirst, AlignConfig{}, kVocab);
        auto shuffled = s;
        std::reverse(shuffled.utterances.begin(), shuffled.utterances.end());
        CHECK(compose_timeline(shuffled, StreamMode::TextFirst, AlignConfig{}, kVocab) == a);
        std::rotate(shuffled.utterances.begin(), shuffled.utterances.begin() + 1, shuffled.utterances.end());
        CHECK(compose_timeline(shuffled, StreamMode::TextFirst, AlignConfig{}, kVocab) == a);
    }
}

TEST_CASE("grid rendering of the worked example") {
    DialogueScript s{{assistant({10, 11, 12}, 9, 4)}, {}, 14};
    const auto grid = render_grid(compose_timeline(s, StreamMode::TextFirst, AlignConfig{}, kVocab));
    const std::string expected = "frame    0  1  2  3  4  5  6  7  8  9 10 11 12 13\n"
                                 "listen   _  _  _  _  _  _  _  _  _  _  _  _  _  _\n"
                                 "speak    _  _  _  _ 20 21 22 23 24 25 26 27 28  _\n"
                                 "text     \xC2\xB7  \xC2\xB7 10 11 12  \xC2\xB7  \xC2\xB7  \xC2\xB7  \xC2\xB7  "
                                 "\xC2\xB7  \xC2\xB7  \xC2\xB7  \xC2\xB7  \xC2\xB7\n"
                                 "action   .  .  .  .  .  .  .  .  .  .  .  .  .  .\n";
    CHECK(grid == expected);
}
