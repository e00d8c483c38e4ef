#include "fdx/train/eval.hpp"

#include "fdx/core/error.hpp"
#include "fdx/train/trainer.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <sstream>

namespace fdx::train {

std::string suite_name(Suite s) {
    switch (s) {
    case Suite::PostTrain: return "posttrain";
    case Suite::Duplex: return "duplex";
    case Suite::Embodied: return "embodied";
    }
    return "posttrain";
}

Suite parse_suite(const std::string& s) {
    for (Suite x : {Suite::PostTrain, Suite::Duplex, Suite::Embodied}) {
        if (suite_name(x) == s) return x;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown suite '" + s + "'");
}

ModelResponder::ModelResponder(std::shared_ptr<const runtime::Params> params, runtime::RunOptions opt)
    : params_(std::move(params)), opt_(opt) {
    if (!params_) throw Error(ErrorCode::InvalidArgument, "responder needs parameters");
}

std::vector<runtime::TickOutput> ModelResponder::trace(const CorpusSample&, const runtime::ScriptedFeed& feed) {
    return runtime::run_scripted_session(params_, feed, runtime::ClockMode::Lockstep, opt_).trace;
}

std::vector<int> ModelResponder::speak_given_text(const CorpusSample& s) {
    const auto& p = *params_;
    const auto& v = p.config.vocab;
    const auto& t = s.timeline;
    model::DecodeCache<float> cache;
    const auto ctx = context_scenes(t, p);
    if (!ctx.empty()) {
        const auto enc = model::encode_visual_context(ctx, p);
        cache = model::new_cache(p, &enc);
    } else {
        cache = model::new_cache(p);
    }
    Rng rng(opt_.seed);
    model::SampledTokens next{v.text.wait, v.sil, v.noop};
    std::vector<int> out;
    for (int f = 0; f < t.size(); ++f) {
        const TimelineFrame frame{t[f].listen, next.speak, t[f].text, next.action, t[f].visual};
        out.push_back(frame.speak);
        const auto step = model::decode_step(cache, frame, p);
        next = model::sample_heads(step.logits(), opt_.policy, rng);
    }
    return out;
}

std::vector<runtime::TickOutput> OracleResponder::trace(const CorpusSample& s, const runtime::ScriptedFeed&) {
    std::vector<runtime::TickOutput> out;
    const auto& t = s.timeline;
    for (int f = 0; f < t.size(); ++f)
        out.push_back({f, t[f].speak, t[f].text, t[f].action, runtime::classify_mode(t[f].listen, t[f].speak, t.vocab),
                       0});
    return out;
}

std::vector<int> OracleResponder::speak_given_text(const CorpusSample& s) {
    std::vector<int> out;
    for (const auto& f : s.timeline.frames) out.push_back(f.speak);
    return out;
}

namespace {

void score_text(const CorpusSample& s, const std::vector<runtime::TickOutput>& trace, const align::AlignConfig& cfg,
                Tally& tally) {
    for (const auto& u : s.script.utterances) {
        if (u.speaker != Speaker::Assistant) continue;
        const int mono = u.start_frame - cfg.spk_delay;
        for (std::size_t i = 0; i < u.transcript.size(); ++i) {
            const int f = mono + static_cast<int>(i);
            ++tally.total;
            if (f < static_cast<int>(trace.size()) && trace[static_cast<std::size_t>(f)].text == u.transcript[i])
                ++tally.correct;
        }
    }
}

void score_speak(const CorpusSample& s, const std::vector<int>& speak, Tally& tally) {
    for (const auto& u : s.script.utterances) {
        if (u.speaker != Speaker::Assistant) continue;
        for (std::size_t k = 0; k < u.audio.size(); ++k) {
            const int f = u.start_frame + static_cast<int>(k);
            ++tally.total;
            if (f < static_cast<int>(speak.size()) && speak[static_cast<std::size_t>(f)] == u.audio[k])
                ++tally.correct;
        }
    }
}

std::vector<int> emitted_words(const std::vector<runtime::TickOutput>& trace, const ToyLanguage& lang) {
    const std::set<int> words(lang.word_ids.begin(), lang.word_ids.end());
    std::vector<int> out;
    for (const auto& o : trace) {
        if (words.count(o.text)) out.push_back(o.text);
    }
    return out;
}

std::uint64_t suite_seed(std::uint64_t seed, TaskKind task) {
    return derive_seed(seed, 1000 + static_cast<std::uint64_t>(task));
}

} // namespace

EvalReport evaluate_suite(Responder& responder, Suite suite, const ToyLanguage& lang, const align::AlignConfig& cfg,
                          std::uint64_t seed, const EvalOptions& opt) {
    if (opt.samples_per_task <= 0) throw Error(ErrorCode::InvalidArgument, "samples_per_task must be positive");
    EvalReport r;
    r.suite = suite_name(suite);
    r.seed = seed;
    r.samples_per_task = opt.samples_per_task;
    const int sil = lang.vocab.sil;
    auto held = [&](TaskKind task) {
        return held_out_samples(task, opt.samples_per_task, lang, cfg, suite_seed(seed, task), opt.corpus);
    };
    auto run = [&](const CorpusSample& s) {
        return responder.trace(s, runtime::feed_from_timeline(s.timeline, s.script));
    };

    switch (suite) {
    case Suite::PostTrain:
        for (const auto& s : held(TaskKind::Asr)) score_text(s, run(s), cfg, r.accuracy["asr_text"]);
        for (const auto& s : held(TaskKind::Tts)) score_speak(s, responder.speak_given_text(s), r.accuracy["tts_speak"]);
        for (const auto& s : held(TaskKind::Vqa)) score_text(s, run(s), cfg, r.accuracy["vqa_text"]);
        break;
    case Suite::Duplex:
        for (const auto& s : held(TaskKind::BargeIn)) {
            const auto trace = run(s);
            for (const auto& e : s.script.events) {
                if (const auto* b = std::get_if<BargeIn>(&e))
                    r.barge_in_response_frames.push_back(runtime::barge_in_response(trace, b->frame, true, sil));
            }
            for (const auto& u : s.script.utterances) {
                if (u.speaker != Speaker::User) continue;
                const int l = runtime::turn_take_latency(trace, u.end_frame(), sil);
                r.turn_take_latency_frames.push_back(l == runtime::kNotApplicable ? -1 : l);
            }
        }
        break;
    case Suite::Embodied: {
        auto& loco = r.success["locomotion"];
        for (const auto& s : held(TaskKind::Locomotion)) {
            const auto trace = run(s);
            bool ok = static_cast<int>(trace.size()) == s.timeline.size();
            for (int f = 0; ok && f < s.timeline.size(); ++f) ok = trace[static_cast<std::size_t>(f)].action == s.timeline[f].action;
            ++loco.total;
            loco.correct += ok;
        }
        auto& tele = r.success["telepathy"];
        for (const auto& s : held(TaskKind::Telepathy)) {
            const auto words = emitted_words(run(s), lang);
            const int scene = s.timeline[0].visual.value_or(0);
            const auto& entry = lang.scenes[static_cast<std::size_t>(scene)];
            const bool named = std::find(words.begin(), words.end(), entry.name_word) != words.end();
            ++tele.total;
            tele.correct += !named && words == entry.description;
            ++r.telepathy_name_emission.total;
            r.telepathy_name_emission.correct += named;
        }
        break;
    }
    }
    return r;
}

double fraction_within(const std::vector<int>& v, int lo, int hi) {
    if (v.empty()) return 0.0;
    long hit = 0;
    for (int x : v) hit += x >= 0 && x >= lo && x <= hi;
    return static_cast<double>(hit) / static_cast<double>(v.size());
}

double median_frames(const std::vector<int>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> x;
    for (int e : v) x.push_back(e < 0 ? std::numeric_limits<double>::infinity() : e);
    std::sort(x.begin(), x.end());
    const std::size_t n = x.size();
    return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

json report_document(const EvalReport& r) {
    json j;
    j["version"] = kFormatVersion;
    j["suite"] = r.suite;
    j["seed"] = r.seed;
    j["samples_per_task"] = r.samples_per_task;
    auto tallies = [](const std::map<std::string, Tally>& m) {
        json o = json::object();
        for (const auto& [k, t] : m) o[k] = {{"correct", t.correct}, {"total", t.total}, {"rate", t.rate()}};
        return o;
    };
    j["accuracy"] = tallies(r.accuracy);
    j["success"] = tallies(r.success);
    j["telepathy_name_emission"] = {{"correct", r.telepathy_name_emission.correct},
                                    {"total", r.telepathy_name_emission.total},
                                    {"rate", r.telepathy_name_emission.rate()}};
    j["barge_in_response_frames"] = r.barge_in_response_frames;
    j["turn_take_latency_frames"] = r.turn_take_latency_frames;
    j["loss_curve"] = r.loss_curve;
    return j;
}

std::string report_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "metric,value\n";
    for (const auto& [k, t] : r.accuracy) out << "accuracy." << k << ',' << t.rate() << '\n';
    for (const auto& [k, t] : r.success) out << "success." << k << ',' << t.rate() << '\n';
    if (r.telepathy_name_emission.total)
        out << "telepathy_name_emission," << r.telepathy_name_emission.rate() << '\n';
    if (!r.barge_in_response_frames.empty()) {
        out << "barge_in_response.median," << median_frames(r.barge_in_response_frames) << '\n';
        out << "barge_in_response.within_3," << fraction_within(r.barge_in_response_frames, 0, 3) << '\n';
    }
    if (!r.turn_take_latency_frames.empty()) {
        out << "turn_take_latency.median," << median_frames(r.turn_take_latency_frames) << '\n';
        out << "turn_take_latency.within_3_7," << fraction_within(r.turn_take_latency_frames, 3, 7) << '\n';
    }
    if (!r.loss_curve.empty()) out << "loss.final," << r.loss_curve.back() << '\n';
    return out.str();
}

} // namespace fdx::train
