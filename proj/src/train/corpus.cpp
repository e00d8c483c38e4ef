#include "fdx/train/corpus.hpp"

#include "fdx/core/error.hpp"
#include "fdx/core/random.hpp"

#include <algorithm>
#include <fstream>

namespace fdx::train {

namespace {

constexpr std::pair<TaskKind, const char*> kTaskNames[] = {
    {TaskKind::Asr, "asr"},           {TaskKind::Tts, "tts"},
    {TaskKind::Vqa, "vqa"},           {TaskKind::MultiTurnQa, "multi_turn_qa"},
    {TaskKind::BargeIn, "barge_in"},  {TaskKind::Noisy, "noisy"},
    {TaskKind::Locomotion, "locomotion"}, {TaskKind::Telepathy, "telepathy"},
};

class ScriptBuilder {
public:
    ScriptBuilder(const ToyLanguage& lang, const align::AlignConfig& cfg, const CorpusOptions& opt, Rng& rng)
        : lang_(lang), cfg_(cfg), opt_(opt), rng_(rng) {
        scene_ = rng_.below(lang_.vocab.num_scenes);
        script_.events.push_back(SceneSet{0, scene_});
        cursor_ = rng_.between(opt_.min_lead, opt_.max_lead);
    }

    int scene() const { return scene_; }
    int cursor() const { return cursor_; }

    std::vector<int> distinct_words(int k) {
        std::vector<int> pool = lang_.content_words;
        std::vector<int> out;
        for (int i = 0; i < k; ++i) {
            const int j = rng_.below(static_cast<int>(pool.size()));
            out.push_back(pool[static_cast<std::size_t>(j)]);
            pool.erase(pool.begin() + j);
        }
        return out;
    }

    int word_count() { return rng_.between(opt_.min_words, opt_.max_words); }

    // User utterance at `start`; returns its end frame.
    int user(const std::vector<int>& words, int start) {
        script_.utterances.push_back(Utterance{Speaker::User, words, lang_.words_to_audio(words), start, {}});
        return start + 3 * static_cast<int>(words.size());
    }

    // Assistant answer to a user utterance ending at user_end: monologue after
    // turn_gap, speech spk_delay later. Returns the speech start frame.
    int answer(const std::vector<int>& words, int user_end) {
        const int start = user_end + cfg_.turn_gap + cfg_.spk_delay;
        script_.utterances.push_back(Utterance{Speaker::Assistant, words, lang_.words_to_audio(words), start, {}});
        last_end_ = start + 3 * static_cast<int>(words.size());
        return start;
    }

    int last_end() const { return last_end_; }

    // One prompt/answer exchange of a post-train task type starting at the cursor.
    void exchange(TaskKind kind) {
        std::vector<int> prompt, reply;
        switch (kind) {
        case TaskKind::Asr:
            prompt = distinct_words(word_count());
            reply = prompt;
            break;
        case TaskKind::Tts:
            prompt = {lang_.say};
            reply = distinct_words(word_count());
            break;
        case TaskKind::Vqa:
            prompt = {lang_.what};
            reply = {lang_.scenes[static_cast<std::size_t>(scene_)].name_word};
            break;
        case TaskKind::Telepathy:
            prompt = {lang_.describe};
            reply = lang_.scenes[static_cast<std::size_t>(scene_)].description;
            break;
        default: throw Error(ErrorCode::InvalidArgument, "not a single-exchange task");
        }
        const int e = user(prompt, cursor_);
        answer(reply, e);
        pause();
    }

    void pause() { cursor_ = last_end_ + rng_.between(opt_.min_pause, opt_.max_pause); }

    DialogueScript finish() {
        script_.horizon = last_end_ + rng_.between(opt_.min_tail, opt_.max_tail);
        return script_;
    }

    DialogueScript& script() { return script_; }

private:
    const ToyLanguage& lang_;
    const align::AlignConfig& cfg_;
    const CorpusOptions& opt_;
    Rng& rng_;
    DialogueScript script_;
    int scene_ = 0;
    int cursor_ = 0;
    int last_end_ = 0;
};

TaskKind random_exchange(Rng& rng) {
    constexpr TaskKind kinds[] = {TaskKind::Asr, TaskKind::Tts, TaskKind::Vqa};
    return kinds[rng.below(3)];
}

Timeline compose(const DialogueScript& s, const ToyLanguage& lang, const align::AlignConfig& cfg) {
    return align::compose_timeline(s, align::StreamMode::TextFirst, cfg, lang.vocab);
}

} // namespace

std::string task_name(TaskKind k) {
    for (const auto& [kind, name] : kTaskNames) {
        if (kind == k) return name;
    }
    return "unknown";
}

TaskKind parse_task(const std::string& s) {
    for (const auto& [kind, name] : kTaskNames) {
        if (s == name) return kind;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown task '" + s + "'");
}

CorpusSample gen_sample(TaskKind task, const ToyLanguage& lang, const align::AlignConfig& cfg,
                        std::uint64_t sample_seed, const CorpusOptions& opt) {
    Rng rng(splitmix64(sample_seed));
    ScriptBuilder b(lang, cfg, opt, rng);
    CorpusSample out;
    out.seed = sample_seed;
    out.task = task;
    switch (task) {
    case TaskKind::Asr:
    case TaskKind::Tts:
    case TaskKind::Vqa:
    case TaskKind::Telepathy:
        b.exchange(task);
        out.script = b.finish();
        out.timeline = compose(out.script, lang, cfg);
        break;
    case TaskKind::MultiTurnQa:
    case TaskKind::Noisy: {
        const int turns = rng.between(2, 3);
        for (int i = 0; i < turns; ++i) b.exchange(random_exchange(rng));
        out.script = b.finish();
        out.timeline = compose(out.script, lang, cfg);
        if (task == TaskKind::Noisy) out.timeline = align::inject_noise(out.timeline, cfg, derive_seed(sample_seed, 1));
        break;
    }
    case TaskKind::Locomotion: {
        const int command = lang.commands[static_cast<std::size_t>(rng.below(static_cast<int>(lang.commands.size())))];
        const int e = b.user({command}, b.cursor());
        const int start = b.answer({command}, e);
        out.script = b.finish();
        out.timeline = compose(out.script, lang, cfg);
        for (int f = start; f < b.last_end(); ++f) out.timeline[f].action = lang.instruction_to_action.at(command);
        break;
    }
    case TaskKind::BargeIn: {
        // A long echoed first answer, interrupted mid-speech by a new request
        // that ends no earlier than turn_gap before the original answer would
        // have.
        const int k = rng.between(4, 6);
        const auto content = b.distinct_words(k);
        const int e = b.user(content, b.cursor());
        const int t = b.answer(content, e);
        const int orig_end = b.last_end();
        const int onset = rng.between(t + 1, orig_end - 3);
        const int need = std::max(opt.min_words, (orig_end - cfg.turn_gap - onset + 2) / 3);
        const auto words = b.distinct_words(need + rng.below(2));
        const int e2 = b.user(words, onset);
        b.answer(words, e2);
        b.script().events.push_back(BargeIn{onset});
        out.script = b.finish();
        out.timeline = align::inject_interruption(compose(out.script, lang, cfg), out.script, cfg);
        break;
    }
    }
    return out;
}

std::vector<CorpusSample> gen_posttrain_corpus(int n, const ToyLanguage& lang, const align::AlignConfig& cfg,
                                               std::uint64_t seed, const CorpusOptions& opt) {
    if (n <= 0) throw Error(ErrorCode::InvalidArgument, "corpus size must be positive");
    constexpr TaskKind kinds[] = {TaskKind::Asr, TaskKind::Tts, TaskKind::Vqa};
    std::vector<CorpusSample> out;
    for (int i = 0; i < n; ++i) {
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
        out.push_back(gen_sample(kinds[s / 10 % 3], lang, cfg, s, opt));
    }
    return out;
}

std::vector<CorpusSample> gen_sft_corpus(int n, const ToyLanguage& lang, const align::AlignConfig& cfg,
                                         std::uint64_t seed, const CorpusOptions& opt) {
    if (n <= 0) throw Error(ErrorCode::InvalidArgument, "corpus size must be positive");
    constexpr TaskKind kinds[] = {TaskKind::MultiTurnQa, TaskKind::BargeIn, TaskKind::Noisy, TaskKind::Locomotion,
                                  TaskKind::Telepathy};
    std::vector<CorpusSample> out;
    for (int i = 0; i < n; ++i) {
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
        out.push_back(gen_sample(kinds[s / 10 % 5], lang, cfg, s, opt));
    }
    return out;
}

std::vector<CorpusSample> held_out_samples(TaskKind task, int n, const ToyLanguage& lang,
                                           const align::AlignConfig& cfg, std::uint64_t seed,
                                           const CorpusOptions& opt) {
    std::vector<CorpusSample> out;
    for (std::uint64_t i = 0; static_cast<int>(out.size()) < n; ++i) {
        const std::uint64_t s = derive_seed(seed, i);
        if (s % 10 != 0) continue;
        out.push_back(gen_sample(task, lang, cfg, s, opt));
    }
    return out;
}

json sample_document(const CorpusSample& s) {
    json j;
    j["version"] = kFormatVersion;
    j["seed"] = s.seed;
    j["task"] = task_name(s.task);
    j["held_out"] = s.held_out();
    j["script"] = script_fields(s.script);
    j["timeline"] = timeline_fields(s.timeline);
    return j;
}

CorpusSample sample_from_document(const json& j) {
    require_version(j);
    try {
        CorpusSample s;
        s.seed = j.at("seed").get<std::uint64_t>();
        s.task = parse_task(j.at("task").get<std::string>());
        s.script = script_from_fields(j.at("script"));
        s.timeline = timeline_from_fields(j.at("timeline"));
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("corpus line: ") + e.what());
    }
}

void write_corpus(const std::vector<CorpusSample>& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    for (const auto& s : corpus) out << to_line(sample_document(s)) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<CorpusSample> read_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::vector<CorpusSample> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(sample_from_document(json::parse(line)));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::InvalidArgument, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

} // namespace fdx::train
