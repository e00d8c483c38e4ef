#include "commands.hpp"

#include "fdx/align/align.hpp"
#include "fdx/align/grid.hpp"
#include "fdx/core/error.hpp"
#include "fdx/core/random.hpp"
#include "fdx/model/checkpoint.hpp"
#include "fdx/model/cost.hpp"
#include "fdx/runtime/tdm.hpp"
#include "fdx/service/server.hpp"
#include "fdx/train/eval.hpp"
#include "fdx/train/trainer.hpp"

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iterator>

namespace fdx::cli {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); }

void require(bool ok, const std::string& what) {
    if (!ok) invalid(what);
}

std::string hash_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return model::hex64(fnv1a64(bytes.data(), bytes.size()));
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
}

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

align::AlignConfig align_config(int spk_delay, double noise_prob = 0.1) {
    align::AlignConfig ac;
    ac.spk_delay = spk_delay;
    ac.noise_prob = noise_prob;
    ac.validate();
    return ac;
}

train::ToyLanguage language(std::uint64_t lang_seed) {
    return train::make_toy_language(model::ModelConfig{}.vocab, lang_seed);
}

model::ModelConfig model_config(std::uint64_t seed) {
    model::ModelConfig mc;
    mc.seed = seed;
    return mc;
}

std::shared_ptr<const runtime::Params> load_or_init(const std::string& checkpoint, RunContext& ctx) {
    if (checkpoint.empty())
        return std::make_shared<const runtime::Params>(model::init_parameters(model_config(ctx.globals().seed)));
    ctx.input(checkpoint);
    return std::make_shared<const runtime::Params>(model::load_checkpoint(checkpoint));
}

model::SamplingPolicy policy(double temperature, std::uint64_t seed) {
    return temperature > 0 ? model::SamplingPolicy::temperature(temperature, seed) : model::SamplingPolicy::greedy();
}

std::vector<train::CorpusSample> generate(const std::string& stage, int n, const train::ToyLanguage& lang,
                                          const align::AlignConfig& ac, std::uint64_t seed) {
    return train::parse_stage(stage) == train::Stage::PostTrain ? train::gen_posttrain_corpus(n, lang, ac, seed)
                                                                : train::gen_sft_corpus(n, lang, ac, seed);
}

void serialize_tdm(std::vector<train::CorpusSample>& corpus, int chunk) {
    if (chunk <= 0) return;
    for (auto& s : corpus) s.timeline = runtime::tdm_serialize(s.timeline, chunk);
}

train::TrainConfig train_config(const TrainArgs& a, std::uint64_t seed) {
    train::TrainConfig tc;
    tc.stage = train::parse_stage(a.stage);
    tc.steps = a.steps;
    tc.batch_size = a.batch;
    tc.learning_rate = a.lr;
    tc.warmup_steps = a.warmup;
    tc.weight_decay = a.weight_decay;
    tc.dropout = a.dropout;
    tc.grad_clip = a.grad_clip;
    tc.eval_every = a.checkpoint_every;
    tc.seed = seed;
    return tc;
}

DialogueScript demo_script(bool word_level) {
    Utterance u{Speaker::Assistant, {10, 11, 12}, {}, 4, std::nullopt};
    for (int i = 0; i < 9; ++i) u.audio.push_back(20 + i);
    if (word_level) u.word_times = std::vector<int>{0, 3, 6};
    return DialogueScript{{u}, {}, 14};
}

} // namespace

RunContext::RunContext(Globals g, std::ostream& out) : g_(std::move(g)), out_(out) {}

fs::path RunContext::output(const std::string& name) {
    fs::create_directories(g_.out);
    outputs.push_back(name);
    return fs::path(g_.out) / name;
}

void RunContext::input(const fs::path& p) {
    if (fs::is_directory(p)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(p))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) inputs[f.string()] = hash_file(f);
        return;
    }
    inputs[p.string()] = hash_file(p);
}

void validate(const GenDataArgs& a) {
    train::parse_stage(a.stage);
    require(a.samples > 0, "--samples must be > 0");
    align_config(a.spk_delay, a.noise_prob);
    require(a.chunk >= 0, "--chunk must be >= 0");
}

void validate(const TrainArgs& a) {
    require(a.steps >= 0, "--steps must be >= 0");
    auto tc = train_config(a, 0);
    tc.steps = std::max(a.steps, 1);
    tc.validate();
    require(a.samples > 0, "--samples must be > 0");
    require(a.chunk >= 0, "--chunk must be >= 0");
    require(a.log_every >= 0, "--log-every must be >= 0");
    align_config(a.spk_delay);
    require(a.corpus.empty() || fs::is_regular_file(a.corpus), "no corpus file at " + a.corpus);
    require(a.init.empty() || fs::is_directory(a.init), "no checkpoint directory at " + a.init);
}

void validate(const EvalArgs& a) {
    train::parse_suite(a.suite);
    require(fs::is_directory(a.checkpoint), "no checkpoint directory at " + a.checkpoint);
    require(a.samples > 0, "--samples must be > 0");
    require(a.temperature >= 0, "--temperature must be >= 0");
    align_config(a.spk_delay);
}

void validate(const AlignArgs& a) {
    require(a.demo.empty() != a.script.empty(), "exactly one of --demo or --script is required");
    require(a.demo.empty() || a.demo == "text-first" || a.demo == "word-level", "--demo is text-first or word-level");
    require(a.stream == "text-first" || a.stream == "word-level", "--stream is text-first or word-level");
    require(a.script.empty() || fs::is_regular_file(a.script), "no script file at " + a.script);
    align_config(a.spk_delay);
}

void validate(const BenchTdmArgs& a) {
    require(a.frames >= 1, "--frames must be >= 1");
    require(a.chunk >= 1, "--chunk must be >= 1");
    require(a.channels >= 2, "--channels must be >= 2");
}

void validate(const SimulateArgs& a) {
    train::parse_task(a.task);
    runtime::parse_clock_mode(a.mode);
    require(a.temperature >= 0, "--temperature must be >= 0");
    require(a.tdm_chunk >= 0, "--tdm-chunk must be >= 0");
    require(a.tdm_chunk == 0 || a.mode == "lockstep", "--tdm-chunk runs in lockstep only");
    require(a.checkpoint.empty() || fs::is_directory(a.checkpoint), "no checkpoint directory at " + a.checkpoint);
    align_config(a.spk_delay, a.noise_prob);
}

void validate(const ServeArgs& a, const Globals& g) {
    service::ServeOptions opt;
    service::parse_bind(a.bind, opt);
    opt.max_sessions = a.max_sessions;
    opt.default_mode = a.mode;
    opt.frame_ms = g.frame_ms;
    opt.validate();
    require(a.checkpoint.empty() || fs::is_directory(a.checkpoint), "no checkpoint directory at " + a.checkpoint);
}

void run_gen_data(const GenDataArgs& a, RunContext& ctx) {
    const auto ac = align_config(a.spk_delay, a.noise_prob);
    auto corpus = generate(a.stage, a.samples, language(a.lang_seed), ac, ctx.globals().seed);
    serialize_tdm(corpus, a.chunk);
    train::write_corpus(corpus, ctx.output("corpus.jsonl"));
    const auto held = std::count_if(corpus.begin(), corpus.end(), [](const auto& s) { return s.held_out(); });
    ctx.out() << "corpus.jsonl: " << corpus.size() << " samples, " << held << " held out\n";
}

void run_train(const TrainArgs& a, RunContext& ctx) {
    const auto seed = ctx.globals().seed;
    model::Parameters<float> params =
        a.init.empty() ? model::init_parameters(model_config(seed)) : (ctx.input(a.init), model::load_checkpoint(a.init));
    std::vector<double> loss;
    if (a.steps > 0) {
        std::vector<train::CorpusSample> corpus;
        if (!a.corpus.empty()) {
            ctx.input(a.corpus);
            corpus = train::read_corpus(a.corpus);
        } else {
            corpus = generate(a.stage, a.samples, language(a.lang_seed), align_config(a.spk_delay), seed);
        }
        serialize_tdm(corpus, a.chunk);
        auto tc = train_config(a, seed);
        tc.checkpoint_dir = fs::path(ctx.globals().out) / "checkpoints";
        auto r = train::train_stage(params, corpus, tc, [&](int step, double l) {
            if (a.log_every > 0 && (step + 1) % a.log_every == 0)
                ctx.out() << "step " << step + 1 << " loss " << fixed(l) << '\n';
        });
        params = std::move(r.params);
        loss = std::move(r.loss);
        for (const auto& p : r.checkpoints) ctx.outputs.push_back(fs::relative(p, ctx.globals().out).string());
    }
    model::save_checkpoint(params, ctx.output("checkpoint"));
    std::string csv = "step,loss\n";
    for (std::size_t i = 0; i < loss.size(); ++i) csv += std::to_string(i + 1) + ',' + fixed(loss[i]) + '\n';
    write_text(ctx.output("loss.csv"), csv);
    ctx.out() << "checkpoint: " << a.steps << " steps, config " << model::hex64(model::config_hash(params.config))
              << '\n';
}

void run_eval(const EvalArgs& a, RunContext& ctx) {
    const auto seed = ctx.globals().seed;
    runtime::RunOptions ro;
    ro.seed = seed;
    ro.policy = policy(a.temperature, seed);
    train::ModelResponder responder(load_or_init(a.checkpoint, ctx), ro);
    train::EvalOptions eo;
    eo.samples_per_task = a.samples;
    const auto report = train::evaluate_suite(responder, train::parse_suite(a.suite), language(a.lang_seed),
                                              align_config(a.spk_delay), seed, eo);
    write_text(ctx.output("report.json"), train::report_document(report).dump(2) + '\n');
    const auto csv = train::report_csv(report);
    write_text(ctx.output("report.csv"), csv);
    ctx.out() << csv;
}

void run_align(const AlignArgs& a, RunContext& ctx) {
    const auto vocab = model::ModelConfig{}.vocab;
    const bool word_level = a.demo.empty() ? a.stream == "word-level" : a.demo == "word-level";
    DialogueScript script;
    if (!a.demo.empty()) {
        script = demo_script(word_level);
    } else {
        ctx.input(a.script);
        std::ifstream in(a.script);
        script = script_from_document(json::parse(in));
    }
    const auto mode = word_level ? align::StreamMode::WordLevel : align::StreamMode::TextFirst;
    const auto t = align::compose_timeline(script, mode, align_config(a.spk_delay), vocab);
    const auto grid = align::render_grid(t);
    write_text(ctx.output("grid.txt"), grid);
    write_text(ctx.output("timeline.json"), to_document(t).dump() + '\n');
    ctx.out() << grid;
}

void run_bench_tdm(const BenchTdmArgs& a, RunContext& ctx) {
    const auto par = model::attention_cost(a.frames, model::CostMode::parallel());
    const auto tdm = model::attention_cost(a.frames, model::CostMode::tdm(a.chunk), a.channels);
    const auto ms = static_cast<std::int64_t>(ctx.globals().frame_ms);
    const std::string tdm_name = "tdm(c=" + std::to_string(a.chunk) + ")";
    std::string csv = "mode,positions,attention_pairs,response_frames,response_ms\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %10s %16s %16s %12s\n", "mode", "positions", "attention_pairs",
                  "response_frames", "response_ms");
    std::string table = line;
    for (const auto& [name, c] : {std::pair{std::string("parallel"), par}, std::pair{tdm_name, tdm}}) {
        std::snprintf(line, sizeof line, "%-12s %10lld %16lld %16lld %12lld\n", name.c_str(),
                      static_cast<long long>(c.sequence_positions), static_cast<long long>(c.attention_pair_count),
                      static_cast<long long>(c.worst_case_response_frames),
                      static_cast<long long>(c.worst_case_response_frames * ms));
        table += line;
        csv += name + ',' + std::to_string(c.sequence_positions) + ',' + std::to_string(c.attention_pair_count) + ',' +
               std::to_string(c.worst_case_response_frames) + ',' + std::to_string(c.worst_case_response_frames * ms) +
               '\n';
    }
    const auto r = model::pair_ratio(tdm, par);
    table += "pair ratio tdm/parallel = " + std::to_string(r.num) + "/" + std::to_string(r.den) + " (" +
             fixed(static_cast<double>(r.num) / static_cast<double>(r.den), 3) + ")\n";
    write_text(ctx.output("bench.csv"), csv);
    ctx.out() << table;
}

void run_simulate(const SimulateArgs& a, RunContext& ctx) {
    const auto seed = ctx.globals().seed;
    const auto params = load_or_init(a.checkpoint, ctx);
    const auto lang = language(a.lang_seed);
    const auto sample_seed = a.sample_seed >= 0 ? static_cast<std::uint64_t>(a.sample_seed) : seed;
    const auto sample = train::gen_sample(train::parse_task(a.task), lang, align_config(a.spk_delay, a.noise_prob),
                                          sample_seed);
    const auto feed = runtime::feed_from_timeline(sample.timeline, sample.script);
    runtime::RunOptions ro;
    ro.seed = seed;
    ro.policy = policy(a.temperature, seed);
    ro.frame_spec.frame_ms = ctx.globals().frame_ms;
    const auto run = a.tdm_chunk > 0 ? runtime::tdm_session(params, feed, a.tdm_chunk, ro).run
                                     : runtime::run_scripted_session(params, feed, runtime::parse_clock_mode(a.mode), ro);
    runtime::write_trace(run.trace, ctx.output("trace.jsonl"));
    const auto metrics = runtime::metrics_document(run.duplex, run.overrun_count);
    write_text(ctx.output("metrics.json"), metrics.dump(2) + '\n');
    write_text(ctx.output("script.json"), to_document(sample.script).dump() + '\n');
    const auto grid = align::render_grid(runtime::session_timeline(feed, run.trace, params->config.vocab, ro.frame_spec));
    write_text(ctx.output("grid.txt"), grid);
    ctx.out() << grid << metrics.dump() << '\n';
}

void run_serve(const ServeArgs& a, RunContext& ctx, const std::function<void()>& write_manifest) {
    service::ServeOptions opt;
    service::parse_bind(a.bind, opt);
    service::apply_bind_override(opt);
    opt.max_sessions = a.max_sessions;
    opt.default_mode = a.mode;
    opt.frame_ms = ctx.globals().frame_ms;
    opt.checkpoint_name = a.checkpoint.empty() ? "" : fs::path(a.checkpoint).lexically_normal().filename().string();
    opt.validate();
    const auto params = load_or_init(a.checkpoint, ctx);

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    service::Server server(params, opt);
    const auto port = server.start();
    write_manifest();
    ctx.out() << "listening on " << opt.address << ':' << port << std::endl;
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
    server.wait();
    pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
    ctx.out() << "stopped\n";
}

} // namespace fdx::cli
