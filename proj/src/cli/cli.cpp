#include "fdx/cli/cli.hpp"

#include "commands.hpp"
#include "fdx/core/error.hpp"
#include "fdx/core/frame.hpp"
#include "fdx/service/protocol.hpp"

#include "CLI11.hpp"

#include <ctime>
#include <fstream>

namespace fdx::cli {

namespace {

// Flat JSON object: "key" sets a global flag, "subcommand.key" a flag of
// that subcommand.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw CLI::ValidationError("--config", e.what());
        }
        if (!j.is_object()) throw CLI::ValidationError("--config", "expected a JSON object");
        std::vector<CLI::ConfigItem> items;
        for (const auto& [key, value] : j.items()) {
            CLI::ConfigItem item;
            const auto dot = key.find('.');
            if (dot == std::string::npos) {
                item.name = key;
            } else {
                item.parents = {key.substr(0, dot)};
                item.name = key.substr(dot + 1);
            }
            if (value.is_string()) {
                item.inputs = {value.get<std::string>()};
            } else if (value.is_number() || value.is_boolean()) {
                item.inputs = {value.dump()};
            } else {
                throw CLI::ValidationError("--config", "value of '" + key + "' must be a string, number or boolean");
            }
            items.push_back(std::move(item));
        }
        return items;
    }
};

json typed(const std::string& s) {
    try {
        const auto v = json::parse(s);
        if (v.is_number() || v.is_boolean()) return v;
    } catch (const json::exception&) {
    }
    return s;
}

void add_values(json& config, const CLI::App& app, const std::string& prefix) {
    for (const auto* opt : app.get_options()) {
        const auto name = opt->get_single_name();
        if (name == "help" || name == "config") continue;
        const auto& results = opt->results();
        config[prefix + name] = typed(results.empty() ? opt->get_default_str() : results.back());
    }
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const CLI::App& app, const CLI::App& sub, const std::vector<std::string>& args,
                    const RunContext& ctx) {
    json config = json::object();
    add_values(config, app, "");
    add_values(config, sub, sub.get_name() + ".");
    json m;
    m["version"] = kFormatVersion;
    m["command"] = sub.get_name();
    m["argv"] = args;
    m["config"] = config;
    m["seed"] = ctx.globals().seed;
    m["versions"] = {{"fdx", kToolVersion},
                     {"format", kFormatVersion},
                     {"protocol", service::kProtocolVersion},
                     {"compiler", __VERSION__}};
    m["inputs"] = ctx.inputs;
    m["outputs"] = ctx.outputs;
    m["timestamp"] = utc_timestamp();
    const auto path = std::filesystem::path(ctx.globals().out) / "manifest.json";
    std::filesystem::create_directories(ctx.globals().out);
    std::ofstream out(path, std::ios::trunc);
    out << m.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

CLI::Option* choice(CLI::App* app, const std::string& name, std::string& var, const std::string& help,
                    std::vector<std::string> allowed) {
    return app->add_option(name, var, help)->check(CLI::IsMember(std::move(allowed)));
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Toy full-duplex speech model: data, training, evaluation, simulation and serving.", "fdx"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.config_formatter(std::make_shared<JsonConfig>());
    app.allow_config_extras(CLI::config_extras_mode::error);

    Globals g;
    app.set_config("--config", "", "JSON file of flat dotted keys (seed, train.steps, ...); flags override it");
    app.add_option("--seed", g.seed, "Master seed for every stochastic step");
    app.add_option("--out", g.out, "Directory receiving all artifacts and manifest.json");
    app.add_option("--frame-ms", g.frame_ms, "Frame duration in milliseconds")->check(CLI::PositiveNumber);

    const std::vector<std::string> stages = {"post", "sft"};
    const std::vector<std::string> modes = {"lockstep", "realtime"};

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic corpus (corpus.jsonl)");
    choice(gen_cmd, "--stage", gen.stage, "Corpus family", stages);
    gen_cmd->add_option("--samples", gen.samples, "Number of samples")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--lang-seed", gen.lang_seed, "Seed of the toy language");
    gen_cmd->add_option("--spk-delay", gen.spk_delay, "Text lead over speech in frames");
    gen_cmd->add_option("--noise-prob", gen.noise_prob, "Listen-channel noise probability");
    gen_cmd->add_option("--chunk", gen.chunk, "Serialize timelines for the TDM baseline with this chunk; 0 keeps them parallel");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train one stage and write checkpoint/ and loss.csv");
    choice(train_cmd, "--stage", tr.stage, "Training stage", stages);
    train_cmd->add_option("--steps", tr.steps, "Optimizer steps; 0 writes the initial checkpoint");
    train_cmd->add_option("--batch", tr.batch, "Samples per step");
    train_cmd->add_option("--lr", tr.lr, "Peak learning rate");
    train_cmd->add_option("--warmup", tr.warmup, "Linear warmup steps");
    train_cmd->add_option("--weight-decay", tr.weight_decay, "Decoupled weight decay");
    train_cmd->add_option("--dropout", tr.dropout, "Dropout on block outputs");
    train_cmd->add_option("--grad-clip", tr.grad_clip, "Global gradient norm clip; 0 disables");
    train_cmd->add_option("--samples", tr.samples, "Generated corpus size when --corpus is absent");
    train_cmd->add_option("--corpus", tr.corpus, "Corpus file from gen-data");
    train_cmd->add_option("--init", tr.init, "Checkpoint to start from; default is a fresh model seeded by --seed");
    train_cmd->add_option("--lang-seed", tr.lang_seed, "Seed of the toy language");
    train_cmd->add_option("--spk-delay", tr.spk_delay, "Text lead over speech in frames");
    train_cmd->add_option("--chunk", tr.chunk, "TDM-serialize the corpus with this chunk; 0 trains the parallel model");
    train_cmd->add_option("--checkpoint-every", tr.checkpoint_every, "Checkpoint period in steps; 0 disables");
    train_cmd->add_option("--log-every", tr.log_every, "Progress line period in steps; 0 is quiet");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on held-out samples (report.json, report.csv)");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
    choice(eval_cmd, "--suite", ev.suite, "Evaluation suite", {"posttrain", "duplex", "embodied"});
    eval_cmd->add_option("--samples", ev.samples, "Samples per task");
    eval_cmd->add_option("--lang-seed", ev.lang_seed, "Seed of the toy language");
    eval_cmd->add_option("--spk-delay", ev.spk_delay, "Text lead over speech in frames");
    eval_cmd->add_option("--temperature", ev.temperature, "Sampling temperature; 0 is greedy");

    AlignArgs al;
    auto* align_cmd = app.add_subcommand("align", "Render a composed timeline as a grid (grid.txt, timeline.json)");
    choice(align_cmd, "--demo", al.demo, "Built-in single-utterance example", {"text-first", "word-level"});
    align_cmd->add_option("--script", al.script, "Dialogue script document to compose");
    choice(align_cmd, "--stream", al.stream, "Stream organization for --script", {"text-first", "word-level"});
    align_cmd->add_option("--spk-delay", al.spk_delay, "Text lead over speech in frames");

    BenchTdmArgs bt;
    auto* bench_cmd = app.add_subcommand("bench-tdm", "Attention cost and response delay, parallel vs TDM (bench.csv)");
    bench_cmd->add_option("--frames", bt.frames, "Horizon in frames");
    bench_cmd->add_option("--chunk", bt.chunk, "TDM chunk in frames");
    bench_cmd->add_option("--channels", bt.channels, "Channels serialized by TDM");

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Run one scripted session (trace.jsonl, metrics.json, grid.txt)");
    sim_cmd->add_option("--checkpoint", sim.checkpoint, "Checkpoint directory; default is a fresh model");
    choice(sim_cmd, "--task", sim.task, "Task generating the user side",
           {"asr", "tts", "vqa", "multi_turn_qa", "barge_in", "noisy", "locomotion", "telepathy"});
    sim_cmd->add_option("--sample-seed", sim.sample_seed, "Seed of the scripted sample; -1 uses --seed");
    choice(sim_cmd, "--mode", sim.mode, "Clock mode", modes);
    sim_cmd->add_option("--temperature", sim.temperature, "Sampling temperature; 0 is greedy");
    sim_cmd->add_option("--tdm-chunk", sim.tdm_chunk, "Drive a TDM-trained checkpoint with this chunk; 0 is parallel");
    sim_cmd->add_option("--lang-seed", sim.lang_seed, "Seed of the toy language");
    sim_cmd->add_option("--spk-delay", sim.spk_delay, "Text lead over speech in frames");
    sim_cmd->add_option("--noise-prob", sim.noise_prob, "Listen-channel noise probability");

    ServeArgs sv;
    auto* serve_cmd = app.add_subcommand("serve", "Serve duplex sessions over websocket until SIGINT or SIGTERM");
    serve_cmd->add_option("--bind", sv.bind, "host:port; FDX_BIND overrides it");
    serve_cmd->add_option("--checkpoint", sv.checkpoint, "Checkpoint directory; default is a fresh model");
    serve_cmd->add_option("--max-sessions", sv.max_sessions, "Concurrent session limit");
    choice(serve_cmd, "--mode", sv.mode, "Default clock mode", modes);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }
    const CLI::App& sub = *app.get_subcommands().front();
    const auto name = sub.get_name();
    if (const auto* c = app.get_config_ptr(); c->count() > 0) g.config = c->results().front();

    try {
        FrameSpec{g.frame_ms}.validate();
        if (name == "gen-data") validate(gen);
        if (name == "train") validate(tr);
        if (name == "eval") validate(ev);
        if (name == "align") validate(al);
        if (name == "bench-tdm") validate(bt);
        if (name == "simulate") validate(sim);
        if (name == "serve") validate(sv, g);
    } catch (const Error& e) {
        err << "fdx " << name << ": " << e.detail() << "\nRun with --help for more information.\n";
        return kExitUsage;
    }

    RunContext ctx(g, out);
    try {
        if (!g.config.empty()) ctx.input(g.config);
        if (name == "gen-data") run_gen_data(gen, ctx);
        if (name == "train") run_train(tr, ctx);
        if (name == "eval") run_eval(ev, ctx);
        if (name == "align") run_align(al, ctx);
        if (name == "bench-tdm") run_bench_tdm(bt, ctx);
        if (name == "simulate") run_simulate(sim, ctx);
        if (name == "serve") {
            run_serve(sv, ctx, [&] { write_manifest(app, sub, args, ctx); });
            return kExitOk;
        }
        write_manifest(app, sub, args, ctx);
    } catch (const Error& e) {
        err << "fdx " << name << ": " << error_name(e.code()) << ": " << e.detail() << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "fdx " << name << ": " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

} // namespace fdx::cli
