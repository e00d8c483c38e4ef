#pragma once

#include "fdx/core/serialize.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace fdx::cli {

struct Globals {
    std::string config;
    std::uint64_t seed = 0;
    std::string out = "out";
    int frame_ms = 80;
};

struct GenDataArgs {
    std::string stage = "post";
    int samples = 1000;
    std::uint64_t lang_seed = 7;
    int spk_delay = 2;
    double noise_prob = 0.1;
    int chunk = 0;  // > 0 writes the TDM-serialized corpus
};

struct TrainArgs {
    std::string stage = "post";
    int steps = 1000;
    int batch = 32;
    double lr = 3e-3;
    int warmup = 150;
    double weight_decay = 1.0;
    double dropout = 0.1;
    double grad_clip = 1.0;
    int samples = 2000;
    std::string corpus;
    std::string init;
    std::uint64_t lang_seed = 7;
    int spk_delay = 2;
    int chunk = 0;
    int checkpoint_every = 0;
    int log_every = 100;
};

struct EvalArgs {
    std::string checkpoint;
    std::string suite = "posttrain";
    int samples = 100;
    std::uint64_t lang_seed = 7;
    int spk_delay = 2;
    double temperature = 0;
};

struct AlignArgs {
    std::string demo;
    std::string script;
    std::string stream = "text-first";
    int spk_delay = 2;
};

struct BenchTdmArgs {
    long long frames = 100;
    int chunk = 25;
    int channels = 2;
};

struct SimulateArgs {
    std::string checkpoint;
    std::string task = "barge_in";
    std::int64_t sample_seed = -1;  // -1 uses --seed
    std::string mode = "lockstep";
    double temperature = 0;
    int tdm_chunk = 0;
    std::uint64_t lang_seed = 7;
    int spk_delay = 2;
    double noise_prob = 0.1;
};

struct ServeArgs {
    std::string bind = "127.0.0.1:8765";
    std::string checkpoint;
    int max_sessions = 8;
    std::string mode = "lockstep";
};

// Output directory, console stream and the inputs and outputs the run
// manifest lists.
class RunContext {
public:
    RunContext(Globals g, std::ostream& out);

    const Globals& globals() const { return g_; }
    std::ostream& out() { return out_; }
    // dir/name, recorded as an output; creates the output directory.
    std::filesystem::path output(const std::string& name);
    // Records the FNV-1a hash of a file, or of every file under a directory.
    void input(const std::filesystem::path& p);

    json inputs = json::object();
    std::vector<std::string> outputs;

private:
    Globals g_;
    std::ostream& out_;
};

// Each validate throws InvalidArgument before any work starts.
void validate(const GenDataArgs& a);
void validate(const TrainArgs& a);
void validate(const EvalArgs& a);
void validate(const AlignArgs& a);
void validate(const BenchTdmArgs& a);
void validate(const SimulateArgs& a);
void validate(const ServeArgs& a, const Globals& g);

void run_gen_data(const GenDataArgs& a, RunContext& ctx);
void run_train(const TrainArgs& a, RunContext& ctx);
void run_eval(const EvalArgs& a, RunContext& ctx);
void run_align(const AlignArgs& a, RunContext& ctx);
void run_bench_tdm(const BenchTdmArgs& a, RunContext& ctx);
void run_simulate(const SimulateArgs& a, RunContext& ctx);
// Blocks until SIGINT or SIGTERM. write_manifest runs once the server is up.
void run_serve(const ServeArgs& a, RunContext& ctx, const std::function<void()>& write_manifest);

} // namespace fdx::cli
