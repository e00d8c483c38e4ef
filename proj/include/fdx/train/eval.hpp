#pragma once

#include "fdx/runtime/scripted.hpp"
#include "fdx/train/corpus.hpp"

#include <map>
#include <memory>
#include <string>

namespace fdx::train {

enum class Suite { PostTrain, Duplex, Embodied };

std::string suite_name(Suite s);
Suite parse_suite(const std::string& s);

// Produces model-side behavior for held-out samples.
class Responder {
public:
    virtual ~Responder() = default;
    // Closed-loop lockstep trace over the feed.
    virtual std::vector<runtime::TickOutput> trace(const CorpusSample& s, const runtime::ScriptedFeed& feed) = 0;
    // Speak channel produced while the text channel is forced to the
    // sample's transcript; one entry per frame.
    virtual std::vector<int> speak_given_text(const CorpusSample& s) = 0;
};

class ModelResponder : public Responder {
public:
    explicit ModelResponder(std::shared_ptr<const runtime::Params> params, runtime::RunOptions opt = {});
    std::vector<runtime::TickOutput> trace(const CorpusSample& s, const runtime::ScriptedFeed& feed) override;
    std::vector<int> speak_given_text(const CorpusSample& s) override;

private:
    std::shared_ptr<const runtime::Params> params_;
    runtime::RunOptions opt_;
};

// Replays the ground-truth timeline.
class OracleResponder : public Responder {
public:
    std::vector<runtime::TickOutput> trace(const CorpusSample& s, const runtime::ScriptedFeed& feed) override;
    std::vector<int> speak_given_text(const CorpusSample& s) override;
};

struct Tally {
    long correct = 0;
    long total = 0;
    double rate() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }

    friend bool operator==(const Tally&, const Tally&) = default;
};

struct EvalReport {
    std::string suite;
    std::uint64_t seed = 0;
    int samples_per_task = 0;
    std::map<std::string, Tally> accuracy;  // asr_text, tts_speak, vqa_text
    std::map<std::string, Tally> success;   // locomotion, telepathy
    Tally telepathy_name_emission;          // trials whose transcript contains the name word
    // Per barge-in trial, see runtime::barge_in_response; -1 when the
    // assistant never yields.
    std::vector<int> barge_in_response_frames;
    // Per user utterance end; -1 when the assistant was speaking at the end
    // or never spoke afterwards.
    std::vector<int> turn_take_latency_frames;
    std::vector<double> loss_curve;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

json report_document(const EvalReport& r);
// Flat metric,value lines.
std::string report_csv(const EvalReport& r);

struct EvalOptions {
    int samples_per_task = 100;
    CorpusOptions corpus;
};

EvalReport evaluate_suite(Responder& responder, Suite suite, const ToyLanguage& lang, const align::AlignConfig& cfg,
                          std::uint64_t seed, const EvalOptions& opt = {});

// Fraction of entries in [lo, hi]; -1 entries count as misses.
double fraction_within(const std::vector<int>& v, int lo, int hi);
// Median of the entries, -1 counting as larger than any frame count.
double median_frames(const std::vector<int>& v);

} // namespace fdx::train
