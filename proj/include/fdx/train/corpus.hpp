#pragma once

#include "fdx/align/align.hpp"
#include "fdx/core/serialize.hpp"
#include "fdx/train/toy_language.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fdx::train {

enum class TaskKind {
    Asr,          // user speaks words, assistant transcribes and repeats them
    Tts,          // user says "say", assistant speaks words of its own choosing
    Vqa,          // user says "what", assistant names the scene
    MultiTurnQa,  // two or three of the above in sequence
    BargeIn,      // user interrupts a long answer, then gets an answer
    Noisy,        // multi-turn QA with listen-channel noise
    Locomotion,   // user says a command, assistant repeats it and acts
    Telepathy,    // user says "describe", assistant describes the scene without naming it
};

std::string task_name(TaskKind k);
TaskKind parse_task(const std::string& s);

struct CorpusSample {
    std::uint64_t seed = 0;
    TaskKind task = TaskKind::Asr;
    DialogueScript script;
    Timeline timeline;

    // One tenth of all sample seeds are reserved for evaluation.
    bool held_out() const { return seed % 10 == 0; }
};

struct CorpusOptions {
    int min_words = 2;
    int max_words = 5;
    int min_lead = 2;   // frames of silence before the first user utterance
    int max_lead = 6;
    int min_tail = 2;   // frames after the last utterance
    int max_tail = 4;
    int min_pause = 2;  // frames between an answer and the next user turn
    int max_pause = 5;
};

CorpusSample gen_sample(TaskKind task, const ToyLanguage& lang, const align::AlignConfig& cfg,
                        std::uint64_t sample_seed, const CorpusOptions& opt = {});

// Sample i uses seed derive_seed(seed, i); the task is drawn from that seed.
std::vector<CorpusSample> gen_posttrain_corpus(int n, const ToyLanguage& lang, const align::AlignConfig& cfg,
                                               std::uint64_t seed, const CorpusOptions& opt = {});
std::vector<CorpusSample> gen_sft_corpus(int n, const ToyLanguage& lang, const align::AlignConfig& cfg,
                                         std::uint64_t seed, const CorpusOptions& opt = {});

// The first n held-out samples of one task under a master seed.
std::vector<CorpusSample> held_out_samples(TaskKind task, int n, const ToyLanguage& lang,
                                           const align::AlignConfig& cfg, std::uint64_t seed,
                                           const CorpusOptions& opt = {});

json sample_document(const CorpusSample& s);
CorpusSample sample_from_document(const json& j);

void write_corpus(const std::vector<CorpusSample>& corpus, const std::filesystem::path& path);
std::vector<CorpusSample> read_corpus(const std::filesystem::path& path);

} // namespace fdx::train
