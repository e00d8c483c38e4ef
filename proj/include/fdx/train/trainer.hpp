#pragma once

#include "fdx/model/parameters.hpp"
#include "fdx/train/corpus.hpp"
#include "fdx/train/loss.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace fdx::train {

enum class Stage { PostTrain, SFT };

std::string stage_name(Stage s);
Stage parse_stage(const std::string& s);

struct TrainConfig {
    Stage stage = Stage::PostTrain;
    int steps = 1000;
    int batch_size = 16;
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-8;
    LossWeights loss_weights;
    std::uint64_t seed = 0;
    int eval_every = 0;  // checkpoint period in steps; 0 disables
    int warmup_steps = 100;
    double min_lr_ratio = 0.1;  // cosine floor as a fraction of learning_rate
    double grad_clip = 1.0;     // global norm; 0 disables
    double weight_decay = 0.0;  // decoupled, on weight matrices only
    double dropout = 0.0;       // on attention and feed-forward block outputs
    std::optional<std::filesystem::path> checkpoint_dir;

    void validate() const;
};

json train_config_fields(const TrainConfig& tc);

struct TrainResult {
    model::Parameters<float> params;
    std::vector<double> loss;  // per step, mean cross-entropy per supervised frame
    std::vector<std::filesystem::path> checkpoints;
};

// Channel weights for one sample. A TTS-like transcript is the conditioning
// input of the task, so its text channel is not a target.
LossWeights task_weights(const LossWeights& w, TaskKind task);

// Learning rate at a 0-based step: linear warmup, then cosine decay.
double learning_rate_at(const TrainConfig& tc, int step);

// Context scenes fed as prefix positions in ContextPrefix mode: the scene of
// frame 0, when the timeline has one.
std::vector<SceneVector> context_scenes(const Timeline& t, const model::Parameters<float>& p);

// Teacher-forced next-frame training over the non-held-out samples. Throws
// DivergenceDetected on a non-finite loss after saving the last good
// parameters under checkpoint_dir/last_good when a directory is set.
TrainResult train_stage(const model::Parameters<float>& params, const std::vector<CorpusSample>& corpus,
                        const TrainConfig& tc,
                        const std::function<void(int step, double loss)>& progress = {});

} // namespace fdx::train
