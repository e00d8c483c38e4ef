#include "fdx/train/trainer.hpp"

#include "fdx/core/error.hpp"
#include "fdx/core/random.hpp"
#include "fdx/model/checkpoint.hpp"
#include "fdx/model/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace fdx::train {

std::string stage_name(Stage s) { return s == Stage::PostTrain ? "post" : "sft"; }

Stage parse_stage(const std::string& s) {
    if (s == "post" || s == "posttrain") return Stage::PostTrain;
    if (s == "sft") return Stage::SFT;
    throw Error(ErrorCode::InvalidArgument, "unknown stage '" + s + "'");
}

void TrainConfig::validate() const {
    if (steps <= 0) throw Error(ErrorCode::InvalidArgument, "steps must be > 0");
    if (batch_size <= 0) throw Error(ErrorCode::InvalidArgument, "batch_size must be > 0");
    if (!(learning_rate >= 0)) throw Error(ErrorCode::InvalidArgument, "learning_rate must be >= 0");
    if (loss_weights.text < 0 || loss_weights.speak < 0 || loss_weights.action < 0)
        throw Error(ErrorCode::InvalidArgument, "loss weights must be >= 0");
    if (eval_every < 0 || warmup_steps < 0 || grad_clip < 0 || weight_decay < 0 || dropout < 0 || dropout >= 1)
        throw Error(ErrorCode::InvalidArgument, "eval_every, warmup_steps, grad_clip and weight_decay must be >= 0 and dropout in [0, 1)");
}

json train_config_fields(const TrainConfig& tc) {
    return json{{"stage", stage_name(tc.stage)},
                {"steps", tc.steps},
                {"batch_size", tc.batch_size},
                {"learning_rate", tc.learning_rate},
                {"beta1", tc.beta1},
                {"beta2", tc.beta2},
                {"eps", tc.eps},
                {"loss_weights", {{"text", tc.loss_weights.text},
                                  {"speak", tc.loss_weights.speak},
                                  {"action", tc.loss_weights.action}}},
                {"seed", tc.seed},
                {"eval_every", tc.eval_every},
                {"warmup_steps", tc.warmup_steps},
                {"min_lr_ratio", tc.min_lr_ratio},
                {"grad_clip", tc.grad_clip},
                {"weight_decay", tc.weight_decay},
                {"dropout", tc.dropout}};
}

LossWeights task_weights(const LossWeights& w, TaskKind task) {
    LossWeights out = w;
    if (task == TaskKind::Tts) out.text = 0;
    return out;
}

double learning_rate_at(const TrainConfig& tc, int step) {
    if (step < tc.warmup_steps) return tc.learning_rate * (step + 1) / tc.warmup_steps;
    const int decay = std::max(1, tc.steps - tc.warmup_steps);
    const double progress = std::min(1.0, static_cast<double>(step - tc.warmup_steps) / decay);
    const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    return tc.learning_rate * (tc.min_lr_ratio + (1.0 - tc.min_lr_ratio) * cosine);
}

std::vector<SceneVector> context_scenes(const Timeline& t, const model::Parameters<float>& p) {
    if (p.config.visual_mode != model::VisualMode::ContextPrefix || t.empty() || !t[0].visual) return {};
    return {p.scenes->at(*t[0].visual)};
}

namespace {

Timeline inputs_of(const Timeline& t) {
    Timeline in;
    in.frame_spec = t.frame_spec;
    in.vocab = t.vocab;
    in.frames.assign(t.frames.begin(), t.frames.end() - 1);
    return in;
}

std::filesystem::path step_dir(const std::filesystem::path& root, int step) {
    char name[32];
    std::snprintf(name, sizeof name, "step_%06d", step);
    return root / name;
}

} // namespace

TrainResult train_stage(const model::Parameters<float>& params, const std::vector<CorpusSample>& corpus,
                        const TrainConfig& tc, const std::function<void(int, double)>& progress) {
    tc.validate();
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (!corpus[i].held_out() && corpus[i].timeline.size() >= 2) pool.push_back(i);
    }
    if (pool.empty()) throw Error(ErrorCode::InvalidArgument, "corpus has no trainable samples");
    if (!(corpus.front().timeline.vocab == params.config.vocab))
        throw Error(ErrorCode::ConfigMismatch, "corpus vocabulary differs from the model vocabulary");

    TrainResult result{params, {}, {}};
    auto& p = result.params;
    const std::size_t n = p.values.size();
    std::vector<float> grad(n), m(n, 0.0f), v(n, 0.0f);
    model::Tape<float> tape;
    model::HeadGrads<float> dy;
    Rng rng(tc.seed);
    std::vector<std::size_t> order = pool;
    std::size_t cursor = order.size();
    model::Parameters<float> last_good = p;
    std::vector<char> decays(n, 0);
    for (const auto& ti : p.lay().tensors) {
        if (ti.shape.size() == 2) std::fill_n(decays.begin() + static_cast<std::ptrdiff_t>(ti.offset), ti.size, 1);
    }

    for (int step = 0; step < tc.steps; ++step) {
        std::vector<std::size_t> batch;
        for (int b = 0; b < tc.batch_size; ++b) {
            if (cursor == order.size()) {
                for (std::size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(static_cast<int>(i)))]);
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }
        int frames = 0;
        for (auto i : batch) frames += corpus[i].timeline.size() - 1;

        std::fill(grad.begin(), grad.end(), 0.0f);
        const auto bw = model::prepare_backward(p);
        double loss = 0;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const auto& t = corpus[batch[b]].timeline;
            tape.dropout = tc.dropout;
            tape.dropout_seed = derive_seed(tc.seed, static_cast<std::uint64_t>(step) * 1000003u + b);
            const auto out = model::forward_train(inputs_of(t), context_scenes(t, p), p, tape);
            loss += compute_loss(out, t, task_weights(tc.loss_weights, corpus[batch[b]].task), &dy, 1.0 / frames).total;
            model::backward(tape, p, bw, dy, grad);
        }
        loss /= frames;
        if (!std::isfinite(loss)) {
            if (tc.checkpoint_dir) model::save_checkpoint(last_good, *tc.checkpoint_dir / "last_good");
            throw Error(ErrorCode::DivergenceDetected, "non-finite loss at step " + std::to_string(step));
        }
        last_good = p;
        result.loss.push_back(loss);

        double norm2 = 0;
        for (float g : grad) norm2 += static_cast<double>(g) * g;
        const double norm = std::sqrt(norm2);
        const float clip = tc.grad_clip > 0 && norm > tc.grad_clip ? static_cast<float>(tc.grad_clip / norm) : 1.0f;

        const double lr = learning_rate_at(tc, step);
        const double bc1 = 1.0 - std::pow(tc.beta1, step + 1);
        const double bc2 = 1.0 - std::pow(tc.beta2, step + 1);
        const float b1 = static_cast<float>(tc.beta1), b2 = static_cast<float>(tc.beta2);
        const float step_size = static_cast<float>(lr / bc1);
        const float inv_bc2 = static_cast<float>(1.0 / bc2);
        const float eps = static_cast<float>(tc.eps);
        const float shrink = static_cast<float>(1.0 - lr * tc.weight_decay);
        for (std::size_t k = 0; k < n; ++k) {
            const float g = grad[k] * clip;
            m[k] = b1 * m[k] + (1.0f - b1) * g;
            v[k] = b2 * v[k] + (1.0f - b2) * g * g;
            if (decays[k]) p.values[k] *= shrink;
            p.values[k] -= step_size * m[k] / (std::sqrt(v[k] * inv_bc2) + eps);
        }

        if (progress) progress(step, loss);
        if (tc.checkpoint_dir && tc.eval_every > 0 && (step + 1) % tc.eval_every == 0) {
            const auto dir = step_dir(*tc.checkpoint_dir, step + 1);
            model::save_checkpoint(p, dir);
            result.checkpoints.push_back(dir);
        }
    }
    if (!model::all_finite(p.values)) throw Error(ErrorCode::DivergenceDetected, "parameters became non-finite");
    return result;
}

} // namespace fdx::train
