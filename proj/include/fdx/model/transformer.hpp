#pragma once

#include "fdx/core/scene.hpp"
#include "fdx/core/timeline.hpp"
#include "fdx/model/parameters.hpp"

#include <type_traits>
#include <vector>

namespace fdx::model {

// Encoded context scenes; each occupies one prefix position ahead of frame 0.
template <typename T>
struct VisualContext {
    std::vector<std::vector<T>> embeddings;

    int size() const { return static_cast<int>(embeddings.size()); }
};

template <typename T>
struct LogitsView {
    const T* text = nullptr;
    const T* speak = nullptr;
    const T* action = nullptr;
    int text_size = 0;
    int audio_size = 0;
    int action_size = 0;
};

template <typename T>
struct ForwardOutput {
    int frames = 0;
    int d_model = 0;
    int text_size = 0;
    int audio_size = 0;
    int action_size = 0;
    std::vector<T> hidden;  // frames x d_model
    std::vector<T> text;    // frames x text_size
    std::vector<T> speak;   // frames x audio_size
    std::vector<T> action;  // frames x action_size

    const T* hidden_at(int t) const { return hidden.data() + static_cast<std::size_t>(t) * d_model; }
    LogitsView<T> logits_at(int t) const {
        const auto i = static_cast<std::size_t>(t);
        return {text.data() + i * text_size, speak.data() + i * audio_size, action.data() + i * action_size,
                text_size, audio_size, action_size};
    }
};

template <typename T>
struct StepOutput {
    std::vector<T> hidden;
    std::vector<T> text;
    std::vector<T> speak;
    std::vector<T> action;

    LogitsView<T> logits() const {
        return {text.data(), speak.data(), action.data(), static_cast<int>(text.size()),
                static_cast<int>(speak.size()), static_cast<int>(action.size())};
    }
};

// Affine map from scene features to d_model. Throws DimMismatch.
template <typename T>
VisualContext<T> encode_visual_context(const std::vector<SceneVector>& scenes, const Parameters<T>& p);
template <typename T>
std::vector<T> encode_visual_stream(const SceneVector& scene, const Parameters<T>& p);

// Sum of the four channel embeddings, the positional row at `position`, and
// the stream visual embedding when mode is Stream and the frame has a scene.
// Throws FrameOutOfRange when position >= max_frames.
template <typename T>
std::vector<T> merge_inputs(const TimelineFrame& frame, int position, const Parameters<T>& p, VisualMode mode);

// Causal pass over [context prefix; frames]. Frame t sits at position m + t.
// Throws TooLong when m + |timeline| > max_frames.
template <typename T>
ForwardOutput<T> forward_full(const Timeline& t, const VisualContext<std::type_identity_t<T>>* context,
                              const Parameters<T>& p);

// Heads only: logits from one final hidden state.
template <typename T>
void apply_heads(const T* hidden, const Parameters<T>& p, T* text, T* speak, T* action);

// Per-layer keys and values of every processed position.
template <typename T>
struct DecodeCache {
    int prefix = 0;
    int frames = 0;
    int capacity = 0;
    std::vector<std::vector<T>> keys;    // per layer: capacity x d_model
    std::vector<std::vector<T>> values;  // per layer: capacity x d_model
    std::vector<T> scratch;

    int positions() const { return prefix + frames; }
};

template <typename T>
DecodeCache<T> new_cache(const Parameters<T>& p, const VisualContext<std::type_identity_t<T>>* context = nullptr);

// One frame through the backbone using the cache. Produces the same values as
// forward_full on the same prefix. Throws TooLong when the cache is full.
template <typename T>
StepOutput<T> decode_step(DecodeCache<T>& cache, const TimelineFrame& frame, const Parameters<T>& p);

// Activations kept for the backward pass. Buffers are reused across calls.
// Setting dropout > 0 before forward_train drops attention and feed-forward
// block outputs with masks drawn from dropout_seed.
template <typename T>
struct Tape {
    struct Layer {
        std::vector<T> x_in, ln1, ln1_hat, ln1_rstd, q, k, v, probs, att, x_mid, ln2, ln2_hat, ln2_rstd, ff_pre,
            ff_act, keep_att, keep_ff;
    };
    double dropout = 0;
    std::uint64_t dropout_seed = 0;
    int n = 0;  // positions
    int m = 0;  // prefix positions
    std::vector<TimelineFrame> frames;
    std::vector<SceneVector> context;
    std::vector<T> x0;
    std::vector<Layer> layers;
    std::vector<T> x_out, hidden, lnf_hat, lnf_rstd;
};

template <typename T>
ForwardOutput<T> forward_train(const Timeline& t, const std::vector<SceneVector>& context, const Parameters<T>& p,
                               Tape<T>& tape);

// Gradients of the loss with respect to the head outputs, laid out like
// ForwardOutput's logits.
template <typename T>
struct HeadGrads {
    std::vector<T> text;
    std::vector<T> speak;
    std::vector<T> action;
};

// Transposed weight copies so the backward kernels stay row-axpy shaped.
// Valid while the parameters are unchanged.
template <typename T>
struct BackwardWeights {
    struct Layer {
        std::vector<T> wq, wk, wv, wo, w1, w2;
    };
    std::vector<Layer> layers;
    std::vector<T> text, speak, action;
};

template <typename T>
BackwardWeights<T> prepare_backward(const Parameters<T>& p);

// Accumulates dLoss/dParams into grad (same layout as p.values).
template <typename T>
void backward(const Tape<T>& tape, const Parameters<T>& p, const BackwardWeights<T>& bw, const HeadGrads<T>& dy,
              std::vector<T>& grad);

} // namespace fdx::model
