#pragma once

#include "fdx/core/timeline.hpp"
#include "fdx/model/transformer.hpp"

namespace fdx::train {

struct LossWeights {
    double text = 1.0;
    double speak = 1.0;
    double action = 1.0;
};

struct LossBreakdown {
    double total = 0;   // weighted sum
    double text = 0;    // unweighted cross-entropy sums per channel
    double speak = 0;
    double action = 0;
};

// Logits at frame t predict the frame t+1 tokens of the text, speak and action
// channels; the listen channel is never a target. The logits must cover
// exactly |target| - 1 frames, otherwise LengthMismatch. When grads is given
// it receives dLoss/dlogits scaled by grad_scale.
template <typename T>
LossBreakdown compute_loss(const model::ForwardOutput<T>& logits, const Timeline& target, const LossWeights& w,
                           model::HeadGrads<T>* grads = nullptr, double grad_scale = 1.0);

} // namespace fdx::train
