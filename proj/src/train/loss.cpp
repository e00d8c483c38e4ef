#include "fdx/train/loss.hpp"

#include "fdx/core/error.hpp"

#include <cmath>

namespace fdx::train {

namespace {

// Cross-entropy of one row; writes scale * (softmax - onehot) into g when set.
template <typename T>
double row_ce(const T* z, int n, int target, double scale, T* g) {
    double mx = static_cast<double>(z[0]);
    for (int i = 1; i < n; ++i) mx = std::max(mx, static_cast<double>(z[i]));
    double sum = 0;
    for (int i = 0; i < n; ++i) sum += std::exp(static_cast<double>(z[i]) - mx);
    const double lse = mx + std::log(sum);
    if (g) {
        for (int i = 0; i < n; ++i) {
            const double p = std::exp(static_cast<double>(z[i]) - lse);
            g[i] = static_cast<T>(scale * (p - (i == target ? 1.0 : 0.0)));
        }
    }
    return lse - static_cast<double>(z[target]);
}

} // namespace

template <typename T>
LossBreakdown compute_loss(const model::ForwardOutput<T>& out, const Timeline& target, const LossWeights& w,
                           model::HeadGrads<T>* grads, double grad_scale) {
    if (out.frames != target.size() - 1)
        throw Error(ErrorCode::LengthMismatch, std::to_string(out.frames) + " logit frames for a " +
                                                   std::to_string(target.size()) + "-frame target");
    if (grads) {
        grads->text.assign(out.text.size(), T(0));
        grads->speak.assign(out.speak.size(), T(0));
        grads->action.assign(out.action.size(), T(0));
    }
    LossBreakdown b;
    for (int t = 0; t < out.frames; ++t) {
        const auto& next = target[t + 1];
        const auto l = out.logits_at(t);
        const auto i = static_cast<std::size_t>(t);
        b.text += row_ce(l.text, l.text_size, next.text, grad_scale * w.text,
                         grads ? grads->text.data() + i * static_cast<std::size_t>(l.text_size) : nullptr);
        b.speak += row_ce(l.speak, l.audio_size, next.speak, grad_scale * w.speak,
                          grads ? grads->speak.data() + i * static_cast<std::size_t>(l.audio_size) : nullptr);
        b.action += row_ce(l.action, l.action_size, next.action, grad_scale * w.action,
                           grads ? grads->action.data() + i * static_cast<std::size_t>(l.action_size) : nullptr);
    }
    b.total = w.text * b.text + w.speak * b.speak + w.action * b.action;
    return b;
}

template LossBreakdown compute_loss(const model::ForwardOutput<float>&, const Timeline&, const LossWeights&,
                                    model::HeadGrads<float>*, double);
template LossBreakdown compute_loss(const model::ForwardOutput<double>&, const Timeline&, const LossWeights&,
                                    model::HeadGrads<double>*, double);

} // namespace fdx::train
