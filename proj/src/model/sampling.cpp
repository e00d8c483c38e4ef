#include "fdx/model/sampling.hpp"

#include "fdx/core/error.hpp"

#include <cmath>
#include <vector>

namespace fdx::model {

void SamplingPolicy::validate() const {
    if (kind == Kind::Temperature && !(tau > 0.0))
        throw Error(ErrorCode::InvalidTemperature, "temperature must be > 0, got " + std::to_string(tau));
}

template <typename T>
int argmax(const T* v, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

namespace {

template <typename T>
int draw(const T* logits, int n, double tau, Rng& rng) {
    double mx = static_cast<double>(logits[argmax(logits, n)]);
    std::vector<double> w(static_cast<std::size_t>(n));
    double sum = 0;
    for (int i = 0; i < n; ++i) {
        w[static_cast<std::size_t>(i)] = std::exp((static_cast<double>(logits[i]) - mx) / tau);
        sum += w[static_cast<std::size_t>(i)];
    }
    const double u = rng.uniform() * sum;
    double acc = 0;
    for (int i = 0; i < n; ++i) {
        acc += w[static_cast<std::size_t>(i)];
        if (u < acc) return i;
    }
    return n - 1;
}

} // namespace

template <typename T>
SampledTokens sample_heads(const LogitsView<T>& l, const SamplingPolicy& policy, Rng& rng) {
    policy.validate();
    if (policy.kind == SamplingPolicy::Kind::Greedy)
        return {argmax(l.text, l.text_size), argmax(l.speak, l.audio_size), argmax(l.action, l.action_size)};
    SampledTokens s;
    s.text = draw(l.text, l.text_size, policy.tau, rng);
    s.speak = draw(l.speak, l.audio_size, policy.tau, rng);
    s.action = draw(l.action, l.action_size, policy.tau, rng);
    return s;
}

template <typename T>
SampledTokens sample_heads(const LogitsView<T>& l, const SamplingPolicy& policy) {
    Rng rng(policy.seed);
    return sample_heads(l, policy, rng);
}

template int argmax(const float*, int);
template int argmax(const double*, int);
template SampledTokens sample_heads(const LogitsView<float>&, const SamplingPolicy&, Rng&);
template SampledTokens sample_heads(const LogitsView<double>&, const SamplingPolicy&, Rng&);
template SampledTokens sample_heads(const LogitsView<float>&, const SamplingPolicy&);
template SampledTokens sample_heads(const LogitsView<double>&, const SamplingPolicy&);

} // namespace fdx::model
