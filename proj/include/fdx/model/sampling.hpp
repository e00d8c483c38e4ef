#pragma once

#include "fdx/core/random.hpp"
#include "fdx/model/transformer.hpp"

#include <cstdint>

namespace fdx::model {

struct SamplingPolicy {
    enum class Kind { Greedy, Temperature };
    Kind kind = Kind::Greedy;
    double tau = 1.0;
    std::uint64_t seed = 0;

    static SamplingPolicy greedy() { return {}; }
    static SamplingPolicy temperature(double tau, std::uint64_t seed) { return {Kind::Temperature, tau, seed}; }
    // Throws InvalidTemperature for tau <= 0 on a Temperature policy.
    void validate() const;
};

struct SampledTokens {
    int text = 0;
    int speak = 0;
    int action = 0;

    friend bool operator==(const SampledTokens&, const SampledTokens&) = default;
};

// Lowest index among the maxima.
template <typename T>
int argmax(const T* v, int n);

// Greedy ignores rng; Temperature draws text, speak, action in that order.
template <typename T>
SampledTokens sample_heads(const LogitsView<T>& logits, const SamplingPolicy& policy, Rng& rng);

// One-shot form seeding its own generator from policy.seed.
template <typename T>
SampledTokens sample_heads(const LogitsView<T>& logits, const SamplingPolicy& policy);

} // namespace fdx::model
