#pragma once

#include <cstdint>
#include <numeric>

namespace fdx {

using FrameIndex = int;

struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Rational reduced(std::int64_t num, std::int64_t den) {
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const std::int64_t g = std::gcd(num, den);
        return g == 0 ? Rational{0, 1} : Rational{num / g, den / g};
    }

    friend Rational operator*(Rational a, Rational b) {
        return reduced(a.num * b.num, a.den * b.den);
    }
    friend Rational operator/(Rational a, Rational b) {
        return reduced(a.num * b.den, a.den * b.num);
    }
    friend bool operator==(const Rational&, const Rational&) = default;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// One frame is the duplex decision quantum: every channel carries exactly one
// token per frame.
struct FrameSpec {
    int frame_ms = 80;

    Rational frames_per_second() const { return Rational::reduced(1000, frame_ms); }
    void validate() const;

    friend bool operator==(const FrameSpec&, const FrameSpec&) = default;
};

// floor(ms / frame_ms); ms must be non-negative.
FrameIndex ms_to_frames(std::int64_t ms, const FrameSpec& spec);

std::int64_t frames_to_ms(FrameIndex frames, const FrameSpec& spec);

} // namespace fdx
