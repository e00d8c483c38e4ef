#include "fdx/core/vocabulary.hpp"

#include "fdx/core/error.hpp"

#include <algorithm>

namespace fdx {

namespace {
constexpr int kTextSpecials = 5;
constexpr int kMinTextSize = 8;
constexpr int kMinAudioSize = 8;
} // namespace

int Vocabulary::size_of(Modality m) const {
    switch (m) {
    case Modality::ListenAudio:
    case Modality::SpeakAudio: return audio_size;
    case Modality::Text: return text_size;
    case Modality::Action: return action_size;
    }
    return 0;
}

bool Vocabulary::is_noise(int audio_id) const {
    return std::find(noise.begin(), noise.end(), audio_id) != noise.end();
}

Vocabulary build_vocabulary(const VocabSizes& sizes, const SpecialAssignment& specials) {
    if (sizes.text < kTextSpecials)
        throw Error(ErrorCode::SizeTooSmall, "text vocabulary cannot hold the 5 text specials");
    if (sizes.text < kMinTextSize)
        throw Error(ErrorCode::SizeTooSmall, "text vocabulary must have at least 8 ids");
    if (sizes.audio < kMinAudioSize)
        throw Error(ErrorCode::SizeTooSmall, "audio vocabulary must have at least 8 ids");
    if (sizes.action < 1) throw Error(ErrorCode::SizeTooSmall, "action vocabulary must have an id for NOOP");
    if (sizes.scenes < 0) throw Error(ErrorCode::SizeTooSmall, "scene count must be non-negative");
    if (specials.noise_count < 0 || 1 + specials.noise_count > sizes.audio)
        throw Error(ErrorCode::SizeTooSmall, "audio vocabulary cannot hold SIL and the noise ids");

    Vocabulary v;
    v.text_size = sizes.text;
    v.audio_size = sizes.audio;
    v.action_size = sizes.action;
    v.num_scenes = sizes.scenes;
    v.text = TextSpecials{0, 1, 2, 3, 4};
    v.sil = 0;
    v.noise.resize(static_cast<std::size_t>(specials.noise_count));
    for (int i = 0; i < specials.noise_count; ++i) v.noise[static_cast<std::size_t>(i)] = 1 + i;
    v.noop = 0;
    return v;
}

std::string modality_name(Modality m) {
    switch (m) {
    case Modality::ListenAudio: return "ListenAudio";
    case Modality::SpeakAudio: return "SpeakAudio";
    case Modality::Text: return "Text";
    case Modality::Action: return "Action";
    }
    return "?";
}

} // namespace fdx
