#pragma once

#include <string>
#include <vector>

namespace fdx {

enum class Modality { ListenAudio, SpeakAudio, Text, Action };

struct VocabSizes {
    int text = 64;
    int audio = 64;
    int action = 8;
    int scenes = 16;
};

struct SpecialAssignment {
    int noise_count = 7;
};

struct TextSpecials {
    int wait = 0;
    int bos = 1;
    int eos = 2;
    int pad = 3;
    int epad = 4;

    friend bool operator==(const TextSpecials&, const TextSpecials&) = default;
};

// Per-modality id spaces. Specials occupy the lowest ids of their modality in
// declaration order; everything above them is free for the toy language.
struct Vocabulary {
    int text_size = 0;
    int audio_size = 0;
    int action_size = 0;
    int num_scenes = 0;
    TextSpecials text;
    int sil = 0;
    std::vector<int> noise;
    int noop = 0;

    int size_of(Modality m) const;
    bool is_noise(int audio_id) const;
    // Audio that is neither silence nor noise.
    bool is_voiced(int audio_id) const { return audio_id != sil && !is_noise(audio_id); }
    // First audio id not reserved for a special.
    int first_free_audio() const { return 1 + static_cast<int>(noise.size()); }
    int first_free_text() const { return 5; }

    friend bool operator==(const Vocabulary&, const Vocabulary&) = default;
};

// Throws SizeTooSmall when the sizes are below the minimums or the specials
// do not fit.
Vocabulary build_vocabulary(const VocabSizes& sizes, const SpecialAssignment& specials = {});

struct ModalityToken {
    Modality modality = Modality::Text;
    int id = 0;

    bool valid_for(const Vocabulary& vocab) const { return id >= 0 && id < vocab.size_of(modality); }
};

std::string modality_name(Modality m);

} // namespace fdx
