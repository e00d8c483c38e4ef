#pragma once

#include "fdx/core/vocabulary.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace fdx::train {

struct SceneEntry {
    int name_word = 0;
    std::vector<int> description;  // three words, never the name
};

// Synthetic language: every word is spoken as three audio frames.
//
// Text ids are partitioned as
//   5 "what"  6 "say"  7 "describe"   cue words
//   8..11                             locomotion commands
//   12..12+scenes-1                   scene names
//   the rest up to the last word id   description pool
// ASR and TTS content is drawn from names and the description pool.
struct ToyLanguage {
    Vocabulary vocab;
    std::vector<int> word_ids;
    int what = 5;
    int say = 6;
    int describe = 7;
    std::vector<int> commands;
    std::map<int, int> instruction_to_action;
    std::vector<SceneEntry> scenes;
    std::vector<int> content_words;
    std::vector<int> description_pool;

    std::vector<int> word_to_audio(int word) const;
    std::vector<int> words_to_audio(const std::vector<int>& words) const;
    // Inverse on the first audio frame of a word.
    std::optional<int> audio_to_word(int first_audio) const;
};

// Throws SizeTooSmall when the vocabulary cannot host the partition above
// or the word-to-audio map would not be injective.
ToyLanguage make_toy_language(const Vocabulary& vocab, std::uint64_t seed);

} // namespace fdx::train
