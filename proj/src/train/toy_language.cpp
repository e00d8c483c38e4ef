#include "fdx/train/toy_language.hpp"

#include "fdx/core/error.hpp"
#include "fdx/core/random.hpp"

#include <numeric>

namespace fdx::train {

namespace {
constexpr int kFramesPerWord = 3;
constexpr int kCommands = 4;
} // namespace

std::vector<int> ToyLanguage::word_to_audio(int word) const {
    const int base = vocab.first_free_audio();
    const int span = vocab.audio_size - base;
    std::vector<int> out;
    for (int j = 0; j < kFramesPerWord; ++j) out.push_back(base + (kFramesPerWord * word + j) % span);
    return out;
}

std::vector<int> ToyLanguage::words_to_audio(const std::vector<int>& words) const {
    std::vector<int> out;
    for (int w : words) {
        const auto a = word_to_audio(w);
        out.insert(out.end(), a.begin(), a.end());
    }
    return out;
}

std::optional<int> ToyLanguage::audio_to_word(int first_audio) const {
    for (int w : word_ids) {
        if (word_to_audio(w).front() == first_audio) return w;
    }
    return std::nullopt;
}

ToyLanguage make_toy_language(const Vocabulary& vocab, std::uint64_t seed) {
    ToyLanguage L;
    L.vocab = vocab;
    const int first_word = vocab.first_free_text();
    const int span = vocab.audio_size - vocab.first_free_audio();
    // The first audio frame 3w mod span identifies w as long as 3 is
    // invertible mod span and no more than span words exist.
    if (std::gcd(kFramesPerWord, span) != 1)
        throw Error(ErrorCode::SizeTooSmall, "free audio span must be coprime with 3");
    const int last_word = std::min(vocab.text_size, first_word + span) - 1;
    for (int w = first_word; w <= last_word; ++w) L.word_ids.push_back(w);

    L.what = first_word;
    L.say = first_word + 1;
    L.describe = first_word + 2;
    const int first_command = first_word + 3;
    const int first_name = first_command + kCommands;
    const int first_pool = first_name + vocab.num_scenes;
    if (vocab.action_size < kCommands + 1)
        throw Error(ErrorCode::SizeTooSmall, "action vocabulary needs NOOP plus 4 commands");
    if (last_word - first_pool + 1 < 6)
        throw Error(ErrorCode::SizeTooSmall, "text vocabulary too small for scene descriptions");

    for (int i = 0; i < kCommands; ++i) {
        L.commands.push_back(first_command + i);
        L.instruction_to_action[first_command + i] = vocab.noop + 1 + i;
    }
    for (int w = first_pool; w <= last_word; ++w) L.description_pool.push_back(w);

    Rng rng(seed);
    for (int s = 0; s < vocab.num_scenes; ++s) {
        SceneEntry e;
        e.name_word = first_name + s;
        std::vector<int> pool = L.description_pool;
        for (int k = 0; k < 3; ++k) {
            const int j = rng.below(static_cast<int>(pool.size()));
            e.description.push_back(pool[static_cast<std::size_t>(j)]);
            pool.erase(pool.begin() + j);
        }
        L.scenes.push_back(std::move(e));
    }
    for (int w = first_name; w <= last_word; ++w) L.content_words.push_back(w);
    return L;
}

} // namespace fdx::train
