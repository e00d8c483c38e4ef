#pragma once

#include "fdx/core/serialize.hpp"
#include "fdx/core/vocabulary.hpp"

#include <cstdint>
#include <string>

namespace fdx::model {

// How scene features reach the backbone: as prefix positions ahead of the
// frames, added to every frame, or not at all.
enum class VisualMode { None, ContextPrefix, Stream };

std::string visual_mode_name(VisualMode m);
VisualMode parse_visual_mode(const std::string& s);

struct ModelConfig {
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 4;
    int d_ff = 256;
    int max_frames = 512;
    Vocabulary vocab = build_vocabulary(VocabSizes{});
    VisualMode visual_mode = VisualMode::Stream;
    int d_v = 8;
    std::uint64_t seed = 0;
    // Seed of the scene feature bank the model observes.
    std::uint64_t scene_seed = 1;

    int head_dim() const { return d_model / n_heads; }
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

json config_fields(const ModelConfig& c);
ModelConfig config_from_fields(const json& j);

// FNV-1a over the canonical (sorted-key) serialization.
std::uint64_t config_hash(const ModelConfig& c);
std::string hex64(std::uint64_t v);

} // namespace fdx::model
