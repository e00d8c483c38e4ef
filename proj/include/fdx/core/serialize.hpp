#pragma once

#include "fdx/core/dialogue.hpp"
#include "fdx/core/timeline.hpp"
#include "fdx/core/vocabulary.hpp"

#include "json.hpp"

#include <string>

namespace fdx {

using json = nlohmann::json;

inline constexpr const char* kFormatVersion = "v1";

// Field objects without the version tag; usable as nested values.
json vocabulary_fields(const Vocabulary& v);
json timeline_fields(const Timeline& t);
json script_fields(const DialogueScript& s);
json utterance_fields(const Utterance& u);

Vocabulary vocabulary_from_fields(const json& j);
Timeline timeline_from_fields(const json& j);
DialogueScript script_from_fields(const json& j);

// Top-level documents carry "version":"v1"; these reject anything else.
json to_document(const Vocabulary& v);
json to_document(const Timeline& t);
json to_document(const DialogueScript& s);

Vocabulary vocabulary_from_document(const json& j);
Timeline timeline_from_document(const json& j);
DialogueScript script_from_document(const json& j);

void require_version(const json& j);

// One compact JSON object per line (no trailing newline).
std::string to_line(const json& j);

} // namespace fdx
