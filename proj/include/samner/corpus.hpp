#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "samner/log.hpp"

namespace samner::corpus {

// Half-open [start, end) character offsets into the owning sentence.
using CharSpan = std::pair<std::size_t, std::size_t>;

struct EntityMention {
  std::string surface;
  std::optional<CharSpan> span;
  std::optional<std::string> label;

  bool operator==(const EntityMention&) const = default;
};

struct Sentence {
  std::string id;
  std::string text;
  std::vector<EntityMention> gold;
  std::set<std::string> schema_types;
};

inline constexpr const char* kEntOpen = "<ENT>";
inline constexpr const char* kEntClose = "</ENT>";

struct TaggedSentence {
  std::string text_with_tags;
  std::vector<EntityMention> tagged;  // spans reference the original text
};

// BIO reader: token + tag per line, blank-line separated sentences. Optional
// leading "# types: a, b" manifest; without one, schema_types falls back to
// the labels observed in the file. Orphan I- tags are repaired to B- with a
// warning; malformed lines raise an error naming the line number.
std::vector<Sentence> load_conll(const std::string& path, Log& log = default_log());

// Inverse of load_conll for sentences whose mention spans align with token
// boundaries. Unspanned mentions are skipped with a warning.
void write_conll(const std::vector<Sentence>& sentences, const std::string& path,
                 Log& log = default_log());

// One record per line: {id, text, entities:[{surface, start?, end?, label?}], types:[...]}.
std::vector<Sentence> load_jsonl(const std::string& path, Log& log = default_log());

// Wraps the first free occurrence of each distinct surface in <ENT></ENT>,
// leftmost occurrence first, longest surface first on position ties. Surfaces
// whose every occurrence overlaps an already claimed span are suppressed and
// reported. Stripping the emitted tags reproduces the input byte-for-byte.
TaggedSentence tag_entities(const std::string& sentence_text,
                            const std::vector<std::string>& entities, Log& log = default_log());

std::string strip_tags(const std::string& tagged_text);

struct InstructionRecord {
  std::string instruction;
  std::string input;
  std::vector<std::string> schema;
  std::string output;  // serialized map type -> list of surfaces
};

void write_instruction_jsonl(const std::vector<InstructionRecord>& records, const std::string& path);

// Converts dialogue-style silver supervision (one conversation per line, each
// asking "What describes <type>?" with a JSON-list answer) into the
// instruction format. Unparseable records are skipped with a log line.
// Returns the number of records written.
std::size_t convert_dialogue_to_instruction(const std::string& path_in, const std::string& path_out,
                                            Log& log = default_log());

}  // namespace samner::corpus
