#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "samner/backend.hpp"
#include "samner/corpus.hpp"
#include "samner/log.hpp"
#include "samner/schema.hpp"

namespace samner::mediation {

struct ArchetypeAssignment {
  std::string sentence_id;
  std::string surface;
  std::string archetype;  // always a member of the active taxonomy
  std::string raw_reply;  // audit trail

  bool operator==(const ArchetypeAssignment&) const = default;
};

struct AbstractTrainingRecord {
  std::string tagged_sentence;
  std::set<std::string> schema;               // instance archetype set
  std::vector<std::pair<std::string, std::string>> labels;  // surface -> archetype
};

backend::Bindings classifier_bindings(const schema::Taxonomy& taxonomy,
                                      const corpus::Sentence& sentence,
                                      const std::set<std::string>& discovered,
                                      Log& log = default_log());

// One backend call per sentence classifies all tagged entities jointly over
// the full archetype set. A surface whose reply is missing or names an
// unknown archetype gets one constrained retry; a second failure falls back
// to the catch-all archetype with a log line.
std::vector<ArchetypeAssignment> classify_archetypes(backend::Backend& backend,
                                                     const backend::PromptTemplate& tpl,
                                                     const schema::Taxonomy& taxonomy,
                                                     const corpus::Sentence& sentence,
                                                     const std::set<std::string>& discovered,
                                                     Log& log = default_log());

// Projects fine-grained gold annotations into archetype-level training
// records: per sentence the instance schema is the projected gold label set
// and every gold surface is tagged. An unmapped gold label aborts with the
// label and sentence id.
std::vector<AbstractTrainingRecord> build_abstract_dataset(const schema::Taxonomy& taxonomy,
                                                           const std::vector<corpus::Sentence>& sentences,
                                                           Log& log = default_log());

std::vector<corpus::InstructionRecord> to_instruction_records(
    const std::vector<AbstractTrainingRecord>& records, const schema::Taxonomy& taxonomy);

}  // namespace samner::mediation
