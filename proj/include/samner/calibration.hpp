#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "samner/backend.hpp"
#include "samner/corpus.hpp"
#include "samner/log.hpp"
#include "samner/mediation.hpp"
#include "samner/schema.hpp"

namespace samner::calibration {

struct CalibratedEntity {
  std::string sentence_id;
  std::string surface;
  std::string archetype;    // empty when typing bypassed the archetype stage
  std::string target_type;  // always a member of the active target schema
  std::string raw_reply;

  bool operator==(const CalibratedEntity&) const = default;
};

backend::Bindings calibrator_bindings(const schema::Taxonomy& taxonomy,
                                      const schema::TargetSchema& target,
                                      const corpus::Sentence& sentence,
                                      const mediation::ArchetypeAssignment& assignment,
                                      Log& log = default_log());

backend::Bindings direct_bindings(const schema::TargetSchema& target,
                                  const corpus::Sentence& sentence, const std::string& surface,
                                  Log& log = default_log());

// Resolves one archetype assignment into a target type via a constrained
// choice over the target type names. One constrained retry on parse failure;
// a second failure drops the entity with a log line.
std::optional<CalibratedEntity> calibrate(backend::Backend& backend,
                                          const backend::PromptTemplate& tpl,
                                          const schema::Taxonomy& taxonomy,
                                          const schema::TargetSchema& target,
                                          const corpus::Sentence& sentence,
                                          const mediation::ArchetypeAssignment& assignment,
                                          Log& log = default_log());

// Calibrates a batch in deterministic (sentence_id, surface) order; dropped
// entities shrink the output.
std::vector<CalibratedEntity> calibrate_all(
    backend::Backend& backend, const backend::PromptTemplate& tpl, const schema::Taxonomy& taxonomy,
    const schema::TargetSchema& target,
    const std::vector<std::pair<const corpus::Sentence*, std::vector<mediation::ArchetypeAssignment>>>&
        records,
    Log& log = default_log(), int parallelism = 1);

// Ablation path: types discovered surfaces directly against the target
// definitions, skipping the archetype stage entirely.
std::vector<CalibratedEntity> direct_type(backend::Backend& backend,
                                          const backend::PromptTemplate& tpl,
                                          const schema::TargetSchema& target,
                                          const corpus::Sentence& sentence,
                                          const std::set<std::string>& discovered,
                                          Log& log = default_log());

}  // namespace samner::calibration
