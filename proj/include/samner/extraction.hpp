#pragma once

#include <set>
#include <string>

#include "samner/backend.hpp"
#include "samner/corpus.hpp"
#include "samner/log.hpp"

namespace samner::extraction {

// Per-sentence record of the discovery stage. Invariants, preserved by
// combine(): noise_candidates ⊆ explorer; removed ⊆ noise_candidates;
// explorer_denoised == explorer \ removed; final == anchor ∪ explorer_denoised;
// every removed candidate is single-token and absent from anchor.
struct ExtractionTrace {
  std::string sentence_id;
  std::set<std::string> anchor;
  std::set<std::string> explorer;
  std::set<std::string> noise_candidates;
  std::set<std::string> removed;
  std::set<std::string> explorer_denoised;
  std::set<std::string> final;
};

struct DiscoverOptions {
  bool disable_anchor = false;
  bool disable_explorer = false;
  bool disable_ccr = false;
};

struct ConsensusResult {
  std::set<std::string> noise_candidates;
  std::set<std::string> removed;
  std::set<std::string> explorer_denoised;
};

// Consensus refinement (CCR): a single whitespace token from the explorer set
// is treated as noise unless the anchor set independently contains the same
// string. Membership is exact, case-sensitive equality.
ConsensusResult consensus_refine(const std::set<std::string>& anchor,
                                 const std::set<std::string>& explorer);

// Whitespace token count used by the noise test.
std::size_t token_count(const std::string& surface);

// Parses an extractor reply and keeps the surfaces that occur verbatim in the
// sentence; hallucinated surfaces are dropped with a warning. Shared by both
// extractors and by fixture tooling.
std::set<std::string> surfaces_from_reply(const std::string& raw_text,
                                          const std::string& sentence_text,
                                          const std::string& who, Log& log);

backend::Bindings extractor_bindings(const corpus::Sentence& sentence,
                                     const std::set<std::string>& types);

// One extractor pass: render, complete, parse (with one constrained retry on
// parse failure), filter to in-sentence surfaces. Type labels in the reply
// are discarded; typing happens downstream.
std::set<std::string> run_anchor(backend::Backend& backend, const backend::PromptTemplate& tpl,
                                 const corpus::Sentence& sentence,
                                 const std::set<std::string>& types, Log& log = default_log());

std::set<std::string> run_explorer(backend::Backend& backend, const backend::PromptTemplate& tpl,
                                   const corpus::Sentence& sentence,
                                   const std::set<std::string>& types, Log& log = default_log());

// Assembles a trace from already-extracted sets. With disable_anchor the
// anchor set is emptied and refinement is skipped (no corroborator); with
// disable_explorer the final set is the anchor set; disable_ccr unions the
// raw sets.
ExtractionTrace combine(std::string sentence_id, std::set<std::string> anchor,
                        std::set<std::string> explorer, const DiscoverOptions& options);

// Full discovery for one sentence: both extractors plus consensus refinement.
ExtractionTrace discover(backend::Backend& anchor_backend, backend::Backend& explorer_backend,
                         const backend::PromptTemplate& anchor_tpl,
                         const backend::PromptTemplate& explorer_tpl,
                         const corpus::Sentence& sentence, const std::set<std::string>& types,
                         const DiscoverOptions& options, Log& log = default_log());

}  // namespace samner::extraction
