#include "samner/extraction.hpp"

#include <algorithm>
#include <sstream>

#include "samner/errors.hpp"

namespace samner::extraction {

std::size_t token_count(const std::string& surface) {
  std::istringstream in(surface);
  std::string piece;
  std::size_t count = 0;
  while (in >> piece) ++count;
  return count;
}

ConsensusResult consensus_refine(const std::set<std::string>& anchor,
                                 const std::set<std::string>& explorer) {
  ConsensusResult result;
  for (const auto& candidate : explorer) {
    if (token_count(candidate) != 1) continue;
    result.noise_candidates.insert(candidate);
    if (anchor.count(candidate) == 0) result.removed.insert(candidate);
  }
  for (const auto& candidate : explorer) {
    if (result.removed.count(candidate) == 0) result.explorer_denoised.insert(candidate);
  }
  return result;
}

std::set<std::string> surfaces_from_reply(const std::string& raw_text,
                                          const std::string& sentence_text,
                                          const std::string& who, Log& log) {
  std::set<std::string> surfaces;
  const auto parsed = backend::parse_entity_list(raw_text);
  if (!parsed) return surfaces;
  for (const auto& [type, mentions] : *parsed) {
    (void)type;
    for (const auto& surface : mentions) {
      if (surface.empty()) continue;
      if (sentence_text.find(surface) == std::string::npos) {
        log.warn(who + ": dropped \"" + surface + "\": not found in sentence");
        continue;
      }
      surfaces.insert(surface);
    }
  }
  return surfaces;
}

backend::Bindings extractor_bindings(const corpus::Sentence& sentence,
                                     const std::set<std::string>& types) {
  std::vector<std::string> sorted(types.begin(), types.end());
  return {{"sentence", sentence.text}, {"schema", backend::join(sorted, ", ")}};
}

namespace {

std::set<std::string> run_extractor(backend::Backend& backend, const backend::PromptTemplate& tpl,
                                    const corpus::Sentence& sentence,
                                    const std::set<std::string>& types, const std::string& who,
                                    Log& log) {
  if (types.empty()) throw ValidationError(who + ": empty extraction schema");
  const backend::Bindings bindings = extractor_bindings(sentence, types);

  backend::ModelReply reply = backend.complete(tpl, bindings);
  if (!backend::parse_entity_list(reply.raw_text)) {
    const auto retry_tpl = backend::make_entity_list_retry(tpl);
    reply = backend.complete(retry_tpl, bindings);
    if (!backend::parse_entity_list(reply.raw_text)) {
      log.warn(who + ": sentence " + sentence.id + ": unparseable reply after retry, using empty set");
      return {};
    }
  }
  return surfaces_from_reply(reply.raw_text, sentence.text, who + ": sentence " + sentence.id, log);
}

}  // namespace

std::set<std::string> run_anchor(backend::Backend& backend, const backend::PromptTemplate& tpl,
                                 const corpus::Sentence& sentence,
                                 const std::set<std::string>& types, Log& log) {
  return run_extractor(backend, tpl, sentence, types, "anchor", log);
}

std::set<std::string> run_explorer(backend::Backend& backend, const backend::PromptTemplate& tpl,
                                   const corpus::Sentence& sentence,
                                   const std::set<std::string>& types, Log& log) {
  return run_extractor(backend, tpl, sentence, types, "explorer", log);
}

ExtractionTrace combine(std::string sentence_id, std::set<std::string> anchor,
                        std::set<std::string> explorer, const DiscoverOptions& options) {
  ExtractionTrace trace;
  trace.sentence_id = std::move(sentence_id);
  if (options.disable_anchor) anchor.clear();
  if (options.disable_explorer) explorer.clear();
  trace.anchor = std::move(anchor);
  trace.explorer = std::move(explorer);

  // Without an anchor there is no corroborator, so refinement is skipped
  // rather than run against an empty set (which would delete every
  // single-token candidate).
  const bool refine = !options.disable_ccr && !options.disable_anchor;
  if (refine) {
    ConsensusResult consensus = consensus_refine(trace.anchor, trace.explorer);
    trace.noise_candidates = std::move(consensus.noise_candidates);
    trace.removed = std::move(consensus.removed);
    trace.explorer_denoised = std::move(consensus.explorer_denoised);
  } else {
    trace.explorer_denoised = trace.explorer;
  }

  trace.final = trace.anchor;
  trace.final.insert(trace.explorer_denoised.begin(), trace.explorer_denoised.end());
  return trace;
}

ExtractionTrace discover(backend::Backend& anchor_backend, backend::Backend& explorer_backend,
                         const backend::PromptTemplate& anchor_tpl,
                         const backend::PromptTemplate& explorer_tpl,
                         const corpus::Sentence& sentence, const std::set<std::string>& types,
                         const DiscoverOptions& options, Log& log) {
  std::set<std::string> anchor;
  std::set<std::string> explorer;
  if (!options.disable_anchor) {
    anchor = run_anchor(anchor_backend, anchor_tpl, sentence, types, log);
  }
  if (!options.disable_explorer) {
    explorer = run_explorer(explorer_backend, explorer_tpl, sentence, types, log);
  }
  return combine(sentence.id, std::move(anchor), std::move(explorer), options);
}

}  // namespace samner::extraction
