#include "samner/mediation.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "samner/errors.hpp"

namespace samner::mediation {
namespace {

std::string definitions_block(const schema::Taxonomy& taxonomy) {
  std::string out;
  for (const auto& a : taxonomy.archetypes) {
    out += a.name + ": " + a.definition + "\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

const std::string kFallbackArchetype = "Misc";

}  // namespace

backend::Bindings classifier_bindings(const schema::Taxonomy& taxonomy,
                                      const corpus::Sentence& sentence,
                                      const std::set<std::string>& discovered, Log& log) {
  const std::vector<std::string> surfaces(discovered.begin(), discovered.end());
  const corpus::TaggedSentence tagged = corpus::tag_entities(sentence.text, surfaces, log);
  return {{"tagged_sentence", tagged.text_with_tags},
          {"schema", backend::join(taxonomy.archetype_names(), ", ")},
          {"archetype_definitions", definitions_block(taxonomy)}};
}

std::vector<ArchetypeAssignment> classify_archetypes(backend::Backend& backend,
                                                     const backend::PromptTemplate& tpl,
                                                     const schema::Taxonomy& taxonomy,
                                                     const corpus::Sentence& sentence,
                                                     const std::set<std::string>& discovered,
                                                     Log& log) {
  std::vector<ArchetypeAssignment> assignments;
  if (discovered.empty()) return assignments;

  const backend::Bindings bindings = classifier_bindings(taxonomy, sentence, discovered, log);
  const backend::ModelReply reply = backend.complete(tpl, bindings);

  std::map<std::string, std::string> by_surface;
  if (const auto parsed = backend::parse_string_map(reply.raw_text)) {
    for (const auto& [surface, archetype] : *parsed) by_surface[surface] = archetype;
  }

  const std::vector<std::string> archetype_names = taxonomy.archetype_names();
  for (const auto& surface : discovered) {
    ArchetypeAssignment assignment;
    assignment.sentence_id = sentence.id;
    assignment.surface = surface;
    assignment.raw_reply = reply.raw_text;

    std::optional<std::string> archetype;
    if (const auto it = by_surface.find(surface); it != by_surface.end()) {
      archetype = taxonomy.canonical_archetype(it->second);
    }
    if (!archetype) {
      const auto retry_tpl = backend::make_choice_retry(tpl);
      backend::Bindings retry_bindings = bindings;
      retry_bindings["surface"] = surface;
      retry_bindings["choices"] = backend::join(archetype_names, ", ");
      const backend::ModelReply retry = backend.complete(retry_tpl, retry_bindings);
      assignment.raw_reply = retry.raw_text;
      if (const auto choice = backend::parse_label_choice(retry.raw_text, archetype_names)) {
        archetype = choice;
      }
    }
    if (!archetype) {
      if (taxonomy.canonical_archetype(kFallbackArchetype)) {
        archetype = *taxonomy.canonical_archetype(kFallbackArchetype);
        log.warn("classifier: sentence " + sentence.id + ": no valid archetype for \"" + surface +
                 "\" after retry, falling back to " + *archetype);
      } else {
        log.warn("classifier: sentence " + sentence.id + ": no valid archetype for \"" + surface +
                 "\" and taxonomy has no " + kFallbackArchetype + " archetype, entity dropped");
        continue;
      }
    }
    assignment.archetype = *archetype;
    assignments.push_back(std::move(assignment));
  }
  return assignments;
}

std::vector<AbstractTrainingRecord> build_abstract_dataset(
    const schema::Taxonomy& taxonomy, const std::vector<corpus::Sentence>& sentences, Log& log) {
  std::vector<AbstractTrainingRecord> records;
  records.reserve(sentences.size());

  for (const auto& sentence : sentences) {
    AbstractTrainingRecord record;
    std::vector<std::string> surfaces;

    for (const auto& mention : sentence.gold) {
      if (!mention.label) {
        log.warn("sentence " + sentence.id + ": unlabeled gold mention \"" + mention.surface +
                 "\" skipped in abstract export");
        continue;
      }
      const auto archetype = schema::project(taxonomy, *mention.label);
      if (!archetype) {
        throw ValidationError("sentence " + sentence.id + ": gold label \"" + *mention.label +
                              "\" is not in the projection domain");
      }
      record.schema.insert(*archetype);

      const auto existing = std::find_if(record.labels.begin(), record.labels.end(),
                                         [&](const auto& kv) { return kv.first == mention.surface; });
      if (existing != record.labels.end()) {
        if (existing->second != *archetype) {
          log.warn("sentence " + sentence.id + ": surface \"" + mention.surface +
                   "\" has conflicting archetypes, keeping " + existing->second);
        }
        continue;
      }
      record.labels.emplace_back(mention.surface, *archetype);
      surfaces.push_back(mention.surface);
    }

    record.tagged_sentence = corpus::tag_entities(sentence.text, surfaces, log).text_with_tags;
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<corpus::InstructionRecord> to_instruction_records(
    const std::vector<AbstractTrainingRecord>& records, const schema::Taxonomy& taxonomy) {
  std::vector<corpus::InstructionRecord> out;
  out.reserve(records.size());
  for (const auto& record : records) {
    corpus::InstructionRecord r;
    r.instruction =
        "Assign exactly one type from the schema to each entity marked with <ENT> tags in the "
        "input text. Reply with a JSON object mapping each marked entity to its type.";
    r.input = record.tagged_sentence;
    for (const auto& a : taxonomy.archetypes) {  // taxonomy order, filtered to the instance set
      if (record.schema.count(a.name)) r.schema.push_back(a.name);
    }
    nlohmann::ordered_json labels = nlohmann::ordered_json::object();
    for (const auto& [surface, archetype] : record.labels) labels[surface] = archetype;
    r.output = labels.dump();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace samner::mediation
