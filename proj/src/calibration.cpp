#include "samner/calibration.hpp"

#include <algorithm>

#include "samner/errors.hpp"
#include "samner/parallel.hpp"

namespace samner::calibration {
namespace {

std::string target_definitions_block(const schema::TargetSchema& target) {
  std::string out;
  for (const auto& t : target.types) {
    out += t.name + ": " + t.definition + "\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::optional<std::string> constrained_choice(backend::Backend& backend,
                                              const backend::PromptTemplate& tpl,
                                              const backend::Bindings& bindings,
                                              const std::string& surface,
                                              const std::vector<std::string>& choices,
                                              std::string* raw_reply) {
  const backend::ModelReply reply = backend.complete(tpl, bindings);
  *raw_reply = reply.raw_text;
  if (const auto choice = backend::parse_label_choice(reply.raw_text, choices)) return choice;

  const auto retry_tpl = backend::make_choice_retry(tpl);
  backend::Bindings retry_bindings = bindings;
  retry_bindings["surface"] = surface;
  retry_bindings["choices"] = backend::join(choices, ", ");
  const backend::ModelReply retry = backend.complete(retry_tpl, retry_bindings);
  *raw_reply = retry.raw_text;
  return backend::parse_label_choice(retry.raw_text, choices);
}

}  // namespace

backend::Bindings calibrator_bindings(const schema::Taxonomy& taxonomy,
                                      const schema::TargetSchema& target,
                                      const corpus::Sentence& sentence,
                                      const mediation::ArchetypeAssignment& assignment, Log& log) {
  const auto* archetype = taxonomy.find_archetype(assignment.archetype);
  if (!archetype) {
    throw ValidationError("assignment for \"" + assignment.surface + "\" names unknown archetype \"" +
                          assignment.archetype + "\"");
  }
  const corpus::TaggedSentence tagged =
      corpus::tag_entities(sentence.text, {assignment.surface}, log);
  return {{"tagged_sentence", tagged.text_with_tags},
          {"sentence", sentence.text},
          {"archetype", archetype->name},
          {"archetype_definitions", archetype->definition},
          {"target_definitions", target_definitions_block(target)}};
}

backend::Bindings direct_bindings(const schema::TargetSchema& target,
                                  const corpus::Sentence& sentence, const std::string& surface,
                                  Log& log) {
  const corpus::TaggedSentence tagged = corpus::tag_entities(sentence.text, {surface}, log);
  return {{"tagged_sentence", tagged.text_with_tags},
          {"sentence", sentence.text},
          {"target_definitions", target_definitions_block(target)}};
}

std::optional<CalibratedEntity> calibrate(backend::Backend& backend,
                                          const backend::PromptTemplate& tpl,
                                          const schema::Taxonomy& taxonomy,
                                          const schema::TargetSchema& target,
                                          const corpus::Sentence& sentence,
                                          const mediation::ArchetypeAssignment& assignment,
                                          Log& log) {
  const backend::Bindings bindings = calibrator_bindings(taxonomy, target, sentence, assignment, log);

  CalibratedEntity entity;
  entity.sentence_id = assignment.sentence_id;
  entity.surface = assignment.surface;
  entity.archetype = assignment.archetype;

  const auto choice = constrained_choice(backend, tpl, bindings, assignment.surface,
                                         target.type_names(), &entity.raw_reply);
  if (!choice) {
    log.warn("calibrator: sentence " + assignment.sentence_id + ": no valid target type for \"" +
             assignment.surface + "\" after retry, entity dropped");
    return std::nullopt;
  }
  entity.target_type = *choice;
  return entity;
}

std::vector<CalibratedEntity> calibrate_all(
    backend::Backend& backend, const backend::PromptTemplate& tpl, const schema::Taxonomy& taxonomy,
    const schema::TargetSchema& target,
    const std::vector<std::pair<const corpus::Sentence*, std::vector<mediation::ArchetypeAssignment>>>&
        records,
    Log& log, int parallelism) {
  struct Job {
    const corpus::Sentence* sentence;
    const mediation::ArchetypeAssignment* assignment;
  };
  std::vector<Job> jobs;
  for (const auto& [sentence, assignments] : records) {
    for (const auto& assignment : assignments) jobs.push_back({sentence, &assignment});
  }
  std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    if (a.assignment->sentence_id != b.assignment->sentence_id) {
      return a.assignment->sentence_id < b.assignment->sentence_id;
    }
    return a.assignment->surface < b.assignment->surface;
  });

  std::vector<std::optional<CalibratedEntity>> slots(jobs.size());
  parallel_for(jobs.size(), parallelism, [&](std::size_t i) {
    slots[i] = calibrate(backend, tpl, taxonomy, target, *jobs[i].sentence, *jobs[i].assignment, log);
  });

  std::vector<CalibratedEntity> out;
  for (auto& slot : slots) {
    if (slot) out.push_back(std::move(*slot));
  }
  return out;
}

std::vector<CalibratedEntity> direct_type(backend::Backend& backend,
                                          const backend::PromptTemplate& tpl,
                                          const schema::TargetSchema& target,
                                          const corpus::Sentence& sentence,
                                          const std::set<std::string>& discovered, Log& log) {
  std::vector<CalibratedEntity> out;
  for (const auto& surface : discovered) {
    const backend::Bindings bindings = direct_bindings(target, sentence, surface, log);

    CalibratedEntity entity;
    entity.sentence_id = sentence.id;
    entity.surface = surface;

    const auto choice =
        constrained_choice(backend, tpl, bindings, surface, target.type_names(), &entity.raw_reply);
    if (!choice) {
      log.warn("direct typing: sentence " + sentence.id + ": no valid target type for \"" + surface +
               "\" after retry, entity dropped");
      continue;
    }
    entity.target_type = *choice;
    out.push_back(std::move(entity));
  }
  return out;
}

}  // namespace samner::calibration
