#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "samner/backend.hpp"
#include "samner/calibration.hpp"
#include "samner/corpus.hpp"
#include "samner/schema.hpp"

namespace samner::testsupport {

// Hand-authored model behavior for a scripted fixture: raw extractor replies
// per sentence plus per-surface typing decisions. The script builder walks
// every requested pipeline variant and emits a reply entry for each request
// the run will make.
struct MockWorld {
  std::map<std::string, std::string> anchor_replies;     // sentence id -> raw reply
  std::map<std::string, std::string> explorer_replies;   // sentence id -> raw reply
  std::map<std::string, std::string> archetype_of;       // surface -> archetype
  std::map<std::string, std::string> calibrated_type;    // surface -> calibrator reply
  std::map<std::string, std::string> direct_typed;       // surface -> direct-typing reply
};

struct FixtureSpec {
  std::vector<corpus::Sentence> sentences;
  MockWorld world;
  std::vector<std::string> variants;  // ablation toggle names; the full run is always covered
};

struct Templates {
  backend::PromptTemplate anchor;
  backend::PromptTemplate explorer;
  backend::PromptTemplate classifier;
  backend::PromptTemplate calibrator;
  backend::PromptTemplate direct;
};

Templates load_templates(const std::filesystem::path& prompts_dir);

nlohmann::ordered_json build_script(const schema::Taxonomy& taxonomy,
                                    const schema::TargetSchema& target, const Templates& templates,
                                    const FixtureSpec& spec);

// The 5-sentence music-domain fixture behind the end-to-end tests. Expected
// outcomes are derived by hand from the world tables above and frozen in
// demo_expected_predictions().
FixtureSpec demo_fixture();

struct ExpectedPrediction {
  std::string sentence_id;
  std::string surface;
  std::string archetype;
  std::string target_type;
};

std::vector<ExpectedPrediction> demo_expected_predictions();

struct FixturePaths {
  std::string config;
  std::string dataset;
  std::string script;
};

// Materializes a self-contained fixture directory: dataset.jsonl, script.json,
// config.json, plus copies of the taxonomy, target schema and prompts from
// data_dir.
FixturePaths write_demo_fixture(const std::filesystem::path& dir,
                                const std::filesystem::path& data_dir);

}  // namespace samner::testsupport
