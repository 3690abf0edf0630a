#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "samner/backend.hpp"
#include "samner/calibration.hpp"
#include "samner/corpus.hpp"
#include "samner/evaluation.hpp"
#include "samner/extraction.hpp"
#include "samner/log.hpp"
#include "samner/mediation.hpp"
#include "samner/schema.hpp"

namespace samner::pipeline {

struct RunConfig {
  std::string taxonomy_path;
  std::string target_schema_path;
  std::map<std::string, backend::BackendProfile> backends;  // keyed by stage name
  std::map<std::string, std::string> template_paths;        // keyed by stage name
  std::vector<std::string> ablate;
  int parallelism = 1;
  std::string output_dir;
  std::uint64_t seed = 0;
  std::string mock_script;  // empty = live backends
};

struct CliOverrides {
  std::optional<std::string> output_dir;
  std::optional<std::string> mock_script;
  std::optional<std::vector<std::string>> ablate;
  std::optional<std::uint64_t> seed;
  std::optional<int> parallelism;
};

// Reads the config document; relative paths resolve against the config file's
// directory. Referenced files must exist.
RunConfig load_run_config(const std::string& path, const CliOverrides& overrides = {});

// Everything a run needs, loaded and validated once; immutable afterwards.
struct RunContext {
  RunConfig config;
  schema::Taxonomy taxonomy;
  schema::TargetSchema target;
  backend::PromptTemplate anchor_tpl;
  backend::PromptTemplate explorer_tpl;
  backend::PromptTemplate classifier_tpl;
  backend::PromptTemplate calibrator_tpl;
  backend::PromptTemplate direct_tpl;
  std::unique_ptr<backend::Backend> anchor_backend;
  std::unique_ptr<backend::Backend> explorer_backend;
  std::unique_ptr<backend::Backend> classifier_backend;
  std::unique_ptr<backend::Backend> calibrator_backend;
  std::string config_hash;
  std::string taxonomy_hash;
  std::string schema_hash;
};

RunContext load_run(const RunConfig& config);

std::vector<extraction::ExtractionTrace> stage_extract(const RunContext& ctx,
                                                       const std::vector<corpus::Sentence>& sentences,
                                                       const evaluation::AblationToggles& toggles,
                                                       Log& log = default_log());

std::vector<mediation::ArchetypeAssignment> stage_mediate(
    const RunContext& ctx, const std::vector<corpus::Sentence>& sentences,
    const std::vector<extraction::ExtractionTrace>& traces, Log& log = default_log());

std::vector<calibration::CalibratedEntity> stage_calibrate(
    const RunContext& ctx, const std::vector<corpus::Sentence>& sentences,
    const std::vector<mediation::ArchetypeAssignment>& assignments, Log& log = default_log());

// Direct-typing path used by the no_calibration ablation.
std::vector<calibration::CalibratedEntity> stage_direct(
    const RunContext& ctx, const std::vector<corpus::Sentence>& sentences,
    const std::vector<extraction::ExtractionTrace>& traces, Log& log = default_log());

// All three stages in memory, honoring the toggles.
std::vector<calibration::CalibratedEntity> run_pipeline(const RunContext& ctx,
                                                        const std::vector<corpus::Sentence>& sentences,
                                                        const evaluation::AblationToggles& toggles,
                                                        Log& log = default_log());

// Full run with artifacts: traces/assignments/predictions JSONL, a manifest,
// a score report when gold is present, and the ablation matrix when toggles
// were requested. Artifacts are deterministic for scripted backends.
void execute_run(const RunContext& ctx, const std::vector<corpus::Sentence>& sentences,
                 const std::string& output_dir, Log& log = default_log());

// Dataset loading by extension: .jsonl or CoNLL-BIO otherwise.
std::vector<corpus::Sentence> load_dataset(const std::string& path, Log& log = default_log());

// --- versioned JSONL artifacts ----------------------------------------------

inline constexpr int kArtifactVersion = 1;

struct ArtifactHeader {
  std::string artifact;
  int version = kArtifactVersion;
  std::string config_hash;
  std::string taxonomy_hash;
  std::string schema_hash;
};

ArtifactHeader make_header(const RunContext& ctx, const std::string& artifact);

// Readers check the artifact name and version, and that taxonomy/schema
// hashes match the loaded context; mismatches are errors naming both sides.
void write_traces(const std::string& path, const ArtifactHeader& header,
                  const std::vector<extraction::ExtractionTrace>& traces);
std::vector<extraction::ExtractionTrace> read_traces(const std::string& path,
                                                     const RunContext& ctx);

void write_assignments(const std::string& path, const ArtifactHeader& header,
                       const std::vector<mediation::ArchetypeAssignment>& assignments);
std::vector<mediation::ArchetypeAssignment> read_assignments(const std::string& path,
                                                             const RunContext& ctx);

void write_predictions(const std::string& path, const ArtifactHeader& header,
                       const std::vector<calibration::CalibratedEntity>& predictions);
std::vector<calibration::CalibratedEntity> read_predictions(const std::string& path);

}  // namespace samner::pipeline
