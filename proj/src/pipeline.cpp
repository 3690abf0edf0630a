#include "samner/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "samner/errors.hpp"
#include "samner/hash.hpp"
#include "samner/parallel.hpp"

namespace samner::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

const std::vector<std::string> kStageKeys = {"anchor", "explorer", "classifier", "calibrator",
                                             "direct"};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string resolve(const fs::path& base, const std::string& path) {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_absolute()) return p.lexically_normal().string();
  return (base / p).lexically_normal().string();
}

backend::BackendProfile parse_profile(const ordered_json& doc, const std::string& stage) {
  backend::BackendProfile profile;
  profile.name = doc.value("name", stage);
  profile.endpoint_url = doc.value("endpoint_url", std::string{});
  profile.model_id = doc.value("model_id", std::string{});
  profile.temperature = doc.value("temperature", 0.0);
  profile.max_output_tokens = doc.value("max_output_tokens", 512);
  profile.timeout = std::chrono::milliseconds(doc.value("timeout_ms", 30000));
  profile.max_retries = doc.value("max_retries", 2);
  profile.parallelism_limit = doc.value("parallelism_limit", 4);
  profile.api_key_env = doc.value("api_key_env", std::string{"OPENAI_API_KEY"});
  profile.retry_backoff = std::chrono::milliseconds(doc.value("retry_backoff_ms", 250));
  if (profile.temperature < 0.0) {
    throw ConfigError("backend \"" + stage + "\": temperature must be >= 0");
  }
  if (profile.max_output_tokens < 1) {
    throw ConfigError("backend \"" + stage + "\": max_output_tokens must be >= 1");
  }
  if (profile.parallelism_limit < 1) {
    throw ConfigError("backend \"" + stage + "\": parallelism_limit must be >= 1");
  }
  return profile;
}

ordered_json profile_fingerprint_json(const backend::BackendProfile& profile) {
  // Operational knobs (timeouts, retries, parallelism) do not change outputs
  // and stay out of the run identity.
  ordered_json doc;
  doc["endpoint_url"] = profile.endpoint_url;
  doc["model_id"] = profile.model_id;
  doc["temperature"] = profile.temperature;
  doc["max_output_tokens"] = profile.max_output_tokens;
  return doc;
}

std::string template_hash(const backend::PromptTemplate& tpl) {
  return content_hash(tpl.id + '\x1e' + tpl.role_preamble + '\x1e' + tpl.body);
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw ConfigError(what + " not found: " + path);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

ordered_json header_to_json(const ArtifactHeader& header) {
  ordered_json doc;
  doc["artifact"] = header.artifact;
  doc["version"] = header.version;
  doc["config_hash"] = header.config_hash;
  doc["taxonomy_hash"] = header.taxonomy_hash;
  doc["schema_hash"] = header.schema_hash;
  return doc;
}

// Reads and checks an artifact header line against expectations.
ArtifactHeader read_header(std::istream& in, const std::string& path, const std::string& expected) {
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty artifact file");
  ordered_json doc = ordered_json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("artifact")) {
    throw ValidationError(path + ": missing artifact header");
  }
  ArtifactHeader header;
  header.artifact = doc["artifact"].get<std::string>();
  header.version = doc.value("version", 0);
  header.config_hash = doc.value("config_hash", std::string{});
  header.taxonomy_hash = doc.value("taxonomy_hash", std::string{});
  header.schema_hash = doc.value("schema_hash", std::string{});
  if (header.artifact != expected) {
    throw ValidationError(path + ": artifact is \"" + header.artifact + "\", expected \"" +
                          expected + "\"");
  }
  if (header.version != kArtifactVersion) {
    throw ValidationError(path + ": artifact version " + std::to_string(header.version) +
                          ", this build reads version " + std::to_string(kArtifactVersion));
  }
  return header;
}

void check_hashes(const ArtifactHeader& header, const RunContext& ctx, const std::string& path) {
  if (header.taxonomy_hash != ctx.taxonomy_hash) {
    throw ValidationError(path + ": taxonomy hash " + header.taxonomy_hash +
                          " does not match loaded taxonomy " + ctx.taxonomy_hash);
  }
  if (header.schema_hash != ctx.schema_hash) {
    throw ValidationError(path + ": target schema hash " + header.schema_hash +
                          " does not match loaded schema " + ctx.schema_hash);
  }
}

std::set<std::string> json_to_set(const ordered_json& arr) {
  std::set<std::string> out;
  for (const auto& item : arr) out.insert(item.get<std::string>());
  return out;
}

}  // namespace

RunConfig load_run_config(const std::string& path, const CliOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": parse failure: " + e.what());
  }
  const fs::path base = fs::path(path).parent_path();

  RunConfig config;
  config.taxonomy_path = resolve(base, doc.value("taxonomy", std::string{}));
  config.target_schema_path = resolve(base, doc.value("target_schema", std::string{}));
  config.parallelism = doc.value("parallelism", 1);
  config.seed = doc.value("seed", std::uint64_t{0});
  config.output_dir = doc.value("output_dir", std::string{"out"});
  config.mock_script = resolve(base, doc.value("mock_script", std::string{}));
  if (doc.contains("ablate")) {
    for (const auto& t : doc["ablate"]) config.ablate.push_back(t.get<std::string>());
  }
  if (doc.contains("templates")) {
    for (const auto& [key, value] : doc["templates"].items()) {
      config.template_paths[key] = resolve(base, value.get<std::string>());
    }
  }
  if (doc.contains("backends")) {
    for (const auto& [key, value] : doc["backends"].items()) {
      config.backends[key] = parse_profile(value, key);
    }
  }

  if (overrides.output_dir) config.output_dir = *overrides.output_dir;
  if (overrides.mock_script) config.mock_script = *overrides.mock_script;
  if (overrides.ablate) config.ablate = *overrides.ablate;
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.parallelism) config.parallelism = *overrides.parallelism;

  if (config.taxonomy_path.empty()) throw ConfigError(path + ": missing \"taxonomy\"");
  if (config.target_schema_path.empty()) throw ConfigError(path + ": missing \"target_schema\"");
  if (config.parallelism < 1) throw ConfigError(path + ": parallelism must be >= 1");
  require_file(config.taxonomy_path, "taxonomy file");
  require_file(config.target_schema_path, "target schema file");
  for (const auto& key : kStageKeys) {
    const auto it = config.template_paths.find(key);
    if (it == config.template_paths.end()) {
      throw ConfigError(path + ": missing template path for stage \"" + key + "\"");
    }
    require_file(it->second, "template for stage \"" + key + "\"");
  }
  if (!config.mock_script.empty()) require_file(config.mock_script, "mock script");
  for (const auto& name : config.ablate) evaluation::toggles_from_name(name);  // validate
  return config;
}

RunContext load_run(const RunConfig& config) {
  RunContext ctx;
  ctx.config = config;
  ctx.taxonomy = schema::load_taxonomy(config.taxonomy_path);
  ctx.target = schema::load_target_schema(config.target_schema_path);
  ctx.taxonomy_hash = content_hash(schema::canonical_taxonomy_json(ctx.taxonomy));
  ctx.schema_hash = content_hash(schema::canonical_target_schema_json(ctx.target));

  ctx.anchor_tpl = backend::load_template(config.template_paths.at("anchor"));
  ctx.explorer_tpl = backend::load_template(config.template_paths.at("explorer"));
  ctx.classifier_tpl = backend::load_template(config.template_paths.at("classifier"));
  ctx.calibrator_tpl = backend::load_template(config.template_paths.at("calibrator"));
  ctx.direct_tpl = backend::load_template(config.template_paths.at("direct"));
  backend::validate_template(ctx.anchor_tpl, backend::Stage::Anchor);
  backend::validate_template(ctx.explorer_tpl, backend::Stage::Explorer);
  backend::validate_template(ctx.classifier_tpl, backend::Stage::Classifier);
  backend::validate_template(ctx.calibrator_tpl, backend::Stage::Calibrator);
  backend::validate_template(ctx.direct_tpl, backend::Stage::Direct);

  if (!config.mock_script.empty()) {
    ctx.anchor_backend = std::make_unique<backend::ScriptedBackend>(config.mock_script, "anchor");
    ctx.explorer_backend =
        std::make_unique<backend::ScriptedBackend>(config.mock_script, "explorer");
    ctx.classifier_backend =
        std::make_unique<backend::ScriptedBackend>(config.mock_script, "classifier");
    ctx.calibrator_backend =
        std::make_unique<backend::ScriptedBackend>(config.mock_script, "calibrator");
  } else {
    for (const auto& key : std::vector<std::string>{"anchor", "explorer", "classifier",
                                                    "calibrator"}) {
      if (!config.backends.count(key)) {
        throw ConfigError("no backend profile for stage \"" + key + "\" and no mock script");
      }
    }
    ctx.anchor_backend = std::make_unique<backend::HttpBackend>(config.backends.at("anchor"));
    ctx.explorer_backend = std::make_unique<backend::HttpBackend>(config.backends.at("explorer"));
    ctx.classifier_backend =
        std::make_unique<backend::HttpBackend>(config.backends.at("classifier"));
    ctx.calibrator_backend =
        std::make_unique<backend::HttpBackend>(config.backends.at("calibrator"));
  }

  // Content-addressed run identity: anything that can change pipeline output.
  ordered_json identity;
  identity["taxonomy"] = ctx.taxonomy_hash;
  identity["target_schema"] = ctx.schema_hash;
  identity["templates"] = {{"anchor", template_hash(ctx.anchor_tpl)},
                           {"explorer", template_hash(ctx.explorer_tpl)},
                           {"classifier", template_hash(ctx.classifier_tpl)},
                           {"calibrator", template_hash(ctx.calibrator_tpl)},
                           {"direct", template_hash(ctx.direct_tpl)}};
  identity["seed"] = config.seed;
  if (!config.mock_script.empty()) {
    identity["mock_script"] = content_hash(slurp(config.mock_script));
  } else {
    ordered_json profiles;
    for (const auto& [key, profile] : config.backends) {
      profiles[key] = profile_fingerprint_json(profile);
    }
    identity["backends"] = profiles;
  }
  ctx.config_hash = content_hash(identity.dump());
  return ctx;
}

std::vector<extraction::ExtractionTrace> stage_extract(const RunContext& ctx,
                                                       const std::vector<corpus::Sentence>& sentences,
                                                       const evaluation::AblationToggles& toggles,
                                                       Log& log) {
  extraction::DiscoverOptions options;
  options.disable_anchor = toggles.no_anchor;
  options.disable_explorer = toggles.no_explorer;
  options.disable_ccr = toggles.no_ccr;

  std::set<std::string> types;
  for (const auto& t : ctx.target.types) types.insert(t.name);

  std::vector<extraction::ExtractionTrace> traces(sentences.size());
  parallel_for(sentences.size(), ctx.config.parallelism, [&](std::size_t i) {
    traces[i] = extraction::discover(*ctx.anchor_backend, *ctx.explorer_backend, ctx.anchor_tpl,
                                     ctx.explorer_tpl, sentences[i], types, options, log);
  });
  return traces;
}

std::vector<mediation::ArchetypeAssignment> stage_mediate(
    const RunContext& ctx, const std::vector<corpus::Sentence>& sentences,
    const std::vector<extraction::ExtractionTrace>& traces, Log& log) {
  std::map<std::string, const corpus::Sentence*> by_id;
  for (const auto& s : sentences) by_id[s.id] = &s;

  std::vector<std::vector<mediation::ArchetypeAssignment>> slots(traces.size());
  parallel_for(traces.size(), ctx.config.parallelism, [&](std::size_t i) {
    const auto it = by_id.find(traces[i].sentence_id);
    if (it == by_id.end()) {
      throw ValidationError("trace references unknown sentence id \"" + traces[i].sentence_id +
                            "\"");
    }
    slots[i] = mediation::classify_archetypes(*ctx.classifier_backend, ctx.classifier_tpl,
                                              ctx.taxonomy, *it->second, traces[i].final, log);
  });

  std::vector<mediation::ArchetypeAssignment> assignments;
  for (auto& slot : slots) {
    for (auto& a : slot) assignments.push_back(std::move(a));
  }
  return assignments;
}

std::vector<calibration::CalibratedEntity> stage_calibrate(
    const RunContext& ctx, const std::vector<corpus::Sentence>& sentences,
    const std::vector<mediation::ArchetypeAssignment>& assignments, Log& log) {
  std::map<std::string, const corpus::Sentence*> by_id;
  for (const auto& s : sentences) by_id[s.id] = &s;

  std::map<std::string, std::vector<mediation::ArchetypeAssignment>> grouped;
  for (const auto& a : assignments) grouped[a.sentence_id].push_back(a);

  std::vector<std::pair<const corpus::Sentence*, std::vector<mediation::ArchetypeAssignment>>>
      records;
  for (auto& [id, group] : grouped) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw ValidationError("assignment references unknown sentence id \"" + id + "\"");
    }
    records.emplace_back(it->second, std::move(group));
  }
  return calibration::calibrate_all(*ctx.calibrator_backend, ctx.calibrator_tpl, ctx.taxonomy,
                                    ctx.target, records, log, ctx.config.parallelism);
}

std::vector<calibration::CalibratedEntity> stage_direct(
    const RunContext& ctx, const std::vector<corpus::Sentence>& sentences,
    const std::vector<extraction::ExtractionTrace>& traces, Log& log) {
  std::map<std::string, const corpus::Sentence*> by_id;
  for (const auto& s : sentences) by_id[s.id] = &s;

  std::vector<std::vector<calibration::CalibratedEntity>> slots(traces.size());
  parallel_for(traces.size(), ctx.config.parallelism, [&](std::size_t i) {
    const auto it = by_id.find(traces[i].sentence_id);
    if (it == by_id.end()) {
      throw ValidationError("trace references unknown sentence id \"" + traces[i].sentence_id +
                            "\"");
    }
    slots[i] = calibration::direct_type(*ctx.calibrator_backend, ctx.direct_tpl, ctx.target,
                                        *it->second, traces[i].final, log);
  });

  std::vector<calibration::CalibratedEntity> out;
  for (auto& slot : slots) {
    for (auto& e : slot) out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.sentence_id != b.sentence_id) return a.sentence_id < b.sentence_id;
    return a.surface < b.surface;
  });
  return out;
}

std::vector<calibration::CalibratedEntity> run_pipeline(const RunContext& ctx,
                                                        const std::vector<corpus::Sentence>& sentences,
                                                        const evaluation::AblationToggles& toggles,
                                                        Log& log) {
  const auto traces = stage_extract(ctx, sentences, toggles, log);
  if (toggles.no_calibration) return stage_direct(ctx, sentences, traces, log);
  const auto assignments = stage_mediate(ctx, sentences, traces, log);
  return stage_calibrate(ctx, sentences, assignments, log);
}

ArtifactHeader make_header(const RunContext& ctx, const std::string& artifact) {
  return {artifact, kArtifactVersion, ctx.config_hash, ctx.taxonomy_hash, ctx.schema_hash};
}

void write_traces(const std::string& path, const ArtifactHeader& header,
                  const std::vector<extraction::ExtractionTrace>& traces) {
  auto out = open_out(path);
  out << header_to_json(header).dump() << '\n';
  for (const auto& t : traces) {
    ordered_json record;
    record["sentence_id"] = t.sentence_id;
    record["anchor"] = t.anchor;
    record["explorer"] = t.explorer;
    record["noise_candidates"] = t.noise_candidates;
    record["removed"] = t.removed;
    record["explorer_denoised"] = t.explorer_denoised;
    record["final"] = t.final;
    out << record.dump() << '\n';
  }
}

std::vector<extraction::ExtractionTrace> read_traces(const std::string& path,
                                                     const RunContext& ctx) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  const ArtifactHeader header = read_header(in, path, "traces");
  check_hashes(header, ctx, path);

  std::vector<extraction::ExtractionTrace> traces;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const ordered_json record = ordered_json::parse(line);
    extraction::ExtractionTrace t;
    t.sentence_id = record.at("sentence_id").get<std::string>();
    t.anchor = json_to_set(record.at("anchor"));
    t.explorer = json_to_set(record.at("explorer"));
    t.noise_candidates = json_to_set(record.at("noise_candidates"));
    t.removed = json_to_set(record.at("removed"));
    t.explorer_denoised = json_to_set(record.at("explorer_denoised"));
    t.final = json_to_set(record.at("final"));
    traces.push_back(std::move(t));
  }
  return traces;
}

void write_assignments(const std::string& path, const ArtifactHeader& header,
                       const std::vector<mediation::ArchetypeAssignment>& assignments) {
  auto out = open_out(path);
  out << header_to_json(header).dump() << '\n';
  for (const auto& a : assignments) {
    ordered_json record;
    record["sentence_id"] = a.sentence_id;
    record["surface"] = a.surface;
    record["archetype"] = a.archetype;
    record["raw_reply"] = a.raw_reply;
    out << record.dump() << '\n';
  }
}

std::vector<mediation::ArchetypeAssignment> read_assignments(const std::string& path,
                                                             const RunContext& ctx) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  const ArtifactHeader header = read_header(in, path, "assignments");
  check_hashes(header, ctx, path);

  std::vector<mediation::ArchetypeAssignment> assignments;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const ordered_json record = ordered_json::parse(line);
    mediation::ArchetypeAssignment a;
    a.sentence_id = record.at("sentence_id").get<std::string>();
    a.surface = record.at("surface").get<std::string>();
    a.archetype = record.at("archetype").get<std::string>();
    a.raw_reply = record.value("raw_reply", std::string{});
    assignments.push_back(std::move(a));
  }
  return assignments;
}

void write_predictions(const std::string& path, const ArtifactHeader& header,
                       const std::vector<calibration::CalibratedEntity>& predictions) {
  auto out = open_out(path);
  out << header_to_json(header).dump() << '\n';
  for (const auto& p : predictions) {
    ordered_json record;
    record["sentence_id"] = p.sentence_id;
    record["surface"] = p.surface;
    if (p.archetype.empty()) {
      record["archetype"] = nullptr;
    } else {
      record["archetype"] = p.archetype;
    }
    record["target_type"] = p.target_type;
    out << record.dump() << '\n';
  }
}

std::vector<calibration::CalibratedEntity> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  std::vector<calibration::CalibratedEntity> predictions;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const ordered_json record = ordered_json::parse(line, nullptr, false);
    if (record.is_discarded()) throw IoError(path + ": invalid JSONL line");
    if (first) {
      first = false;
      if (record.is_object() && record.contains("artifact")) {
        if (record["artifact"].get<std::string>() != "predictions") {
          throw ValidationError(path + ": artifact is \"" +
                                record["artifact"].get<std::string>() +
                                "\", expected \"predictions\"");
        }
        continue;
      }
    }
    calibration::CalibratedEntity p;
    p.sentence_id = record.at("sentence_id").get<std::string>();
    p.surface = record.at("surface").get<std::string>();
    if (record.contains("archetype") && !record["archetype"].is_null()) {
      p.archetype = record["archetype"].get<std::string>();
    }
    p.target_type = record.at("target_type").get<std::string>();
    predictions.push_back(std::move(p));
  }
  return predictions;
}

std::vector<corpus::Sentence> load_dataset(const std::string& path, Log& log) {
  const std::string ext = fs::path(path).extension().string();
  if (ext == ".jsonl" || ext == ".json") return corpus::load_jsonl(path, log);
  return corpus::load_conll(path, log);
}

void execute_run(const RunContext& ctx, const std::vector<corpus::Sentence>& sentences,
                 const std::string& output_dir, Log& log) {
  fs::create_directories(output_dir);
  const fs::path out(output_dir);

  const auto traces = stage_extract(ctx, sentences, evaluation::AblationToggles{}, log);
  const auto assignments = stage_mediate(ctx, sentences, traces, log);
  const auto predictions = stage_calibrate(ctx, sentences, assignments, log);

  write_traces((out / "traces.jsonl").string(), make_header(ctx, "traces"), traces);
  write_assignments((out / "assignments.jsonl").string(), make_header(ctx, "assignments"),
                    assignments);
  write_predictions((out / "predictions.jsonl").string(), make_header(ctx, "predictions"),
                    predictions);

  ordered_json manifest;
  manifest["artifact"] = "manifest";
  manifest["version"] = kArtifactVersion;
  manifest["config_hash"] = ctx.config_hash;
  manifest["taxonomy_hash"] = ctx.taxonomy_hash;
  manifest["target_schema_hash"] = ctx.schema_hash;
  manifest["templates"] = {{"anchor", template_hash(ctx.anchor_tpl)},
                           {"explorer", template_hash(ctx.explorer_tpl)},
                           {"classifier", template_hash(ctx.classifier_tpl)},
                           {"calibrator", template_hash(ctx.calibrator_tpl)},
                           {"direct", template_hash(ctx.direct_tpl)}};
  manifest["seed"] = ctx.config.seed;
  manifest["domain"] = ctx.target.domain_name;
  manifest["sentences"] = sentences.size();
  manifest["ablate"] = ctx.config.ablate;
  open_out((out / "manifest.json").string()) << manifest.dump(2) << '\n';

  bool has_gold = false;
  for (const auto& s : sentences) has_gold = has_gold || !s.gold.empty();

  if (has_gold) {
    const auto report = evaluation::score(sentences, predictions, ctx.target.domain_name);
    open_out((out / "report.json").string()) << evaluation::report_to_json(report) << '\n';
    open_out((out / "report.txt").string()) << evaluation::format_report_table({report});
  }

  if (!ctx.config.ablate.empty()) {
    if (!has_gold) {
      log.warn("ablation matrix skipped: dataset has no gold annotations");
      return;
    }
    // The full row reuses the predictions already computed above; each toggle
    // run writes its artifacts under ablation/<name>/.
    bool full_done = false;
    const evaluation::PipelineRunner runner =
        [&](const evaluation::AblationToggles& toggles) -> std::vector<calibration::CalibratedEntity> {
      if (!toggles.no_anchor && !toggles.no_explorer && !toggles.no_ccr && !toggles.no_calibration &&
          !full_done) {
        full_done = true;
        return predictions;
      }
      std::string name = "full";
      if (toggles.no_anchor) name = "no_anchor";
      if (toggles.no_explorer) name = "no_explorer";
      if (toggles.no_ccr) name = "no_ccr";
      if (toggles.no_calibration) name = "no_calibration";

      const auto variant_traces = stage_extract(ctx, sentences, toggles, log);
      std::vector<mediation::ArchetypeAssignment> variant_assignments;
      std::vector<calibration::CalibratedEntity> variant_predictions;
      if (toggles.no_calibration) {
        variant_predictions = stage_direct(ctx, sentences, variant_traces, log);
      } else {
        variant_assignments = stage_mediate(ctx, sentences, variant_traces, log);
        variant_predictions = stage_calibrate(ctx, sentences, variant_assignments, log);
      }

      const fs::path variant_dir = out / "ablation" / name;
      fs::create_directories(variant_dir);
      write_traces((variant_dir / "traces.jsonl").string(), make_header(ctx, "traces"),
                   variant_traces);
      if (!toggles.no_calibration) {
        write_assignments((variant_dir / "assignments.jsonl").string(),
                          make_header(ctx, "assignments"), variant_assignments);
      }
      write_predictions((variant_dir / "predictions.jsonl").string(),
                        make_header(ctx, "predictions"), variant_predictions);
      return variant_predictions;
    };

    const auto rows = evaluation::run_ablation_matrix(runner, sentences, ctx.config.ablate,
                                                      ctx.target.domain_name);
    ordered_json rows_json = ordered_json::array();
    for (const auto& row : rows) {
      ordered_json r;
      r["label"] = row.label;
      r["true_positives"] = row.report.true_positives;
      r["false_positives"] = row.report.false_positives;
      r["false_negatives"] = row.report.false_negatives;
      r["precision"] = row.report.precision;
      r["recall"] = row.report.recall;
      r["f1"] = row.report.f1;
      r["delta_f1"] = row.delta_f1;
      rows_json.push_back(std::move(r));
    }
    open_out((out / "ablation_report.json").string()) << rows_json.dump(2) << '\n';
    open_out((out / "ablation_report.txt").string()) << evaluation::format_ablation_table(rows);
  }
}

}  // namespace samner::pipeline
