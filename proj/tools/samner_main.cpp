#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "samner/clusterlab.hpp"
#include "samner/corpus.hpp"
#include "samner/errors.hpp"
#include "samner/evaluation.hpp"
#include "samner/mediation.hpp"
#include "samner/pipeline.hpp"
#include "samner/schema.hpp"

namespace {

namespace fs = std::filesystem;
using namespace samner;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitBackend = 4;
constexpr int kExitValidation = 5;

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string piece;
  for (char c : value) {
    if (c == ',') {
      if (!piece.empty()) out.push_back(piece);
      piece.clear();
    } else {
      piece += c;
    }
  }
  if (!piece.empty()) out.push_back(piece);
  return out;
}

struct RunArgs {
  std::string config_path;
  std::string dataset_path;
  std::string output_dir;
  std::string mock_script;
  std::string ablate;
  std::optional<std::uint64_t> seed;
  std::optional<int> parallelism;
};

pipeline::CliOverrides overrides_from(const RunArgs& args) {
  pipeline::CliOverrides overrides;
  if (!args.output_dir.empty()) overrides.output_dir = args.output_dir;
  if (!args.mock_script.empty()) overrides.mock_script = fs::absolute(args.mock_script).string();
  if (!args.ablate.empty()) overrides.ablate = split_list(args.ablate);
  overrides.seed = args.seed;
  overrides.parallelism = args.parallelism;
  return overrides;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

int cmd_run(const RunArgs& args) {
  const auto config = pipeline::load_run_config(args.config_path, overrides_from(args));
  const auto ctx = pipeline::load_run(config);
  const auto sentences = pipeline::load_dataset(args.dataset_path);
  pipeline::execute_run(ctx, sentences, config.output_dir);
  std::cout << "run complete: " << sentences.size() << " sentences -> " << config.output_dir
            << "\n";
  if (fs::exists(fs::path(config.output_dir) / "report.txt")) {
    std::ifstream report(fs::path(config.output_dir) / "report.txt");
    std::cout << report.rdbuf();
  }
  return kExitOk;
}

int cmd_extract(const RunArgs& args) {
  const auto config = pipeline::load_run_config(args.config_path, overrides_from(args));
  const auto ctx = pipeline::load_run(config);
  const auto sentences = pipeline::load_dataset(args.dataset_path);

  evaluation::AblationToggles toggles;
  for (const auto& name : config.ablate) {
    const auto t = evaluation::toggles_from_name(name);
    toggles.no_anchor |= t.no_anchor;
    toggles.no_explorer |= t.no_explorer;
    toggles.no_ccr |= t.no_ccr;
  }
  const auto traces = pipeline::stage_extract(ctx, sentences, toggles);
  fs::create_directories(config.output_dir);
  pipeline::write_traces((fs::path(config.output_dir) / "traces.jsonl").string(),
                         pipeline::make_header(ctx, "traces"), traces);
  std::cout << "extracted " << traces.size() << " traces -> " << config.output_dir << "\n";
  return kExitOk;
}

int cmd_mediate(const RunArgs& args, const std::string& traces_path) {
  const auto config = pipeline::load_run_config(args.config_path, overrides_from(args));
  const auto ctx = pipeline::load_run(config);
  const auto sentences = pipeline::load_dataset(args.dataset_path);
  const auto traces = pipeline::read_traces(traces_path, ctx);
  const auto assignments = pipeline::stage_mediate(ctx, sentences, traces);
  fs::create_directories(config.output_dir);
  pipeline::write_assignments((fs::path(config.output_dir) / "assignments.jsonl").string(),
                              pipeline::make_header(ctx, "assignments"), assignments);
  std::cout << "classified " << assignments.size() << " entities -> " << config.output_dir << "\n";
  return kExitOk;
}

int cmd_calibrate(const RunArgs& args, const std::string& assignments_path) {
  const auto config = pipeline::load_run_config(args.config_path, overrides_from(args));
  const auto ctx = pipeline::load_run(config);
  const auto sentences = pipeline::load_dataset(args.dataset_path);
  const auto assignments = pipeline::read_assignments(assignments_path, ctx);
  const auto predictions = pipeline::stage_calibrate(ctx, sentences, assignments);
  fs::create_directories(config.output_dir);
  pipeline::write_predictions((fs::path(config.output_dir) / "predictions.jsonl").string(),
                              pipeline::make_header(ctx, "predictions"), predictions);
  std::cout << "calibrated " << predictions.size() << " entities -> " << config.output_dir << "\n";
  return kExitOk;
}

int cmd_score(const std::string& gold_path, const std::string& predictions_path,
              const std::string& domain, const std::string& json_out,
              const std::string& delta_against) {
  const auto gold = pipeline::load_dataset(gold_path);
  const auto predictions = pipeline::read_predictions(predictions_path);
  const auto report = evaluation::score(gold, predictions, domain);

  std::cout << evaluation::format_report_table({report});
  char line[64];
  std::snprintf(line, sizeof(line), "F1 %.3f\n", report.f1);
  std::cout << line;

  if (!json_out.empty()) open_out(json_out) << evaluation::report_to_json(report) << '\n';

  if (!delta_against.empty()) {
    std::ifstream in(delta_against);
    if (!in) throw IoError("cannot open " + delta_against);
    const auto other = nlohmann::ordered_json::parse(in);
    const double other_f1 = other.at("f1").get<double>();
    std::snprintf(line, sizeof(line), "delta F1 vs %s: %+.1f\n",
                  other.value("domain", std::string{"baseline"}).c_str(),
                  (report.f1 - other_f1) * 100.0);
    std::cout << line;
  }
  return kExitOk;
}

int cmd_convert(const std::string& input, const std::string& output, bool abstract_mode,
                const std::string& taxonomy_path) {
  if (abstract_mode) {
    if (taxonomy_path.empty()) throw ConfigError("--abstract needs --taxonomy");
    const auto taxonomy = schema::load_taxonomy(taxonomy_path);
    const auto sentences = pipeline::load_dataset(input);
    const auto records = mediation::build_abstract_dataset(taxonomy, sentences);
    corpus::write_instruction_jsonl(mediation::to_instruction_records(records, taxonomy), output);
    std::cout << "wrote " << records.size() << " abstract records -> " << output << "\n";
    return kExitOk;
  }
  const std::size_t count = corpus::convert_dialogue_to_instruction(input, output);
  std::cout << "wrote " << count << " instruction records -> " << output << "\n";
  return kExitOk;
}

int cmd_validate_schema(const std::string& taxonomy_path, const std::string& target_schema_path) {
  const auto taxonomy = schema::parse_taxonomy(taxonomy_path);
  const auto report = schema::validate_desiderata(taxonomy);
  for (const auto& check : report.checks) {
    const char* status = check.status == schema::CheckStatus::Pass     ? "PASS"
                         : check.status == schema::CheckStatus::Fail   ? "FAIL"
                                                                       : "MANUAL";
    std::cout << check.name << ": " << status << " — " << check.details << "\n";
  }
  bool ok = report.mechanical_pass();
  if (!target_schema_path.empty()) {
    try {
      schema::load_target_schema(target_schema_path);
      std::cout << "target schema: PASS\n";
    } catch (const std::exception& e) {
      std::cout << "target schema: FAIL — " << e.what() << "\n";
      ok = false;
    }
  }
  return ok ? kExitOk : kExitValidation;
}

int cmd_cluster(const std::string& embeddings_path, int k_min, int k_max, std::uint64_t seed,
                int refs, bool cosine, const std::string& json_out, const std::string& csv_out) {
  auto data = clusterlab::load_embeddings(embeddings_path);
  if (cosine) clusterlab::normalize_rows(data);
  const auto report = clusterlab::sweep(data, k_min, k_max, seed, refs);
  std::cout << clusterlab::format_report_table(report);
  std::cout << "recommended k: " << report.recommended_k << "\n";
  if (!json_out.empty()) open_out(json_out) << clusterlab::report_to_json(report) << '\n';
  if (!csv_out.empty()) open_out(csv_out) << clusterlab::report_to_csv(report);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-stage zero-shot NER pipeline: cooperative entity discovery, archetype "
               "mediation, and definition-guided calibration"};
  app.require_subcommand(1);

  RunArgs args;
  std::string traces_path;
  std::string assignments_path;

  auto add_run_options = [&](CLI::App* cmd, bool needs_dataset = true) {
    cmd->add_option("--config", args.config_path, "run configuration file")->required();
    if (needs_dataset) {
      cmd->add_option("--dataset", args.dataset_path, "input dataset (.jsonl or CoNLL-BIO)")
          ->required();
    }
    cmd->add_option("--output-dir", args.output_dir, "output directory");
    cmd->add_option("--mock-script", args.mock_script, "scripted backend replies");
    cmd->add_option("--ablate", args.ablate,
                    "comma-separated toggles: no_anchor,no_explorer,no_ccr,no_calibration");
    cmd->add_option("--seed", args.seed, "run seed");
    cmd->add_option("--parallelism", args.parallelism, "worker count");
  };

  auto* run = app.add_subcommand("run", "execute the full pipeline");
  add_run_options(run);

  auto* extract = app.add_subcommand("extract", "stage 1 only: entity discovery");
  add_run_options(extract);

  auto* mediate = app.add_subcommand("mediate", "stage 2 only: archetype classification");
  add_run_options(mediate);
  mediate->add_option("--traces", traces_path, "traces.jsonl from extract")->required();

  auto* calibrate = app.add_subcommand("calibrate", "stage 3 only: target-type calibration");
  add_run_options(calibrate);
  calibrate->add_option("--assignments", assignments_path, "assignments.jsonl from mediate")
      ->required();

  std::string gold_path, predictions_path, domain = "all", json_out, delta_against;
  auto* score = app.add_subcommand("score", "micro-F1 against gold annotations");
  score->add_option("--gold", gold_path, "gold dataset")->required();
  score->add_option("--predictions", predictions_path, "predictions.jsonl")->required();
  score->add_option("--domain", domain, "domain label for the report");
  score->add_option("--json", json_out, "write the report as JSON");
  score->add_option("--delta-against", delta_against, "report.json to diff F1 against");

  std::string convert_in, convert_out, convert_taxonomy;
  bool convert_abstract = false;
  auto* convert = app.add_subcommand("convert", "dataset conversion to instruction JSONL");
  convert->add_option("--input", convert_in, "input file")->required();
  convert->add_option("--output", convert_out, "output instruction JSONL")->required();
  convert->add_flag("--abstract", convert_abstract,
                    "project gold labels into archetype-level records instead of converting "
                    "dialogue supervision");
  convert->add_option("--taxonomy", convert_taxonomy, "taxonomy (required with --abstract)");

  std::string vs_taxonomy, vs_target;
  auto* validate = app.add_subcommand("validate-schema", "taxonomy desiderata checks");
  validate->add_option("--taxonomy", vs_taxonomy, "taxonomy file")->required();
  validate->add_option("--target-schema", vs_target, "target schema file");

  std::string embeddings_path, cluster_json, cluster_csv;
  int k_min = 2, k_max = 0, refs = 10;
  std::uint64_t cluster_seed = 0;
  bool cosine = false;
  auto* cluster = app.add_subcommand("cluster", "k-selection sweep over entity-type embeddings");
  cluster->add_option("--embeddings", embeddings_path, "embedding file")->required();
  cluster->add_option("--k-min", k_min, "smallest k")->required();
  cluster->add_option("--k-max", k_max, "largest k")->required();
  cluster->add_option("--seed", cluster_seed, "clustering seed");
  cluster->add_option("--refs", refs, "gap-statistic reference draws");
  cluster->add_flag("--cosine", cosine, "normalize rows before clustering");
  cluster->add_option("--json", cluster_json, "write the report as JSON");
  cluster->add_option("--csv", cluster_csv, "write the curves as CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(args);
    if (extract->parsed()) return cmd_extract(args);
    if (mediate->parsed()) return cmd_mediate(args, traces_path);
    if (calibrate->parsed()) return cmd_calibrate(args, assignments_path);
    if (score->parsed()) {
      return cmd_score(gold_path, predictions_path, domain, json_out, delta_against);
    }
    if (convert->parsed()) {
      return cmd_convert(convert_in, convert_out, convert_abstract, convert_taxonomy);
    }
    if (validate->parsed()) return cmd_validate_schema(vs_taxonomy, vs_target);
    if (cluster->parsed()) {
      return cmd_cluster(embeddings_path, k_min, k_max, cluster_seed, refs, cosine, cluster_json,
                         cluster_csv);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
