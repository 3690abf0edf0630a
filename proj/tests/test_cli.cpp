#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support/mock_fixture.hpp"

#ifndef SAMNER_DATA_DIR
#define SAMNER_DATA_DIR "data"
#endif
#ifndef SAMNER_CLI_PATH
#define SAMNER_CLI_PATH "samner"
#endif

namespace fs = std::filesystem;

namespace {

struct CliFixture {
  fs::path root;
  samner::testsupport::FixturePaths paths;

  CliFixture() {
    root = fs::temp_directory_path() / ("samner_cli_" + std::to_string(::getpid()));
    paths = samner::testsupport::write_demo_fixture(root, SAMNER_DATA_DIR);
  }
  ~CliFixture() { fs::remove_all(root); }
};

int run_cli(const std::string& args) {
  const std::string command = std::string(SAMNER_CLI_PATH) + " " + args + " 2>/dev/null >/dev/null";
  const int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

std::string run_cli_capture(const std::string& args) {
  const fs::path capture =
      fs::temp_directory_path() / ("samner_cli_out_" + std::to_string(::getpid()));
  const std::string command =
      std::string(SAMNER_CLI_PATH) + " " + args + " > " + capture.string() + " 2>/dev/null";
  const int status = std::system(command.c_str());
  (void)status;
  std::ifstream in(capture);
  std::ostringstream out;
  out << in.rdbuf();
  fs::remove(capture);
  return out.str();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("cli: run on the mock fixture is byte-identical across reruns") {
  CliFixture fixture;
  const auto out1 = fixture.root / "cli_out1";
  const auto out2 = fixture.root / "cli_out2";

  const std::string base = "run --config " + fixture.paths.config + " --dataset " +
                           fixture.paths.dataset + " --output-dir ";
  REQUIRE(run_cli(base + out1.string()) == 0);
  REQUIRE(run_cli(base + out2.string()) == 0);

  for (const char* name : {"traces.jsonl", "assignments.jsonl", "predictions.jsonl",
                           "manifest.json", "report.json"}) {
    CHECK(slurp(out1 / name) == slurp(out2 / name));
  }
  CHECK(fs::exists(out1 / "report.txt"));  // gold-bearing dataset produces a report
}

TEST_CASE("cli: staged extract/mediate/calibrate equals run") {
  CliFixture fixture;
  const auto mono = fixture.root / "cli_mono";
  const auto staged = fixture.root / "cli_staged";

  REQUIRE(run_cli("run --config " + fixture.paths.config + " --dataset " + fixture.paths.dataset +
                  " --output-dir " + mono.string()) == 0);
  REQUIRE(run_cli("extract --config " + fixture.paths.config + " --dataset " +
                  fixture.paths.dataset + " --output-dir " + staged.string()) == 0);
  REQUIRE(run_cli("mediate --config " + fixture.paths.config + " --dataset " +
                  fixture.paths.dataset + " --traces " + (staged / "traces.jsonl").string() +
                  " --output-dir " + staged.string()) == 0);
  REQUIRE(run_cli("calibrate --config " + fixture.paths.config + " --dataset " +
                  fixture.paths.dataset + " --assignments " +
                  (staged / "assignments.jsonl").string() + " --output-dir " + staged.string()) ==
          0);

  for (const char* name : {"traces.jsonl", "assignments.jsonl", "predictions.jsonl"}) {
    CHECK(slurp(mono / name) == slurp(staged / name));
  }
}

TEST_CASE("cli: run with ablation toggles writes the matrix") {
  CliFixture fixture;
  const auto out = fixture.root / "cli_ablate";
  REQUIRE(run_cli("run --config " + fixture.paths.config + " --dataset " + fixture.paths.dataset +
                  " --output-dir " + out.string() + " --ablate no_ccr,no_explorer") == 0);
  CHECK(fs::exists(out / "ablation_report.json"));
  CHECK(fs::exists(out / "ablation_report.txt"));
  CHECK(fs::exists(out / "ablation" / "no_ccr" / "predictions.jsonl"));
  CHECK(fs::exists(out / "ablation" / "no_explorer" / "predictions.jsonl"));
}

TEST_CASE("cli: missing taxonomy is a config error (exit 2)") {
  CliFixture fixture;
  const auto bad_config = fixture.root / "bad.json";
  {
    std::ofstream out(bad_config);
    out << R"({"taxonomy": "missing.json", "target_schema": "target_schema.json",
               "templates": {"anchor": "prompts/anchor.txt", "explorer": "prompts/explorer.txt",
                             "classifier": "prompts/classifier.txt",
                             "calibrator": "prompts/calibrator.txt",
                             "direct": "prompts/direct.txt"},
               "mock_script": "script.json"})";
  }
  CHECK(run_cli("run --config " + bad_config.string() + " --dataset " + fixture.paths.dataset) ==
        2);
}

TEST_CASE("cli: calibrate with a mismatched artifact is a validation error (exit 5)") {
  CliFixture fixture;
  const auto staged = fixture.root / "cli_mismatch";
  REQUIRE(run_cli("extract --config " + fixture.paths.config + " --dataset " +
                  fixture.paths.dataset + " --output-dir " + staged.string()) == 0);
  // feed traces where assignments are expected
  CHECK(run_cli("calibrate --config " + fixture.paths.config + " --dataset " +
                fixture.paths.dataset + " --assignments " + (staged / "traces.jsonl").string() +
                " --output-dir " + staged.string()) == 5);
}

TEST_CASE("cli: score prints F1 1.000 for perfect predictions") {
  CliFixture fixture;
  const auto out = fixture.root / "cli_score";
  REQUIRE(run_cli("run --config " + fixture.paths.config + " --dataset " + fixture.paths.dataset +
                  " --output-dir " + out.string()) == 0);
  const auto json_out = fixture.root / "score.json";
  const auto text = run_cli_capture("score --gold " + fixture.paths.dataset + " --predictions " +
                                    (out / "predictions.jsonl").string() +
                                    " --domain music --json " + json_out.string());
  CHECK(text.find("F1 1.000") != std::string::npos);
  CHECK(fs::exists(json_out));

  // deltas against a previously written report
  const auto delta_text =
      run_cli_capture("score --gold " + fixture.paths.dataset + " --predictions " +
                      (out / "predictions.jsonl").string() + " --delta-against " +
                      json_out.string());
  CHECK(delta_text.find("delta F1") != std::string::npos);
  CHECK(delta_text.find("+0.0") != std::string::npos);
}

TEST_CASE("cli: convert --abstract projects gold labels into archetype records") {
  CliFixture fixture;
  const auto in = fixture.root / "fine_gold.jsonl";
  const auto out = fixture.root / "abstract.jsonl";
  {
    std::ofstream f(in);
    f << R"({"id": "g1", "text": "Bob Dylan acted in Rome", "entities": [{"surface": "Bob Dylan", "label": "actor"}, {"surface": "Rome", "label": "location"}]})"
      << "\n";
  }
  REQUIRE(run_cli("convert --abstract --taxonomy " + std::string(SAMNER_DATA_DIR) +
                  "/archetypes.json --input " + in.string() + " --output " + out.string()) == 0);
  const auto text = slurp(out);
  CHECK(text.find("<ENT>Bob Dylan</ENT>") != std::string::npos);
  CHECK(text.find("Person") != std::string::npos);
  CHECK(text.find("Location") != std::string::npos);
}

TEST_CASE("cli: validate-schema passes on shipped data") {
  CHECK(run_cli(std::string("validate-schema --taxonomy ") + SAMNER_DATA_DIR +
                "/archetypes.json --target-schema " + SAMNER_DATA_DIR +
                "/schemas/crossner_music.json") == 0);
}

TEST_CASE("cli: cluster recommends k=3 on a 3-blob fixture") {
  CliFixture fixture;
  const auto embeddings = fixture.root / "blobs.txt";
  {
    std::ofstream out(embeddings);
    out << "2 9\n";
    int row = 0;
    for (double cx : {0.0, 50.0, 100.0}) {
      for (int i = 0; i < 3; ++i) {
        out << "p" << row++ << "\t" << cx + 0.01 * i << " " << cx - 0.01 * i << "\n";
      }
    }
  }
  const auto text =
      run_cli_capture("cluster --embeddings " + embeddings.string() + " --k-min 2 --k-max 5");
  CHECK(text.find("recommended k: 3") != std::string::npos);
}

TEST_CASE("cli: convert dialogue records") {
  CliFixture fixture;
  const auto in = fixture.root / "dialogue.jsonl";
  const auto out = fixture.root / "instructions.jsonl";
  {
    std::ofstream f(in);
    f << R"({"conversations": [{"from": "human", "value": "Text: Bob sang."}, {"from": "gpt", "value": "ok"}, {"from": "human", "value": "What describes person in the text?"}, {"from": "gpt", "value": "[\"Bob\"]"}]})"
      << "\n";
  }
  REQUIRE(run_cli("convert --input " + in.string() + " --output " + out.string()) == 0);
  CHECK(slurp(out).find("Bob sang.") != std::string::npos);
}
