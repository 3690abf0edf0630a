#pragma once

#include <functional>
#include <string>
#include <vector>

#include "samner/calibration.hpp"
#include "samner/corpus.hpp"

namespace samner::evaluation {

struct ScoreReport {
  std::string domain;
  long true_positives = 0;
  long false_positives = 0;
  long false_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

ScoreReport make_report(const std::string& domain, long tp, long fp, long fn);

// Micro-F1 with greedy per-sentence one-to-one matching: a prediction is a
// true positive iff an unmatched gold mention in the same sentence has an
// identical surface and a case-insensitively identical type. A prediction for
// an unknown sentence id is an error.
ScoreReport score(const std::vector<corpus::Sentence>& gold,
                  const std::vector<calibration::CalibratedEntity>& predictions,
                  const std::string& domain = "all");

struct DomainData {
  std::string domain;
  const std::vector<corpus::Sentence>* gold;
  const std::vector<calibration::CalibratedEntity>* predictions;
};

// One report per domain plus an unweighted-mean row labeled "Avg".
std::vector<ScoreReport> score_multi_domain(const std::vector<DomainData>& domains);

double macro_average_f1(const std::vector<ScoreReport>& reports);

struct AblationToggles {
  bool no_anchor = false;
  bool no_explorer = false;
  bool no_ccr = false;
  bool no_calibration = false;
};

AblationToggles toggles_from_name(const std::string& name);
const std::vector<std::string>& known_toggles();

struct AblationRow {
  std::string label;  // "full" or the toggle name
  ScoreReport report;
  double delta_f1 = 0.0;  // vs the full configuration
};

using PipelineRunner =
    std::function<std::vector<calibration::CalibratedEntity>(const AblationToggles&)>;

// Runs the full configuration plus one run per requested toggle and scores
// each against the gold; deltas are taken against the full row.
std::vector<AblationRow> run_ablation_matrix(const PipelineRunner& runner,
                                             const std::vector<corpus::Sentence>& gold,
                                             const std::vector<std::string>& toggles,
                                             const std::string& domain);

std::string format_report_table(const std::vector<ScoreReport>& reports);
std::string format_ablation_table(const std::vector<AblationRow>& rows);
std::string report_to_json(const ScoreReport& report);

}  // namespace samner::evaluation
