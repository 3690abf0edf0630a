#include "samner/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "samner/errors.hpp"

namespace samner::evaluation {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string fmt1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

std::string fmt_signed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.1f", v);
  return buf;
}

}  // namespace

ScoreReport make_report(const std::string& domain, long tp, long fp, long fn) {
  ScoreReport r;
  r.domain = domain;
  r.true_positives = tp;
  r.false_positives = fp;
  r.false_negatives = fn;
  r.precision = (tp + fp > 0) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = (tp + fn > 0) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = (r.precision + r.recall > 0) ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                                      : 0.0;
  return r;
}

ScoreReport score(const std::vector<corpus::Sentence>& gold,
                  const std::vector<calibration::CalibratedEntity>& predictions,
                  const std::string& domain) {
  // Per-sentence multiset of unmatched gold (surface, lowercased type) keys.
  std::map<std::string, std::map<std::pair<std::string, std::string>, long>> unmatched;
  long gold_total = 0;
  for (const auto& sentence : gold) {
    auto& keys = unmatched[sentence.id];
    for (const auto& mention : sentence.gold) {
      ++keys[{mention.surface, lower(mention.label.value_or(""))}];
      ++gold_total;
    }
  }

  long tp = 0;
  long fp = 0;
  for (const auto& prediction : predictions) {
    const auto sentence_it = unmatched.find(prediction.sentence_id);
    if (sentence_it == unmatched.end()) {
      throw ValidationError("prediction references unknown sentence id \"" +
                            prediction.sentence_id + "\"");
    }
    const auto key = std::make_pair(prediction.surface, lower(prediction.target_type));
    auto& keys = sentence_it->second;
    if (const auto it = keys.find(key); it != keys.end() && it->second > 0) {
      --it->second;
      ++tp;
    } else {
      ++fp;
    }
  }
  return make_report(domain, tp, fp, gold_total - tp);
}

std::vector<ScoreReport> score_multi_domain(const std::vector<DomainData>& domains) {
  if (domains.empty()) throw ValidationError("score_multi_domain needs at least one domain");
  std::vector<ScoreReport> reports;
  long tp = 0;
  long fp = 0;
  long fn = 0;
  double p_sum = 0.0;
  double r_sum = 0.0;
  for (const auto& d : domains) {
    reports.push_back(score(*d.gold, *d.predictions, d.domain));
    tp += reports.back().true_positives;
    fp += reports.back().false_positives;
    fn += reports.back().false_negatives;
    p_sum += reports.back().precision;
    r_sum += reports.back().recall;
  }

  ScoreReport avg;
  avg.domain = "Avg";
  avg.true_positives = tp;
  avg.false_positives = fp;
  avg.false_negatives = fn;
  avg.precision = p_sum / static_cast<double>(domains.size());
  avg.recall = r_sum / static_cast<double>(domains.size());
  avg.f1 = macro_average_f1(reports);
  reports.push_back(avg);
  return reports;
}

double macro_average_f1(const std::vector<ScoreReport>& reports) {
  double sum = 0.0;
  for (const auto& r : reports) sum += r.f1;
  return reports.empty() ? 0.0 : sum / static_cast<double>(reports.size());
}

AblationToggles toggles_from_name(const std::string& name) {
  AblationToggles t;
  if (name == "no_anchor") {
    t.no_anchor = true;
  } else if (name == "no_explorer") {
    t.no_explorer = true;
  } else if (name == "no_ccr") {
    t.no_ccr = true;
  } else if (name == "no_calibration") {
    t.no_calibration = true;
  } else {
    throw ConfigError("unknown ablation toggle \"" + name + "\"");
  }
  return t;
}

const std::vector<std::string>& known_toggles() {
  static const std::vector<std::string> names = {"no_anchor", "no_explorer", "no_ccr",
                                                 "no_calibration"};
  return names;
}

std::vector<AblationRow> run_ablation_matrix(const PipelineRunner& runner,
                                             const std::vector<corpus::Sentence>& gold,
                                             const std::vector<std::string>& toggles,
                                             const std::string& domain) {
  std::vector<AblationRow> rows;
  const auto full_predictions = runner(AblationToggles{});
  rows.push_back({"full", score(gold, full_predictions, domain), 0.0});
  const double full_f1 = rows.front().report.f1;

  for (const auto& name : toggles) {
    const auto predictions = runner(toggles_from_name(name));
    AblationRow row;
    row.label = name;
    row.report = score(gold, predictions, domain);
    row.delta_f1 = row.report.f1 - full_f1;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_report_table(const std::vector<ScoreReport>& reports) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-14s %7s %7s %7s %6s %6s %6s\n", "domain", "P", "R", "F1",
                "TP", "FP", "FN");
  out << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%-14s %7s %7s %7s %6ld %6ld %6ld\n", r.domain.c_str(),
                  fmt1(r.precision * 100.0).c_str(), fmt1(r.recall * 100.0).c_str(),
                  fmt1(r.f1 * 100.0).c_str(), r.true_positives, r.false_positives,
                  r.false_negatives);
    out << line;
  }
  return out.str();
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %7s %7s %7s %8s %6s %6s %6s\n", "config", "P", "R", "F1",
                "dF1", "TP", "FP", "FN");
  out << line;
  for (const auto& row : rows) {
    const auto& r = row.report;
    const std::string delta = (row.label == "full") ? "-" : fmt_signed1(row.delta_f1 * 100.0);
    std::snprintf(line, sizeof(line), "%-16s %7s %7s %7s %8s %6ld %6ld %6ld\n", row.label.c_str(),
                  fmt1(r.precision * 100.0).c_str(), fmt1(r.recall * 100.0).c_str(),
                  fmt1(r.f1 * 100.0).c_str(), delta.c_str(), r.true_positives, r.false_positives,
                  r.false_negatives);
    out << line;
  }
  return out.str();
}

std::string report_to_json(const ScoreReport& report) {
  nlohmann::ordered_json doc;
  doc["domain"] = report.domain;
  doc["true_positives"] = report.true_positives;
  doc["false_positives"] = report.false_positives;
  doc["false_negatives"] = report.false_negatives;
  doc["precision"] = report.precision;
  doc["recall"] = report.recall;
  doc["f1"] = report.f1;
  return doc.dump();
}

}  // namespace samner::evaluation
