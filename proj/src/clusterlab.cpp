#include "samner/clusterlab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "samner/errors.hpp"

namespace samner::clusterlab {
namespace {

double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    sum += diff * diff;
  }
  return sum;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const auto idx = static_cast<std::size_t>(u01(rng) * static_cast<double>(n));
  return idx >= n ? n - 1 : idx;
}

std::vector<std::vector<double>> seed_centroids(const EmbeddingSet& data, int k,
                                                std::mt19937_64& rng) {
  const std::size_t n = data.vectors.size();
  std::vector<std::vector<double>> centroids;
  centroids.push_back(data.vectors[uniform_index(rng, n)]);

  std::vector<double> best_d2(n, std::numeric_limits<double>::infinity());
  while (centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best_d2[i] = std::min(best_d2[i], squared_distance(data.vectors[i], centroids.back()));
      total += best_d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = u01(rng) * total;
      double cumulative = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cumulative += best_d2[i];
        if (cumulative > r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_index(rng, n);
    }
    centroids.push_back(data.vectors[pick]);
  }
  return centroids;
}

}  // namespace

EmbeddingSet load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  std::string header;
  if (!std::getline(in, header)) throw IoError(path + ": empty file");
  std::istringstream head(header);
  long long dim = 0;
  long long count = 0;
  if (!(head >> dim >> count) || dim <= 0 || count <= 0) {
    throw IoError(path + ": header must be \"<dim> <count>\"");
  }

  EmbeddingSet data;
  data.dim = static_cast<std::size_t>(dim);
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw IoError(path + ":" + std::to_string(line_no) + ": expected label<TAB>values");
    }
    data.labels.push_back(line.substr(0, tab));
    std::istringstream values(line.substr(tab + 1));
    std::vector<double> vec;
    double v;
    while (values >> v) vec.push_back(v);
    if (vec.size() != data.dim) {
      throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(data.dim) + " components, got " + std::to_string(vec.size()));
    }
    for (double component : vec) {
      if (!std::isfinite(component)) {
        throw IoError(path + ":" + std::to_string(line_no) + ": non-finite component");
      }
    }
    data.vectors.push_back(std::move(vec));
  }
  if (data.vectors.size() != static_cast<std::size_t>(count)) {
    throw IoError(path + ": header declares " + std::to_string(count) + " rows, found " +
                  std::to_string(data.vectors.size()));
  }
  return data;
}

void normalize_rows(EmbeddingSet& data) {
  for (auto& vec : data.vectors) {
    double norm = 0.0;
    for (double v : vec) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (double& v : vec) v /= norm;
    }
  }
}

KmeansResult kmeans(const EmbeddingSet& data, int k, std::uint64_t seed) {
  const std::size_t n = data.vectors.size();
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw ValidationError("k=" + std::to_string(k) + " out of range [1, " + std::to_string(n) + "]");
  }

  std::mt19937_64 rng(seed);
  KmeansResult result;
  result.centroids = seed_centroids(data, k, rng);
  result.assignment.assign(n, 0);

  constexpr int kMaxIterations = 300;
  constexpr double kMovementTolerance = 1e-6;

  for (int iteration = 0; iteration < kMaxIterations; ++iteration) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int best_c = 0;
      for (int c = 0; c < k; ++c) {
        const double d2 = squared_distance(data.vectors[i], result.centroids[static_cast<std::size_t>(c)]);
        if (d2 < best) {
          best = d2;
          best_c = c;
        }
      }
      result.assignment[i] = best_c;
      inertia += best;
    }
    result.inertia = inertia;
    result.inertia_trace.push_back(inertia);

    std::vector<std::vector<double>> means(static_cast<std::size_t>(k),
                                           std::vector<double>(data.dim, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(result.assignment[i]);
      ++counts[c];
      for (std::size_t d = 0; d < data.dim; ++d) means[c][d] += data.vectors[i][d];
    }

    double movement = 0.0;
    for (int c = 0; c < k; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      if (counts[cu] == 0) {
        // Re-seed an emptied cluster to the farthest point from its centroid.
        std::size_t farthest = 0;
        double farthest_d2 = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d2 = squared_distance(
              data.vectors[i], result.centroids[static_cast<std::size_t>(result.assignment[i])]);
          if (d2 > farthest_d2) {
            farthest_d2 = d2;
            farthest = i;
          }
        }
        means[cu] = data.vectors[farthest];
        counts[cu] = 1;
      } else {
        for (std::size_t d = 0; d < data.dim; ++d) {
          means[cu][d] /= static_cast<double>(counts[cu]);
        }
      }
      movement = std::max(movement, std::sqrt(squared_distance(means[cu], result.centroids[cu])));
      result.centroids[cu] = std::move(means[cu]);
    }
    if (movement < kMovementTolerance) break;
  }

  // Final assignment and inertia against the converged centroids.
  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (int c = 0; c < k; ++c) {
      const double d2 = squared_distance(data.vectors[i], result.centroids[static_cast<std::size_t>(c)]);
      if (d2 < best) {
        best = d2;
        best_c = c;
      }
    }
    result.assignment[i] = best_c;
    inertia += best;
  }
  result.inertia = inertia;
  result.inertia_trace.push_back(inertia);
  return result;
}

double silhouette_score(const EmbeddingSet& data, const std::vector<int>& assignment) {
  const std::size_t n = data.vectors.size();
  if (assignment.size() != n) throw ValidationError("assignment size mismatch");

  int k = 0;
  for (int c : assignment) k = std::max(k, c + 1);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int c : assignment) ++sizes[static_cast<std::size_t>(c)];
  int non_empty = 0;
  for (std::size_t size : sizes) {
    if (size > 0) ++non_empty;
  }
  if (non_empty < 2) throw ValidationError("silhouette needs at least 2 non-empty clusters");

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = static_cast<std::size_t>(assignment[i]);
    if (sizes[own] == 1) continue;  // singleton contributes 0

    std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sums[static_cast<std::size_t>(assignment[j])] +=
          std::sqrt(squared_distance(data.vectors[i], data.vectors[j]));
    }

    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      if (c == own || sizes[c] == 0) continue;
      b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

std::uint64_t reference_seed(std::uint64_t seed, int b) {
  return seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(b + 1));
}

GapResult gap_statistic(const EmbeddingSet& data, int k, std::uint64_t seed, int reference_count,
                        Log& log) {
  if (reference_count < 1) throw ValidationError("reference_count must be >= 1");
  const std::size_t n = data.vectors.size();

  auto safe_log = [&](double w) {
    if (w <= 0.0) {
      log.warn("gap statistic: zero within-cluster dispersion, using log(W + 1e-12)");
      return std::log(w + 1e-12);
    }
    return std::log(w);
  };

  const double log_w = safe_log(kmeans(data, k, seed).inertia);

  std::vector<double> lo(data.dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(data.dim, -std::numeric_limits<double>::infinity());
  for (const auto& vec : data.vectors) {
    for (std::size_t d = 0; d < data.dim; ++d) {
      lo[d] = std::min(lo[d], vec[d]);
      hi[d] = std::max(hi[d], vec[d]);
    }
  }

  std::vector<double> reference_logs;
  reference_logs.reserve(static_cast<std::size_t>(reference_count));
  for (int b = 0; b < reference_count; ++b) {
    std::mt19937_64 rng(reference_seed(seed, b));
    EmbeddingSet reference;
    reference.dim = data.dim;
    reference.vectors.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> vec(data.dim);
      for (std::size_t d = 0; d < data.dim; ++d) vec[d] = lo[d] + (hi[d] - lo[d]) * u01(rng);
      reference.vectors.push_back(std::move(vec));
    }
    reference.labels.assign(n, "");
    reference_logs.push_back(safe_log(kmeans(reference, k, reference_seed(seed, b)).inertia));
  }

  double mean = 0.0;
  for (double v : reference_logs) mean += v;
  mean /= static_cast<double>(reference_count);

  double variance = 0.0;
  for (double v : reference_logs) variance += (v - mean) * (v - mean);
  variance /= static_cast<double>(reference_count);

  GapResult result;
  result.gap = mean - log_w;
  result.std = std::sqrt(variance) * std::sqrt(1.0 + 1.0 / static_cast<double>(reference_count));
  return result;
}

KSelectionReport sweep(const EmbeddingSet& data, int k_min, int k_max, std::uint64_t seed,
                       int reference_count, Log& log) {
  const auto n = static_cast<int>(data.vectors.size());
  if (k_min < 2 || k_max >= n || k_min > k_max) {
    throw ValidationError("k range [" + std::to_string(k_min) + ", " + std::to_string(k_max) +
                          "] must lie within [2, " + std::to_string(n - 1) + "]");
  }

  KSelectionReport report;
  for (int k = k_min; k <= k_max; ++k) {
    const KmeansResult clustering = kmeans(data, k, seed);
    report.k_values.push_back(k);
    report.silhouette.push_back(silhouette_score(data, clustering.assignment));
    const GapResult gap = gap_statistic(data, k, seed, reference_count, log);
    report.gap.push_back(gap.gap);
    report.gap_std.push_back(gap.std);
  }

  const std::size_t count = report.k_values.size();
  std::optional<std::size_t> recommended;
  for (std::size_t i = 0; i < count; ++i) {
    const bool left_ok = (i == 0) || report.silhouette[i] >= report.silhouette[i - 1];
    const bool right_ok = (i + 1 == count) || report.silhouette[i] >= report.silhouette[i + 1];
    if (!left_ok || !right_ok) continue;
    const bool gap_ok = (i + 1 == count) || report.gap[i] >= report.gap[i + 1] - report.gap_std[i + 1];
    if (gap_ok) {
      recommended = i;
      break;
    }
  }
  if (!recommended) {
    recommended = static_cast<std::size_t>(
        std::max_element(report.silhouette.begin(), report.silhouette.end()) -
        report.silhouette.begin());
  }
  report.recommended_k = report.k_values[*recommended];
  return report;
}

std::string report_to_json(const KSelectionReport& report) {
  nlohmann::ordered_json doc;
  doc["k_values"] = report.k_values;
  doc["silhouette"] = report.silhouette;
  doc["gap"] = report.gap;
  doc["gap_std"] = report.gap_std;
  doc["recommended_k"] = report.recommended_k;
  return doc.dump();
}

std::string report_to_csv(const KSelectionReport& report) {
  std::ostringstream out;
  out << "k,silhouette,gap,gap_std\n";
  for (std::size_t i = 0; i < report.k_values.size(); ++i) {
    char line[128];
    std::snprintf(line, sizeof(line), "%d,%.9f,%.9f,%.9f\n", report.k_values[i],
                  report.silhouette[i], report.gap[i], report.gap_std[i]);
    out << line;
  }
  return out.str();
}

std::string format_report_table(const KSelectionReport& report) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%4s %12s %12s %12s\n", "k", "silhouette", "gap", "gap_std");
  out << line;
  for (std::size_t i = 0; i < report.k_values.size(); ++i) {
    std::snprintf(line, sizeof(line), "%4d %12.4f %12.4f %12.4f%s\n", report.k_values[i],
                  report.silhouette[i], report.gap[i], report.gap_std[i],
                  report.k_values[i] == report.recommended_k ? "  <- recommended" : "");
    out << line;
  }
  return out.str();
}

}  // namespace samner::clusterlab
