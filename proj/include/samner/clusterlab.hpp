#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "samner/log.hpp"

namespace samner::clusterlab {

struct EmbeddingSet {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> vectors;
  std::size_t dim = 0;
};

// File format: header "<dim> <count>", then one "label<TAB>v1 v2 ... vdim"
// per line. Rejects dimension mismatches and non-finite components.
EmbeddingSet load_embeddings(const std::string& path);

// In-place row normalization to unit length (cosine-style clustering).
void normalize_rows(EmbeddingSet& data);

// All randomness below is drawn from std::mt19937_64 raw outputs through
// u01() = (next() >> 11) * 2^-53, so results are reproducible bit-for-bit
// from the seed and independently re-derivable:
//   - seeding picks centroids k-means++ style (first uniform, then
//     squared-distance weighted via a cumulative walk over u01()*total);
//   - Lloyd iterations run until max centroid movement < 1e-6 or 300 rounds;
//   - an emptied cluster is re-seeded to the point farthest from its
//     assigned centroid (lowest index on ties).
struct KmeansResult {
  std::vector<int> assignment;
  std::vector<std::vector<double>> centroids;
  double inertia = 0.0;                // within-cluster sum of squared distances
  std::vector<double> inertia_trace;   // one entry per assignment phase
};

KmeansResult kmeans(const EmbeddingSet& data, int k, std::uint64_t seed);

// Mean over points of (b - a) / max(a, b), Euclidean; a excludes self, b is
// the best other cluster; singleton clusters contribute 0. Needs >= 2
// non-empty clusters.
double silhouette_score(const EmbeddingSet& data, const std::vector<int>& assignment);

struct GapResult {
  double gap = 0.0;
  double std = 0.0;
};

// gap(k) = mean_b log W*_b - log W_k against B uniform draws over the data's
// bounding box; std is the reference log-W standard deviation scaled by
// sqrt(1 + 1/B). Reference set b uses engine seed `seed ^ (golden * (b+1))`
// for both sampling and clustering. Zero dispersion is guarded with
// log(W + 1e-12) and a warning.
GapResult gap_statistic(const EmbeddingSet& data, int k, std::uint64_t seed, int reference_count,
                        Log& log = default_log());

std::uint64_t reference_seed(std::uint64_t seed, int b);

struct KSelectionReport {
  std::vector<int> k_values;
  std::vector<double> silhouette;
  std::vector<double> gap;
  std::vector<double> gap_std;
  int recommended_k = 0;
};

// Both curves over [k_min, k_max]; recommended_k is the smallest local
// silhouette maximum that also satisfies the one-standard-error gap rule
// gap(k) >= gap(k+1) - std(k+1) (vacuous at the top of the range). If no k
// qualifies, falls back to the silhouette argmax.
KSelectionReport sweep(const EmbeddingSet& data, int k_min, int k_max, std::uint64_t seed,
                       int reference_count, Log& log = default_log());

std::string report_to_json(const KSelectionReport& report);
std::string report_to_csv(const KSelectionReport& report);
std::string format_report_table(const KSelectionReport& report);

}  // namespace samner::clusterlab
