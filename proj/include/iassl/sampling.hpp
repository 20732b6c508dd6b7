#pragma once

#include <cstdint>
#include <vector>

#include "iassl/detector.hpp"

#include <nlohmann/json_fwd.hpp>

namespace iassl {

struct SelectionCounts {
  std::size_t uncertain = 0;  // eta
  std::size_t diverse = 0;    // vartheta
  std::size_t confident = 0;  // gamma
};

// Nested-ceiling mapping of the fraction triple onto counts:
// eta = ceil(u*pool), theta = ceil(d*eta), gamma = ceil(c*theta).
SelectionCounts resolve_counts(const SamplingParams& params, std::size_t pool_size);

// The eta ids with largest uncertainty 1 - margin(x); ties by ascending id.
std::vector<SampleId> uncertainty_select(const DetectorModel& model, const std::vector<SampleId>& pool,
                                         const DatasetStore& store, std::size_t eta);

struct KmeansResult {
  std::vector<std::size_t> assignments;        // per point, cluster index
  std::vector<std::vector<double>> centroids;  // k centroids
  std::size_t iterations = 0;
  std::vector<double> sse_trace;  // within-cluster SSE after each Lloyd iteration
};

// Lloyd iterations from deterministic farthest-first seeding (first seed is
// the first point; each next seed maximizes min distance to the chosen
// seeds). The seed parameter is accepted for interface stability; the
// deterministic initialization does not consume randomness.
KmeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed);

// Outlier removal (distance to candidate mean > mu + 3*sigma), duplicate
// collapse, k-means with k = min(theta, distinct points), one medoid per
// cluster. Returns ids ascending.
std::vector<SampleId> diversity_filter(const std::vector<SampleId>& candidates, const DatasetStore& store,
                                       std::size_t theta, std::uint64_t seed);

enum class ConfidenceRule { max_min, most_similar };

// Greedy selection seeded with argmax f(x). max_min adds the candidate
// farthest from the current selection (farthest-point rule); most_similar
// adds the nearest one. Ties by ascending id.
std::vector<SampleId> confidence_select(const DetectorModel& model, const std::vector<SampleId>& diversity_ids,
                                        const DatasetStore& store, std::size_t gamma,
                                        ConfidenceRule rule = ConfidenceRule::max_min);

struct BatchSelection {
  std::vector<SampleId> pool_ids;
  std::vector<SampleId> uncertain_ids;
  std::vector<SampleId> diversity_ids;
  std::vector<SampleId> selected_ids;
  nlohmann::json audit() const;  // per-stage ids and scores

  // filled by select_batch
  std::vector<double> uncertainty_scores;  // aligned with uncertain_ids
  std::vector<double> confidence_scores;   // aligned with selected_ids
};

// The full collaborative pipeline: uncertainty -> diversity -> confidence.
BatchSelection select_batch(const DetectorModel& model, const std::vector<SampleId>& pool,
                            const DatasetStore& store, const SamplingParams& params,
                            ConfidenceRule rule, std::uint64_t seed);

}  // namespace iassl
