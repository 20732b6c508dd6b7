#include "iassl/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

namespace iassl {

SelectionCounts resolve_counts(const SamplingParams& params, std::size_t pool_size) {
  params.validate();
  if (pool_size == 0) throw std::invalid_argument("resolve_counts: empty pool");
  SelectionCounts c;
  c.uncertain = static_cast<std::size_t>(std::ceil(params.uncertainty * static_cast<double>(pool_size)));
  c.diverse = static_cast<std::size_t>(std::ceil(params.diversity * static_cast<double>(c.uncertain)));
  c.confident = static_cast<std::size_t>(std::ceil(params.confidence * static_cast<double>(c.diverse)));
  return c;
}

std::vector<SampleId> uncertainty_select(const DetectorModel& model, const std::vector<SampleId>& pool,
                                         const DatasetStore& store, std::size_t eta) {
  if (pool.empty()) throw std::invalid_argument("uncertainty_select: empty pool");
  if (eta > pool.size()) throw std::invalid_argument("uncertainty_select: eta exceeds pool size");

  std::vector<std::pair<double, SampleId>> ranked;  // (uncertainty, id)
  ranked.reserve(pool.size());
  for (SampleId id : pool) {
    const DetectionScore s = score(model, store.at(id).features);
    if (s.f_x < 0.0 || s.f_x > 1.0)
      throw std::logic_error("uncertainty_select: f(x) outside [0,1]");
    ranked.emplace_back(1.0 - s.margin, id);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<SampleId> out;
  out.reserve(eta);
  for (std::size_t i = 0; i < eta; ++i) out.push_back(ranked[i].second);
  return out;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

KmeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed) {
  (void)seed;
  if (k == 0) throw std::invalid_argument("kmeans: k must be >= 1");
  if (k > points.size()) throw std::invalid_argument("kmeans: k exceeds point count");
  const std::size_t n = points.size();

  // farthest-first seeding
  std::vector<std::size_t> seeds{0};
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  while (seeds.size() < k) {
    for (std::size_t i = 0; i < n; ++i)
      min_d[i] = std::min(min_d[i], sq_dist(points[i], points[seeds.back()]));
    std::size_t far = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (min_d[i] > min_d[far]) far = i;
    seeds.push_back(far);
  }

  KmeansResult r;
  r.centroids.reserve(k);
  for (std::size_t s : seeds) r.centroids.push_back(points[s]);
  r.assignments.assign(n, 0);

  for (std::size_t iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = sq_dist(points[i], r.centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sq_dist(points[i], r.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (r.assignments[i] != best) {
        r.assignments[i] = best;
        changed = true;
      }
    }
    r.iterations = iter + 1;

    std::vector<std::vector<double>> sums(k, std::vector<double>(points[0].size(), 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = points[i];
      auto& s = sums[r.assignments[i]];
      for (std::size_t j = 0; j < p.size(); ++j) s[j] += p[j];
      ++counts[r.assignments[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // reseed an empty cluster with the point farthest from its centroid
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = sq_dist(points[i], r.centroids[c]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        r.centroids[c] = points[far];
        changed = true;
        continue;
      }
      for (std::size_t j = 0; j < sums[c].size(); ++j) r.centroids[c][j] = sums[c][j] / counts[c];
    }

    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) sse += sq_dist(points[i], r.centroids[r.assignments[i]]);
    r.sse_trace.push_back(sse);

    if (!changed && iter > 0) break;
  }
  return r;
}

std::vector<SampleId> diversity_filter(const std::vector<SampleId>& candidates, const DatasetStore& store,
                                       std::size_t theta, std::uint64_t seed) {
  if (candidates.empty()) throw std::invalid_argument("diversity_filter: no candidates");
  if (theta == 0) throw std::invalid_argument("diversity_filter: theta must be >= 1");
  if (theta > candidates.size())
    throw std::invalid_argument("diversity_filter: theta exceeds candidate count");

  const std::size_t dim = store.at(candidates.front()).features.size();
  std::vector<double> mean(dim, 0.0);
  for (SampleId id : candidates) {
    const auto& f = store.at(id).features;
    for (std::size_t j = 0; j < dim; ++j) mean[j] += f[j];
  }
  for (double& m : mean) m /= static_cast<double>(candidates.size());

  std::vector<double> dist(candidates.size());
  double mu = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    dist[i] = distance(store.at(candidates[i]).features, mean);
    mu += dist[i];
  }
  mu /= static_cast<double>(candidates.size());
  double var = 0.0;
  for (double d : dist) var += (d - mu) * (d - mu);
  const double sigma = std::sqrt(var / static_cast<double>(candidates.size()));
  const double cutoff = mu + 3.0 * sigma;

  std::vector<SampleId> kept;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (dist[i] <= cutoff) kept.push_back(candidates[i]);
  if (kept.empty()) throw std::runtime_error("diversity_filter: every candidate removed as an outlier");

  // collapse exact duplicates, keeping the lowest id
  std::vector<SampleId> distinct;
  for (SampleId id : kept) {
    bool dup = false;
    for (SampleId seen : distinct)
      if (store.at(seen).features == store.at(id).features) {
        dup = true;
        break;
      }
    if (!dup) distinct.push_back(id);
  }

  const std::size_t k = std::min(theta, distinct.size());
  std::vector<std::vector<double>> pts;
  pts.reserve(distinct.size());
  for (SampleId id : distinct) pts.push_back(store.at(id).features);
  const KmeansResult km = kmeans(pts, k, seed);

  // medoid per cluster: member closest to the centroid, ties by id
  std::vector<SampleId> medoids;
  for (std::size_t c = 0; c < k; ++c) {
    SampleId best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < distinct.size(); ++i) {
      if (km.assignments[i] != c) continue;
      const double d = sq_dist(pts[i], km.centroids[c]);
      if (d < best_d || (d == best_d && distinct[i] < best)) {
        best_d = d;
        best = distinct[i];
      }
    }
    if (best >= 0) medoids.push_back(best);
  }
  std::sort(medoids.begin(), medoids.end());
  return medoids;
}

std::vector<SampleId> confidence_select(const DetectorModel& model, const std::vector<SampleId>& diversity_ids,
                                        const DatasetStore& store, std::size_t gamma, ConfidenceRule rule) {
  if (diversity_ids.empty()) throw std::invalid_argument("confidence_select: empty diversity set");
  if (gamma == 0 || gamma > diversity_ids.size())
    throw std::invalid_argument("confidence_select: gamma out of range");

  // X_top = argmax f(x), ties by ascending id
  SampleId top = diversity_ids.front();
  double top_f = -1.0;
  for (SampleId id : diversity_ids) {
    const double f = score(model, store.at(id).features).f_x;
    if (f > top_f || (f == top_f && id < top)) {
      top_f = f;
      top = id;
    }
  }

  std::vector<SampleId> selected{top};
  std::vector<SampleId> remaining;
  for (SampleId id : diversity_ids)
    if (id != top) remaining.push_back(id);
  std::sort(remaining.begin(), remaining.end());

  while (selected.size() < gamma) {
    SampleId pick = -1;
    double pick_d = rule == ConfidenceRule::max_min ? -1.0 : std::numeric_limits<double>::infinity();
    for (SampleId id : remaining) {
      double nearest = std::numeric_limits<double>::infinity();
      for (SampleId s : selected)
        nearest = std::min(nearest, distance(store.at(id).features, store.at(s).features));
      const bool better = rule == ConfidenceRule::max_min ? nearest > pick_d : nearest < pick_d;
      if (better) {
        pick_d = nearest;
        pick = id;
      }
    }
    selected.push_back(pick);
    remaining.erase(std::find(remaining.begin(), remaining.end(), pick));
  }
  return selected;
}

nlohmann::json BatchSelection::audit() const {
  nlohmann::json stages = nlohmann::json::array();
  stages.push_back({{"stage", "pool"}, {"ids", pool_ids}});
  stages.push_back({{"stage", "uncertainty"}, {"ids", uncertain_ids}, {"scores", uncertainty_scores}});
  stages.push_back({{"stage", "diversity"}, {"ids", diversity_ids}});
  stages.push_back({{"stage", "confidence"}, {"ids", selected_ids}, {"scores", confidence_scores}});
  return stages;
}

BatchSelection select_batch(const DetectorModel& model, const std::vector<SampleId>& pool,
                            const DatasetStore& store, const SamplingParams& params,
                            ConfidenceRule rule, std::uint64_t seed) {
  const SelectionCounts counts = resolve_counts(params, pool.size());
  BatchSelection sel;
  sel.pool_ids = pool;
  sel.uncertain_ids = uncertainty_select(model, pool, store, counts.uncertain);
  for (SampleId id : sel.uncertain_ids)
    sel.uncertainty_scores.push_back(1.0 - score(model, store.at(id).features).margin);
  sel.diversity_ids = diversity_filter(sel.uncertain_ids, store, counts.diverse, seed);
  const std::size_t gamma = std::min(counts.confident, sel.diversity_ids.size());
  sel.selected_ids = confidence_select(model, sel.diversity_ids, store, gamma, rule);
  for (SampleId id : sel.selected_ids)
    sel.confidence_scores.push_back(score(model, store.at(id).features).f_x);
  return sel;
}

}  // namespace iassl
