#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "iassl/geometry.hpp"

namespace iassl {

using SampleId = std::int64_t;
using ClassId = int;

enum class Provenance { initial, oracle, pseudo };

struct ObjectLabel {
  ClassId cls = 0;
  BoundingBox box;
  bool operator==(const ObjectLabel&) const = default;
};

struct GivenLabel {
  ClassId cls = 0;
  BoundingBox box;
  Provenance provenance = Provenance::initial;
  bool operator==(const GivenLabel&) const = default;
};

class Oracle;
class Evaluator;
class DatasetIo;
struct TruthPeek;  // test-only backdoor, defined in test code

// Passkey for ground-truth access. Only the simulated oracle, the evaluator
// and dataset I/O can mint one; learner-side code (training, scoring,
// sampling) cannot read truth at all.
class TruthKey {
  TruthKey() = default;
  friend class Oracle;
  friend class Evaluator;
  friend class DatasetIo;
  friend struct TruthPeek;
};

class Sample {
 public:
  Sample() = default;
  Sample(SampleId id, std::vector<double> features, std::optional<ObjectLabel> truth = {},
         std::optional<GivenLabel> given = {})
      : id(id), features(std::move(features)), given_label(std::move(given)), truth_(std::move(truth)) {}

  SampleId id = 0;
  std::vector<double> features;
  std::optional<GivenLabel> given_label;
  std::optional<double> pseudo_score;
  std::optional<GivenLabel> prior_label;  // audit trail of a label overwritten by pseudo-labeling

  bool has_truth() const { return truth_.has_value(); }

  const std::optional<ObjectLabel>& truth(TruthKey) const {
    truth_reads_.fetch_add(1, std::memory_order_relaxed);
    return truth_;
  }

  // Number of truth() calls process-wide; lets tests prove the learner path
  // never touches ground truth.
  static std::uint64_t truth_read_count() { return truth_reads_.load(std::memory_order_relaxed); }

 private:
  std::optional<ObjectLabel> truth_;
  static std::atomic<std::uint64_t> truth_reads_;
};

enum class Partition { well, tentative, validation, test };

const char* partition_name(Partition p);
Partition partition_from_name(const std::string& name);

// Partitioned sample universe. Partition membership lists keep insertion
// order (tentative order doubles as stream order). Copyable value type.
class DatasetStore {
 public:
  void insert(Sample s, Partition p);

  bool contains(SampleId id) const { return samples_.count(id) != 0; }
  std::size_t size() const { return samples_.size(); }

  const Sample& at(SampleId id) const;
  Sample& at_mut(SampleId id);

  const std::vector<SampleId>& ids(Partition p) const { return parts_[index(p)]; }
  Partition partition_of(SampleId id) const;

  // All samples in ascending id order.
  const std::map<SampleId, Sample>& samples() const { return samples_; }

  void move(const std::vector<SampleId>& ids, Partition from, Partition to);

 private:
  static std::size_t index(Partition p) { return static_cast<std::size_t>(p); }

  std::map<SampleId, Sample> samples_;
  std::vector<SampleId> parts_[4];
};

// Moves ids between partitions; disjointness and conservation are preserved.
// Every id must currently live in `from`.
DatasetStore promote(DatasetStore store, const std::vector<SampleId>& ids, Partition from, Partition to);

// The (uncertainty, diversity, confidence) fraction triple.
struct SamplingParams {
  double uncertainty = 0.8;
  double diversity = 0.6;
  double confidence = 0.8;

  void validate() const {
    for (double v : {uncertainty, diversity, confidence})
      if (!(v > 0.0 && v <= 1.0))
        throw std::invalid_argument("SamplingParams: fractions must be in (0,1]");
  }
};

// Euclidean distance. Dimensions must match.
double distance(std::span<const double> a, std::span<const double> b);

}  // namespace iassl
