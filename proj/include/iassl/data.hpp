#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "iassl/core.hpp"

namespace iassl {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ClassSpec {
  ClassId id = 0;
  std::vector<double> mean;
  double cov_scale = 1.0;  // isotropic std around the mean
  double weight = 0.0;     // prior
};

struct SplitFractions {
  double well = 0.1;
  double tentative = 0.6;
  double validation = 0.15;
  double test = 0.15;
};

// Deterministic synthetic stream: Gaussian mixture features, truth boxes
// derived from the features, class-label noise on the tentative partition.
struct GenSpec {
  std::uint64_t seed = 0;
  int dim = 2;
  std::vector<ClassSpec> classes;  // ids must be dense 0..C-1
  std::size_t n_total = 0;
  double label_noise = 0.0;  // probability of a wrong class on a tentative label
  double box_jitter = 0.0;   // uniform box-center perturbation radius
  SplitFractions splits;

  void validate() const;
};

// Pure function of the spec: identical spec, identical store.
DatasetStore generate(const GenSpec& spec);

// Exact class quotas used by generate (largest remainder, ties to the lower
// index). Exposed because imbalance experiments assert on it.
std::vector<std::size_t> quota_allocate(const std::vector<double>& weights, std::size_t total);

struct GroundTruthRecord {
  std::string source;  // e.g. image filename
  std::vector<std::pair<std::string, BoundingBox>> objects;
};

// VOC annotation subset: annotation/filename, annotation/size, repeated
// annotation/object with name and bndbox (pixel corners). Boxes come back
// normalized to corner+size form.
GroundTruthRecord parse_voc_xml(const std::string& document);

struct FeatureRow {
  std::string name;
  std::vector<double> features;
};

// CSV with header "name,f0,f1,...". UTF-8, decimal-point numbers.
std::vector<FeatureRow> read_feature_csv(std::istream& in);
std::vector<FeatureRow> read_feature_csv_file(const std::string& path);

struct JoinSplits {
  std::vector<std::string> well;
  std::vector<std::string> tentative;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

struct JoinResult {
  DatasetStore store;
  std::vector<std::string> class_names;  // index = class id
};

// One sample per (record, object); the record's feature row is shared by its
// objects. Every record name must appear exactly once in the table and in
// exactly one split list.
JoinResult join_features(const std::vector<GroundTruthRecord>& records,
                         const std::vector<FeatureRow>& table, const JoinSplits& splits);

}  // namespace iassl
