#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "iassl/data.hpp"
#include "iassl/loop.hpp"

namespace iassl {

// Shortest round-trip decimal text; the determinism contracts (byte-identical
// files for identical runs) hinge on this formatting.
std::string format_double(double v);

nlohmann::json genspec_to_json(const GenSpec& spec);
GenSpec genspec_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const DetectorModel& m);
DetectorModel model_from_json(const nlohmann::json& j);

// Owns ground-truth serialization, hence a TruthKey holder.
class DatasetIo {
 public:
  // {spec, num_classes, samples:[{id, features, truth, given_label, partition, ...}]}
  static nlohmann::json dataset_to_json(const DatasetStore& store, nlohmann::json spec_descr,
                                        int num_classes);
  struct LoadedDataset {
    DatasetStore store;
    int num_classes = 0;
    nlohmann::json spec;
  };
  static LoadedDataset dataset_from_json(const nlohmann::json& j);
};

inline constexpr const char* kCurveHeader =
    "phase,bin_index,candidate_bin_id,accepted,acc_before,acc_after,oracle_inspections,"
    "oracle_corrections,d_well_size,d_tentative_size,wall_time_ms";

std::string curve_to_csv(const LearningCurve& curve);
LearningCurve curve_from_csv(const std::string& text);

nlohmann::json run_state_to_json(const RunState& state, const std::string& config_hash, int num_classes);
struct LoadedState {
  RunState state;
  std::string config_hash;
  int num_classes = 0;
};
LoadedState run_state_from_json(const nlohmann::json& j);

nlohmann::json detections_to_json(const std::vector<DetectionRecord>& dets);
std::vector<DetectionRecord> detections_from_json(const nlohmann::json& j);

nlohmann::json ground_truth_to_json(const std::vector<GroundTruthRecord>& recs);
std::vector<GroundTruthRecord> ground_truth_from_json(const nlohmann::json& j);

// FNV-1a over the canonical (sorted-key) dump, as 16 hex chars.
std::string config_hash(const nlohmann::json& canonical_config);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace iassl
