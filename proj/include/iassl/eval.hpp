#pragma once

#include <vector>

#include "iassl/core.hpp"

namespace iassl {

struct DetectorModel;
struct DetectionScore;

struct DetectionRecord {
  SampleId sample_id = 0;
  ClassId cls = 0;
  double score = 0.0;  // [0,1]
  BoundingBox box;
};

struct TruthRecord {
  SampleId sample_id = 0;
  ClassId cls = 0;
  BoundingBox box;
};

enum class ApVariant { elevenpoint, allpoint };

struct PrCurve {
  std::vector<double> recall;     // along the ranking sweep, non-decreasing
  std::vector<double> precision;  // paired with recall
  double ap_11pt = 0.0;
  double ap_all = 0.0;
};

// Ranks detections by (score desc, sample id asc, class id asc) and matches
// greedily: a detection is a TP iff an unmatched truth of the same sample and
// class overlaps with IoU >= iou_thresh (inclusive). Each truth matches at
// most once. Flags are returned in ranked order.
std::vector<bool> match_detections(std::vector<DetectionRecord> dets,
                                   const std::vector<TruthRecord>& truths, double iou_thresh = 0.5);

// Sorting rule used by match_detections, exposed so callers can align
// per-detection data with the returned flags.
void rank_detections(std::vector<DetectionRecord>& dets);

PrCurve pr_curve(const std::vector<bool>& flags, std::size_t n_truth);

// flags must be in ranked (score-descending) order.
double average_precision(const std::vector<bool>& flags, std::size_t n_truth, ApVariant variant);

// Unweighted mean of per-class AP over the listed classes; classes without
// any ground truth are skipped. Errors if no listed class has truth.
double mean_ap(const std::vector<DetectionRecord>& dets, const std::vector<TruthRecord>& truths,
               const std::vector<ClassId>& classes, ApVariant variant, double iou_thresh = 0.5);

struct EvalConfig {
  double iou_thresh = 0.5;
  ApVariant variant = ApVariant::elevenpoint;
};

// Ground-truth side of evaluation: builds truth records for a partition and
// scores a model against them. Holds the TruthKey; detector/sampling/loop
// code never sees truth directly.
class Evaluator {
 public:
  explicit Evaluator(EvalConfig cfg = {}) : cfg_(cfg) {}

  std::vector<TruthRecord> truths_of(const DatasetStore& store, Partition part) const;

  // One detection per sample: the model's top class, score f(x), and box.
  std::vector<DetectionRecord> detect(const DetectorModel& model, const DatasetStore& store,
                                      Partition part) const;

  // mAP of the model on a partition over the classes present in its truth.
  double map_on(const DetectorModel& model, const DatasetStore& store, Partition part) const;

  const EvalConfig& config() const { return cfg_; }

 private:
  EvalConfig cfg_;
};

}  // namespace iassl
