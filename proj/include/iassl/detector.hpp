#pragma once

#include <functional>
#include <span>
#include <vector>

#include "iassl/core.hpp"
#include "iassl/optim.hpp"

namespace iassl {

// Reference detector: multinomial logistic regression over the feature
// vector plus a linear localization head. Stands in for the CNN backbone,
// which is out of scope; everything downstream only sees this contract.
struct DetectorModel {
  int num_classes = 0;
  int dim = 0;
  std::vector<double> weights;      // (num_classes) x (dim+1), row-major, bias last
  std::vector<double> loc_weights;  // 4 x (dim+1), rows: x, y, w, h

  static DetectorModel zeros(int num_classes, int dim);

  bool finite() const;
  std::size_t param_count() const { return weights.size() + loc_weights.size(); }
  void validate() const;

  bool operator==(const DetectorModel&) const = default;
};

struct DetectionScore {
  std::vector<double> class_probs;  // softmax, sums to 1
  ClassId top_class = 0;
  double f_x = 0.0;    // top probability
  double margin = 0.0; // top minus runner-up probability
  BoundingBox box;
};

DetectionScore score(const DetectorModel& model, std::span<const double> x);

// Joint training loss on one labeled sample: cross-entropy on the class plus
// lambda_loc times the squared error of the raw localization outputs against
// the label box. Gradient is with respect to [weights; loc_weights] flattened.
struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

inline constexpr double kDefaultLambdaLoc = 1.0;

LossGrad sample_loss_grad(const DetectorModel& model, std::span<const double> x, const GivenLabel& label,
                          double lambda_loc = kDefaultLambdaLoc);

// Mean loss and gradient over a set of labeled samples.
LossGrad batch_loss_grad(const DetectorModel& model, const std::vector<SampleId>& ids,
                         const DatasetStore& store, double lambda_loc = kDefaultLambdaLoc);

// Called after each epoch with the full-batch mean loss; return false to
// stop early.
using EpochCallback = std::function<bool(int epoch, double mean_loss)>;

// Per-sample first-order training for `epochs` passes. Deterministic given
// the optimizer config (shuffling is seeded). Returns a new model.
DetectorModel train(const DetectorModel& model_init, const std::vector<SampleId>& train_ids,
                    const DatasetStore& store, const OptimizerConfig& opt, int epochs,
                    double lambda_loc = kDefaultLambdaLoc, const EpochCallback& on_epoch = {});

// Assigns (top class, predicted box, provenance=pseudo) and pseudo_score =
// f(x) to each id; the previous label, if any, is kept in the audit field.
// Ids must be tentative.
DatasetStore pseudo_label(const DetectorModel& model, const std::vector<SampleId>& ids, DatasetStore store);

}  // namespace iassl
