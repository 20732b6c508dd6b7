#pragma once

#include <functional>
#include <optional>

#include <nlohmann/json.hpp>

#include "iassl/eval.hpp"
#include "iassl/sampling.hpp"

namespace iassl {

enum class BinStatus { pending, accepted, corrected, discarded };

// Score-sorted contiguous slices of the selected batch. Larger bins come
// first; pseudo-scores are non-increasing within and across bins.
struct BinSequence {
  std::vector<std::vector<SampleId>> bins;
  std::vector<BinStatus> status;
  std::size_t j = 10;

  std::size_t pending_count() const;
};

// Splits the selected ids (sorted by pseudo_score descending, ties by id)
// into at most j contiguous bins; the first (n mod j) bins carry the extra
// element. Empty selection yields an empty sequence.
BinSequence make_bins(const std::vector<SampleId>& selected, const DatasetStore& store, std::size_t j);

struct BudgetExhausted : std::runtime_error {
  BudgetExhausted() : std::runtime_error("oracle budget exhausted") {}
};

// Ground-truth oracle: answers with the true label and counts how often the
// given label actually needed fixing (wrong class, or box IoU below 0.5).
class Oracle {
 public:
  explicit Oracle(std::optional<std::uint64_t> budget = {}) : budget_(budget) {}

  bool can_inspect() const { return !budget_ || inspections_ < *budget_; }

  GivenLabel inspect(const Sample& s);

  std::uint64_t inspections() const { return inspections_; }
  std::uint64_t corrections() const { return corrections_; }
  std::optional<std::uint64_t> budget() const { return budget_; }

  void restore(std::uint64_t inspections, std::uint64_t corrections);

 private:
  std::optional<std::uint64_t> budget_;
  std::uint64_t inspections_ = 0;
  std::uint64_t corrections_ = 0;
};

GivenLabel oracle_inspect(Oracle& oracle, const Sample& s);

struct CurveRow {
  int phase = 0;
  int bin_index = 0;         // iteration within the phase, 1-based; 0 for the initial-training row
  int candidate_bin_id = 0;  // chosen bin, 1-based within the phase; 0 for the initial row
  bool accepted = false;
  double acc_before = 0.0;
  double acc_after = 0.0;
  std::uint64_t oracle_inspections = 0;  // cumulative
  std::uint64_t oracle_corrections = 0;  // cumulative
  std::size_t d_well_size = 0;
  std::size_t d_tentative_size = 0;
  std::int64_t wall_time_ms = 0;
};

using LearningCurve = std::vector<CurveRow>;

enum class Strategy { collaborative, uncertainty_only, random, ssl_only };
enum class CorrectedBinPolicy { merge, retry_once, discard };
enum class RunStatus { complete, budget_exhausted };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);
const char* corrected_bin_name(CorrectedBinPolicy p);
CorrectedBinPolicy corrected_bin_from_name(const std::string& name);

struct LoopConfig {
  int phases = 2;            // P
  std::size_t bins = 10;     // j
  std::size_t pool = 100;    // B, batch pool drawn per phase in stream order
  int bin_epochs = 50;       // warm-start epochs per candidate bin
  int initial_epochs = 200;  // Step-1 training and per-phase retraining
  double eps_phase = 0.001;  // stop when the phase-over-phase gain drops below
  CorrectedBinPolicy corrected_bin = CorrectedBinPolicy::merge;
  Strategy strategy = Strategy::collaborative;

  void validate() const;
};

using EvalFn = std::function<double(const DetectorModel&)>;

struct BinCycleResult {
  DetectorModel model;
  DatasetStore store;
  std::vector<CurveRow> rows;
  RunStatus status = RunStatus::complete;
  double acc = 0.0;  // accuracy backing the last gate decision
};

// One pass of Step 6: while bins are pending, train a warm-started candidate
// per pending bin on d_well plus that bin, adopt the best one if it does not
// lose accuracy, otherwise have the oracle fix the chosen bin. Exactly one
// bin is consumed per iteration (retry_once keeps a corrected bin pending
// once). With the oracle disabled, rejected bins are discarded.
BinCycleResult bin_cycle(DetectorModel model, BinSequence bins, DatasetStore store, Oracle& oracle,
                         const EvalFn& eval_fn, const OptimizerConfig& opt, const LoopConfig& cfg,
                         int phase, double acc_current, bool oracle_enabled);

struct IasslConfig {
  SamplingParams params;
  ConfidenceRule confidence_rule = ConfidenceRule::max_min;
  OptimizerConfig opt;
  LoopConfig loop;
  EvalConfig eval;
  std::optional<std::uint64_t> oracle_budget;
  int num_classes = 0;
  std::uint64_t seed = 0;
};

// Everything needed to continue a run from a phase boundary.
struct RunState {
  int phase_done = 0;
  std::vector<SampleId> stream_rest;  // tentative samples not yet drawn into a pool
  DetectorModel model;
  DetectorModel initial_model;  // the Step-1 model, kept for improvement metrics
  DatasetStore store;
  std::uint64_t oracle_inspections = 0;
  std::uint64_t oracle_corrections = 0;
  LearningCurve curve;
  std::vector<nlohmann::json> audits;
  double prev_phase_acc = 0.0;
  double acc_current = 0.0;
  bool stopped = false;  // an early-stop rule already fired
};

struct RunResult {
  DetectorModel model;
  DetectorModel initial_model;
  DatasetStore store;
  LearningCurve curve;
  RunStatus status = RunStatus::complete;
  std::vector<nlohmann::json> audits;
  std::uint64_t oracle_inspections = 0;
  std::uint64_t oracle_corrections = 0;
};

using PhaseCallback = std::function<void(const RunState&)>;

// Algorithm: initial training on d_well, then per phase draw the next B
// tentative samples in stream order, run collaborative sampling and
// pseudo-labeling, consume the bins, and retrain on the grown d_well.
RunResult run_iassl(DatasetStore store, const IasslConfig& cfg, const PhaseCallback& on_phase = {});

// Continues from a phase boundary; bit-identical to the uninterrupted run.
RunResult resume_iassl(RunState state, const IasslConfig& cfg, const PhaseCallback& on_phase = {});

}  // namespace iassl
