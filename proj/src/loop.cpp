#include "iassl/loop.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "iassl/rng.hpp"

namespace iassl {

std::size_t BinSequence::pending_count() const {
  return static_cast<std::size_t>(std::count(status.begin(), status.end(), BinStatus::pending));
}

BinSequence make_bins(const std::vector<SampleId>& selected, const DatasetStore& store, std::size_t j) {
  if (j == 0) throw std::invalid_argument("make_bins: j must be >= 1");
  BinSequence seq;
  seq.j = j;
  if (selected.empty()) return seq;

  std::vector<std::pair<double, SampleId>> ranked;
  ranked.reserve(selected.size());
  for (SampleId id : selected) {
    const Sample& s = store.at(id);
    if (!s.pseudo_score || !s.given_label || s.given_label->provenance != Provenance::pseudo)
      throw std::invalid_argument("make_bins: sample " + std::to_string(id) + " is not pseudo-labeled");
    ranked.emplace_back(*s.pseudo_score, id);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  const std::size_t n = ranked.size();
  const std::size_t q = n / j;
  const std::size_t r = n % j;
  std::size_t at = 0;
  for (std::size_t b = 0; b < j && at < n; ++b) {
    const std::size_t len = q + (b < r ? 1 : 0);
    if (len == 0) break;
    std::vector<SampleId> bin;
    bin.reserve(len);
    for (std::size_t i = 0; i < len; ++i) bin.push_back(ranked[at++].second);
    seq.bins.push_back(std::move(bin));
    seq.status.push_back(BinStatus::pending);
  }
  return seq;
}

GivenLabel Oracle::inspect(const Sample& s) {
  if (!can_inspect()) throw BudgetExhausted();
  if (!s.has_truth()) throw std::logic_error("oracle: sample has no ground truth");
  const ObjectLabel& truth = *s.truth(TruthKey{});
  ++inspections_;
  const bool wrong = !s.given_label || s.given_label->cls != truth.cls ||
                     iou(s.given_label->box, truth.box) < 0.5;
  if (wrong) ++corrections_;
  return GivenLabel{truth.cls, truth.box, Provenance::oracle};
}

void Oracle::restore(std::uint64_t inspections, std::uint64_t corrections) {
  if (corrections > inspections) throw std::invalid_argument("oracle: corrections exceed inspections");
  inspections_ = inspections;
  corrections_ = corrections;
}

GivenLabel oracle_inspect(Oracle& oracle, const Sample& s) { return oracle.inspect(s); }

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::collaborative: return "collaborative";
    case Strategy::uncertainty_only: return "uncertainty_only";
    case Strategy::random: return "random";
    case Strategy::ssl_only: return "ssl_only";
  }
  return "?";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "collaborative") return Strategy::collaborative;
  if (name == "uncertainty_only") return Strategy::uncertainty_only;
  if (name == "random") return Strategy::random;
  if (name == "ssl_only") return Strategy::ssl_only;
  throw std::invalid_argument("unknown strategy: " + name);
}

const char* corrected_bin_name(CorrectedBinPolicy p) {
  switch (p) {
    case CorrectedBinPolicy::merge: return "merge";
    case CorrectedBinPolicy::retry_once: return "retry_once";
    case CorrectedBinPolicy::discard: return "discard";
  }
  return "?";
}

CorrectedBinPolicy corrected_bin_from_name(const std::string& name) {
  if (name == "merge") return CorrectedBinPolicy::merge;
  if (name == "retry_once") return CorrectedBinPolicy::retry_once;
  if (name == "discard") return CorrectedBinPolicy::discard;
  throw std::invalid_argument("unknown corrected_bin policy: " + name);
}

void LoopConfig::validate() const {
  if (phases < 1) throw std::invalid_argument("LoopConfig: phases must be >= 1");
  if (bins == 0) throw std::invalid_argument("LoopConfig: bins must be >= 1");
  if (pool == 0) throw std::invalid_argument("LoopConfig: pool must be >= 1");
  if (bin_epochs < 1 || initial_epochs < 1)
    throw std::invalid_argument("LoopConfig: epochs must be >= 1");
  if (eps_phase < 0.0) throw std::invalid_argument("LoopConfig: eps_phase must be >= 0");
}

BinCycleResult bin_cycle(DetectorModel model, BinSequence bins, DatasetStore store, Oracle& oracle,
                         const EvalFn& eval_fn, const OptimizerConfig& opt, const LoopConfig& cfg,
                         int phase, double acc_current, bool oracle_enabled) {
  BinCycleResult out;
  std::vector<bool> corrected_once(bins.bins.size(), false);

  int iteration = 0;
  while (bins.pending_count() > 0) {
    ++iteration;

    // one warm-started candidate per pending bin
    int best = -1;
    double best_acc = 0.0;
    DetectorModel best_model;
    for (std::size_t b = 0; b < bins.bins.size(); ++b) {
      if (bins.status[b] != BinStatus::pending) continue;
      std::vector<SampleId> train_ids = store.ids(Partition::well);
      train_ids.insert(train_ids.end(), bins.bins[b].begin(), bins.bins[b].end());
      DetectorModel cand = train(model, train_ids, store, opt, cfg.bin_epochs);
      const double acc = eval_fn(cand);
      if (best < 0 || acc > best_acc) {
        best = static_cast<int>(b);
        best_acc = acc;
        best_model = std::move(cand);
      }
    }

    CurveRow row;
    row.phase = phase;
    row.bin_index = iteration;
    row.candidate_bin_id = best + 1;
    row.acc_before = acc_current;

    if (best_acc >= acc_current) {
      bins.status[best] = BinStatus::accepted;
      store.move(bins.bins[best], Partition::tentative, Partition::well);
      model = std::move(best_model);
      acc_current = best_acc;
      row.accepted = true;
    } else if (!oracle_enabled) {
      bins.status[best] = BinStatus::discarded;
      row.accepted = false;
    } else if (cfg.corrected_bin == CorrectedBinPolicy::retry_once && corrected_once[best]) {
      // already oracle-verified; second rejection merges it as-is
      bins.status[best] = BinStatus::corrected;
      store.move(bins.bins[best], Partition::tentative, Partition::well);
      row.accepted = false;
    } else {
      for (SampleId id : bins.bins[best]) {
        if (!oracle.can_inspect()) {
          out.model = std::move(model);
          out.store = std::move(store);
          out.status = RunStatus::budget_exhausted;
          out.acc = acc_current;
          return out;
        }
        Sample& s = store.at_mut(id);
        s.given_label = oracle.inspect(s);
        s.pseudo_score.reset();
      }
      switch (cfg.corrected_bin) {
        case CorrectedBinPolicy::merge:
          bins.status[best] = BinStatus::corrected;
          store.move(bins.bins[best], Partition::tentative, Partition::well);
          break;
        case CorrectedBinPolicy::discard:
          bins.status[best] = BinStatus::discarded;
          break;
        case CorrectedBinPolicy::retry_once:
          corrected_once[best] = true;  // stays pending with verified labels
          break;
      }
      row.accepted = false;
    }

    row.acc_after = acc_current;
    row.oracle_inspections = oracle.inspections();
    row.oracle_corrections = oracle.corrections();
    row.d_well_size = store.ids(Partition::well).size();
    row.d_tentative_size = store.ids(Partition::tentative).size();
    out.rows.push_back(row);
  }

  out.model = std::move(model);
  out.store = std::move(store);
  out.acc = acc_current;
  return out;
}

namespace {

// Validation set frozen at run start; evaluating a model must not depend on
// the evolving store.
struct FrozenEval {
  std::vector<std::pair<SampleId, std::vector<double>>> features;
  std::vector<TruthRecord> truths;
  std::vector<ClassId> classes;
  EvalConfig cfg;

  static FrozenEval snapshot(const DatasetStore& store, Partition part, const EvalConfig& cfg) {
    FrozenEval fe;
    fe.cfg = cfg;
    Evaluator ev(cfg);
    fe.truths = ev.truths_of(store, part);
    std::set<ClassId> present;
    for (const auto& t : fe.truths) present.insert(t.cls);
    fe.classes.assign(present.begin(), present.end());
    for (SampleId id : store.ids(part)) fe.features.emplace_back(id, store.at(id).features);
    return fe;
  }

  double operator()(const DetectorModel& model) const {
    std::vector<DetectionRecord> dets;
    dets.reserve(features.size());
    for (const auto& [id, f] : features) {
      const DetectionScore d = score(model, f);
      dets.push_back({id, d.top_class, d.f_x, d.box});
    }
    return mean_ap(dets, truths, classes, cfg.variant, cfg.iou_thresh);
  }
};

BatchSelection select_for_strategy(const DetectorModel& model, const std::vector<SampleId>& pool,
                                   const DatasetStore& store, const IasslConfig& cfg, int phase) {
  const std::uint64_t stage_seed = Rng(cfg.seed).derive(0x73616d70ULL, static_cast<std::uint64_t>(phase)).seed();
  switch (cfg.loop.strategy) {
    case Strategy::collaborative:
    case Strategy::ssl_only:
      return select_batch(model, pool, store, cfg.params, cfg.confidence_rule, stage_seed);
    case Strategy::uncertainty_only: {
      const SelectionCounts counts = resolve_counts(cfg.params, pool.size());
      BatchSelection sel;
      sel.pool_ids = pool;
      sel.uncertain_ids = uncertainty_select(model, pool, store, counts.uncertain);
      for (SampleId id : sel.uncertain_ids)
        sel.uncertainty_scores.push_back(1.0 - score(model, store.at(id).features).margin);
      sel.diversity_ids = sel.uncertain_ids;
      const std::size_t take = std::min(counts.confident, sel.diversity_ids.size());
      sel.selected_ids.assign(sel.diversity_ids.begin(), sel.diversity_ids.begin() + take);
      for (SampleId id : sel.selected_ids)
        sel.confidence_scores.push_back(score(model, store.at(id).features).f_x);
      return sel;
    }
    case Strategy::random: {
      const SelectionCounts counts = resolve_counts(cfg.params, pool.size());
      std::vector<SampleId> shuffled = pool;
      Rng rng = Rng(cfg.seed).derive(0x72616e64ULL, static_cast<std::uint64_t>(phase));
      rng.shuffle(shuffled);
      const std::size_t take = std::min(counts.confident, shuffled.size());
      BatchSelection sel;
      sel.pool_ids = pool;
      sel.selected_ids.assign(shuffled.begin(), shuffled.begin() + take);
      sel.uncertain_ids = sel.selected_ids;
      sel.diversity_ids = sel.selected_ids;
      for (SampleId id : sel.selected_ids)
        sel.confidence_scores.push_back(score(model, store.at(id).features).f_x);
      return sel;
    }
  }
  throw std::logic_error("select_for_strategy: unreachable");
}

RunResult run_phases(RunState state, const IasslConfig& cfg, const PhaseCallback& on_phase,
                     Oracle& oracle, const FrozenEval& eval_fn) {
  const bool oracle_enabled = cfg.loop.strategy != Strategy::ssl_only;

  RunStatus status = RunStatus::complete;
  for (int phase = state.phase_done + 1; phase <= cfg.loop.phases && !state.stopped; ++phase) {
    const std::size_t take = std::min(cfg.loop.pool, state.stream_rest.size());
    const std::vector<SampleId> pool(state.stream_rest.begin(), state.stream_rest.begin() + take);
    state.stream_rest.erase(state.stream_rest.begin(), state.stream_rest.begin() + take);
    if (pool.empty()) break;  // tentative stream exhausted

    BatchSelection sel = select_for_strategy(state.model, pool, state.store, cfg, phase);
    nlohmann::json audit;
    audit["phase"] = phase;
    audit["params"] = {cfg.params.uncertainty, cfg.params.diversity, cfg.params.confidence};
    audit["strategy"] = strategy_name(cfg.loop.strategy);
    audit["stages"] = sel.audit();
    state.audits.push_back(std::move(audit));

    state.store = pseudo_label(state.model, sel.selected_ids, std::move(state.store));
    BinSequence bins = make_bins(sel.selected_ids, state.store, cfg.loop.bins);

    BinCycleResult cyc = bin_cycle(std::move(state.model), std::move(bins), std::move(state.store), oracle,
                                   std::cref(eval_fn), cfg.opt, cfg.loop, phase, state.acc_current,
                                   oracle_enabled);
    state.model = std::move(cyc.model);
    state.store = std::move(cyc.store);
    state.acc_current = cyc.acc;
    for (const auto& row : cyc.rows) state.curve.push_back(row);
    if (cyc.status == RunStatus::budget_exhausted) {
      status = cyc.status;
      break;
    }

    // Step 7: retrain on the expanded well set
    state.model = train(state.model, state.store.ids(Partition::well), state.store, cfg.opt,
                        cfg.loop.initial_epochs);
    state.acc_current = eval_fn(state.model);

    const double gain = state.acc_current - state.prev_phase_acc;
    state.prev_phase_acc = state.acc_current;
    state.phase_done = phase;
    state.oracle_inspections = oracle.inspections();
    state.oracle_corrections = oracle.corrections();
    if (gain < cfg.loop.eps_phase) state.stopped = true;
    if (on_phase) on_phase(state);
  }

  RunResult out;
  out.model = std::move(state.model);
  out.initial_model = std::move(state.initial_model);
  out.store = std::move(state.store);
  out.curve = std::move(state.curve);
  out.audits = std::move(state.audits);
  out.status = status;
  out.oracle_inspections = oracle.inspections();
  out.oracle_corrections = oracle.corrections();
  return out;
}

}  // namespace

RunResult run_iassl(DatasetStore store, const IasslConfig& cfg, const PhaseCallback& on_phase) {
  cfg.loop.validate();
  cfg.opt.validate();
  cfg.params.validate();
  if (cfg.num_classes < 2) throw std::invalid_argument("run_iassl: num_classes must be >= 2");
  if (store.ids(Partition::well).empty()) throw std::invalid_argument("run_iassl: empty well set");
  if (store.ids(Partition::validation).empty())
    throw std::invalid_argument("run_iassl: empty validation set");

  const int dim = static_cast<int>(store.samples().begin()->second.features.size());
  const FrozenEval eval_fn = FrozenEval::snapshot(store, Partition::validation, cfg.eval);

  RunState state;
  state.model = DetectorModel::zeros(cfg.num_classes, dim);
  const double acc0 = eval_fn(state.model);

  state.model = train(state.model, store.ids(Partition::well), store, cfg.opt, cfg.loop.initial_epochs);
  state.initial_model = state.model;
  state.acc_current = eval_fn(state.model);
  state.prev_phase_acc = state.acc_current;

  CurveRow row;
  row.phase = 0;
  row.accepted = true;
  row.acc_before = acc0;
  row.acc_after = state.acc_current;
  row.d_well_size = store.ids(Partition::well).size();
  row.d_tentative_size = store.ids(Partition::tentative).size();
  state.curve.push_back(row);

  state.stream_rest = store.ids(Partition::tentative);
  state.store = std::move(store);

  Oracle oracle(cfg.oracle_budget);
  return run_phases(std::move(state), cfg, on_phase, oracle, eval_fn);
}

RunResult resume_iassl(RunState state, const IasslConfig& cfg, const PhaseCallback& on_phase) {
  cfg.loop.validate();
  const FrozenEval eval_fn = FrozenEval::snapshot(state.store, Partition::validation, cfg.eval);
  Oracle oracle(cfg.oracle_budget);
  oracle.restore(state.oracle_inspections, state.oracle_corrections);
  return run_phases(std::move(state), cfg, on_phase, oracle, eval_fn);
}

}  // namespace iassl
