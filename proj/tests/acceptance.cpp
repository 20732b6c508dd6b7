// Acceptance suite: executes every acceptance criterion end to end and
// prints one PASS/FAIL line per criterion. Exit code is the number of
// failed criteria.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "iassl/config.hpp"
#include "iassl/rng.hpp"
#include "iassl/serialize.hpp"

using namespace iassl;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s: %s (%s)\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

RunConfig benchmark_config() {
  return load_run_config(std::string(IASSL_CONFIG_DIR) + "/benchmark.json");
}

struct BenchRun {
  double initial_map = 0.0;
  double final_map = 0.0;
  LearningCurve curve;
  std::uint64_t inspections = 0;
  std::uint64_t corrections = 0;
  double seconds = 0.0;
};

BenchRun run_benchmark(std::uint64_t seed, Strategy strategy, double label_noise) {
  RunConfig cfg = benchmark_config();
  override_seed(cfg, seed);
  cfg.loop.strategy = strategy;
  cfg.data.generate->label_noise = label_noise;

  const auto t0 = std::chrono::steady_clock::now();
  DatasetStore store = generate(*cfg.data.generate);
  const IasslConfig icfg = to_iassl_config(cfg, static_cast<int>(cfg.data.generate->classes.size()));
  const RunResult res = run_iassl(std::move(store), icfg);

  BenchRun out;
  const Evaluator ev(cfg.eval);
  out.initial_map = ev.map_on(res.initial_model, res.store, Partition::test);
  out.final_map = ev.map_on(res.model, res.store, Partition::test);
  out.curve = res.curve;
  out.inspections = res.oracle_inspections;
  out.corrections = res.oracle_corrections;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

template <class Job, class Fn>
void parallel_for(std::vector<Job>& jobs, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      fn(jobs[i]);
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), jobs.size()));
  std::vector<std::thread> threads;
  for (unsigned t = 0; t < n; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// the exact accounting identity, verified on every executed run
bool accounting_ok(const BenchRun& r, std::string& why) {
  std::uint64_t rejected_mass = 0;
  for (std::size_t i = 1; i < r.curve.size(); ++i)
    if (!r.curve[i].accepted) rejected_mass += r.curve[i].d_well_size - r.curve[i - 1].d_well_size;
  if (r.inspections != rejected_mass) {
    why = "inspections " + std::to_string(r.inspections) + " != rejected-bin mass " +
          std::to_string(rejected_mass);
    return false;
  }
  if (r.corrections > r.inspections) {
    why = "corrections exceed inspections";
    return false;
  }
  return true;
}

// ---- criterion 5 helper: independent AP sweep ----------------------------

double brute_force_ap(const std::vector<bool>& flags, std::size_t n_truth, ApVariant variant) {
  std::vector<double> rec, pre;
  double tp = 0, fp = 0;
  for (bool f : flags) {
    f ? ++tp : ++fp;
    rec.push_back(tp / double(n_truth));
    pre.push_back(tp / (tp + fp));
  }
  if (variant == ApVariant::elevenpoint) {
    double total = 0;
    for (int k = 0; k <= 10; ++k) {
      double best = 0;
      for (std::size_t i = 0; i < rec.size(); ++i)
        if (rec[i] >= k / 10.0 - 1e-12) best = std::max(best, pre[i]);
      total += best;
    }
    return total / 11.0;
  }
  double ap = 0, prev_r = 0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    if (rec[i] <= prev_r) continue;
    double envelope = 0;
    for (std::size_t j = i; j < rec.size(); ++j) envelope = std::max(envelope, pre[j]);
    ap += (rec[i] - prev_r) * envelope;
    prev_r = rec[i];
  }
  return ap;
}

// ---- criterion 7 helper: independent greedy ------------------------------

std::vector<SampleId> naive_confidence(const DetectorModel& model, std::vector<SampleId> ids,
                                       const DatasetStore& store, std::size_t gamma,
                                       ConfidenceRule rule) {
  std::sort(ids.begin(), ids.end());
  SampleId top = ids.front();
  double best_f = -1;
  for (SampleId id : ids) {
    const double f = score(model, store.at(id).features).f_x;
    if (f > best_f) {
      best_f = f;
      top = id;
    }
  }
  std::vector<SampleId> sel{top};
  while (sel.size() < gamma) {
    SampleId pick = -1;
    double pick_v = rule == ConfidenceRule::max_min ? -1 : 1e300;
    for (SampleId id : ids) {
      if (std::find(sel.begin(), sel.end(), id) != sel.end()) continue;
      double nearest = 1e300;
      for (SampleId s : sel)
        nearest = std::min(nearest, distance(store.at(id).features, store.at(s).features));
      if (rule == ConfidenceRule::max_min ? nearest > pick_v : nearest < pick_v) {
        pick_v = nearest;
        pick = id;
      }
    }
    sel.push_back(pick);
  }
  return sel;
}

constexpr int kSeeds = 10;

struct StrategyStats {
  std::vector<BenchRun> runs{std::vector<BenchRun>(kSeeds)};
  double mean_final() const {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.final_map);
    return mean_of(v);
  }
  double mean_improvement() const {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.final_map - r.initial_map);
    return mean_of(v);
  }
  double total_seconds() const {
    double s = 0;
    for (const auto& r : runs) s += r.seconds;
    return s;
  }
};

}  // namespace

int main() {
  std::map<Strategy, StrategyStats> stats;
  std::vector<BenchRun> noisy_runs(kSeeds);

  {
    struct Job {
      Strategy st;
      int seed;
      double noise;
      BenchRun* slot;
    };
    std::vector<Job> jobs;
    for (Strategy st :
         {Strategy::collaborative, Strategy::uncertainty_only, Strategy::random, Strategy::ssl_only})
      for (int s = 1; s <= kSeeds; ++s) jobs.push_back({st, s, 0.2, &stats[st].runs[s - 1]});
    for (int s = 1; s <= kSeeds; ++s)
      jobs.push_back({Strategy::collaborative, s, 0.3, &noisy_runs[s - 1]});
    parallel_for(jobs, [](Job& j) { *j.slot = run_benchmark(j.seed, j.st, j.noise); });
  }

  // 1. ordering property (collaborative > uncertainty_only > random)
  {
    const double collab = stats[Strategy::collaborative].mean_final();
    const double unc = stats[Strategy::uncertainty_only].mean_final();
    const double rnd = stats[Strategy::random].mean_final();
    const double core_seconds = stats[Strategy::collaborative].total_seconds() +
                                stats[Strategy::uncertainty_only].total_seconds() +
                                stats[Strategy::random].total_seconds();
    const bool ordered = collab > unc && unc > rnd;
    const bool margin = collab - rnd >= 0.02;
    const bool fast = core_seconds <= 600.0;
    report("ordering collaborative > uncertainty_only > random", ordered && margin && fast,
           "mean mAP " + fmt(collab) + " / " + fmt(unc) + " / " + fmt(rnd) + ", margin " +
               fmt(collab - rnd) + " >= 0.02, " + fmt(core_seconds) + "s core time");
  }

  // 2. ASSL-vs-SSL property at (0.5, 0.5, 0.5)
  {
    const double assl = stats[Strategy::collaborative].mean_improvement();
    const double ssl = stats[Strategy::ssl_only].mean_improvement();
    report("collaborative improves more than ssl_only", assl > ssl,
           "mean improvement " + fmt(assl) + " vs " + fmt(ssl));
  }

  // 3. noisy-label recovery at label_noise = 0.3
  {
    std::vector<double> after_bin1, end_phase1;
    std::size_t max_rows = 0;
    for (const auto& r : noisy_runs) max_rows = std::max(max_rows, r.curve.size());
    std::vector<double> med_curve;
    for (std::size_t i = 0; i < max_rows; ++i) {
      std::vector<double> col;
      for (const auto& r : noisy_runs)
        if (i < r.curve.size()) col.push_back(r.curve[i].acc_after);
      med_curve.push_back(median_of(col));
    }
    for (const auto& r : noisy_runs) {
      double ab1 = 0, ep1 = 0;
      bool seen = false;
      for (const auto& row : r.curve) {
        if (row.phase != 1) continue;
        if (!seen) {
          ab1 = row.acc_after;
          seen = true;
        }
        ep1 = row.acc_after;
      }
      after_bin1.push_back(ab1);
      end_phase1.push_back(ep1);
    }
    const double m_ab1 = median_of(after_bin1);
    const double m_ep1 = median_of(end_phase1);
    const double recovery = med_curve.back() - *std::min_element(med_curve.begin(), med_curve.end());
    const bool pass = m_ep1 > m_ab1 && recovery >= 0.01;
    report("noisy-label recovery within phase 1", pass,
           "median end-of-phase1 " + fmt(m_ep1) + " > after-bin1 " + fmt(m_ab1) +
               ", final-minus-min " + fmt(recovery) + " >= 0.01");
  }

  // 4. oracle accounting identity on every run executed above
  {
    bool ok = true;
    std::string why = "exact on all runs";
    std::size_t checked = 0;
    for (const auto& [st, ss] : stats)
      for (const auto& r : ss.runs) {
        ++checked;
        if (!accounting_ok(r, why)) ok = false;
      }
    for (const auto& r : noisy_runs) {
      ++checked;
      if (!accounting_ok(r, why)) ok = false;
    }
    report("oracle accounting identity", ok, why + ", " + std::to_string(checked) + " runs");
  }

  // 5. AP oracle equivalence
  {
    Rng rng(424242);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t n = 1 + rng.below(20);
      std::vector<bool> flags(n);
      std::size_t tps = 0;
      for (std::size_t i = 0; i < n; ++i) {
        flags[i] = rng.uniform01() < 0.5;
        tps += flags[i];
      }
      const std::size_t n_truth = std::max<std::size_t>(1, tps + rng.below(4));
      for (ApVariant v : {ApVariant::elevenpoint, ApVariant::allpoint})
        worst = std::max(worst, std::abs(average_precision(flags, n_truth, v) -
                                         brute_force_ap(flags, n_truth, v)));
    }
    const double hand = average_precision({true, false, true}, 2, ApVariant::elevenpoint);
    const bool pass = worst <= 1e-12 && std::abs(hand - 28.0 / 33.0) <= 1e-12;
    report("average precision equals the brute-force sweep", pass,
           "worst deviation " + std::to_string(worst) + " over 1000 instances, hand case " +
               fmt(hand) + " = 28/33");
  }

  // 6. optimizer checks
  {
    bool pass = true;
    std::string detail;

    Rng rng(99);
    double worst_rel = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
      const int C = 3, d = 4;
      DetectorModel model = DetectorModel::zeros(C, d);
      for (double& w : model.weights) w = 0.5 * rng.normal();
      for (double& w : model.loc_weights) w = 0.2 * rng.normal();
      DatasetStore store;
      std::vector<SampleId> ids;
      for (SampleId id = 0; id < 5; ++id) {
        std::vector<double> f(d);
        for (double& v : f) v = rng.normal();
        store.insert(Sample(id, std::move(f), {},
                            GivenLabel{ClassId(rng.below(C)), {0.2, 0.2, 0.3, 0.3},
                                       Provenance::initial}),
                     Partition::well);
        ids.push_back(id);
      }
      const LossGrad lg = batch_loss_grad(model, ids, store);
      for (std::size_t k = 0; k < lg.grad.size(); ++k) {
        auto at = [&](double eps) {
          DetectorModel m = model;
          if (k < m.weights.size())
            m.weights[k] += eps;
          else
            m.loc_weights[k - m.weights.size()] += eps;
          return batch_loss_grad(m, ids, store).loss;
        };
        const double numeric = (at(1e-5) - at(-1e-5)) / 2e-5;
        worst_rel = std::max(worst_rel,
                             std::abs(lg.grad[k] - numeric) / std::max(std::abs(numeric), 1e-6));
      }
    }
    if (worst_rel > 1e-4) pass = false;
    detail += "grad rel err " + std::to_string(worst_rel);

    OptimizerConfig ocfg;
    ocfg.lr = 0.001;
    const auto up =
        adam_step(AdamState::zeros(1), std::vector<double>{0.0}, std::vector<double>{1.0}, ocfg);
    if (std::abs(up.params[0] - (-ocfg.lr / (1.0 + ocfg.eps))) > 1e-12) pass = false;
    detail += ", adam first step " + std::to_string(up.params[0]);

    std::vector<BcdBlock> blocks(2);
    blocks[0].params = {1.0};
    blocks[0].minimize = [](const BlockParams& p, std::size_t) {
      return std::vector<double>{p[1][0] / 2.0};
    };
    blocks[1].params = {1.0};
    blocks[1].minimize = [](const BlockParams& p, std::size_t) {
      return std::vector<double>{p[0][0] / 2.0};
    };
    BcdConfig bcfg;
    bcfg.tol = 1e-15;
    const BcdResult res = bcd_minimize(
        blocks,
        [](const BlockParams& p) {
          const double t1 = p[0][0], t2 = p[1][0];
          return (t1 - t2) * (t1 - t2) + t1 * t1 + t2 * t2;
        },
        bcfg);
    for (std::size_t i = 1; i < res.trace.size(); ++i)
      if (res.trace[i] > res.trace[i - 1]) pass = false;
    if (std::abs(res.params[0][0]) > 1e-6 || std::abs(res.params[1][0]) > 1e-6) pass = false;
    detail += ", bcd final |theta| " +
              std::to_string(std::max(std::abs(res.params[0][0]), std::abs(res.params[1][0])));
    report("optimizer checks (gradient, adam step, bcd)", pass, detail);
  }

  // 7. sampling oracles
  {
    bool pass = true;
    Rng rng(31337);
    for (int trial = 0; trial < 200 && pass; ++trial) {
      const std::size_t n = 2 + rng.below(63);
      DatasetStore store;
      std::vector<SampleId> ids;
      for (std::size_t i = 0; i < n; ++i) {
        store.insert(Sample(SampleId(i), {rng.normal(), rng.normal(), rng.normal()}),
                     Partition::tentative);
        ids.push_back(SampleId(i));
      }
      DetectorModel m = DetectorModel::zeros(3, 3);
      for (double& w : m.weights) w = rng.normal();
      const std::size_t gamma = 1 + rng.below(n);
      const ConfidenceRule rule = trial % 2 ? ConfidenceRule::max_min : ConfidenceRule::most_similar;
      if (confidence_select(m, ids, store, gamma, rule) !=
          naive_confidence(m, ids, store, gamma, rule))
        pass = false;
    }

    const std::vector<std::vector<double>> pts{{0, 0}, {0, 1}, {10, 0}, {10, 1}};
    const KmeansResult km = kmeans(pts, 2, 0);
    auto sse_of = [&](const std::vector<std::size_t>& assign) {
      std::vector<std::vector<double>> c(2, std::vector<double>(2, 0.0));
      std::vector<std::size_t> cnt(2, 0);
      for (std::size_t i = 0; i < 4; ++i) {
        c[assign[i]][0] += pts[i][0];
        c[assign[i]][1] += pts[i][1];
        ++cnt[assign[i]];
      }
      for (int k = 0; k < 2; ++k)
        if (cnt[k]) {
          c[k][0] /= cnt[k];
          c[k][1] /= cnt[k];
        }
      double sse = 0;
      for (std::size_t i = 0; i < 4; ++i) {
        const double dx = pts[i][0] - c[assign[i]][0], dy = pts[i][1] - c[assign[i]][1];
        sse += dx * dx + dy * dy;
      }
      return sse;
    };
    double best = 1e300;
    for (int mask = 0; mask < 16; ++mask) {
      std::vector<std::size_t> assign(4);
      for (int i = 0; i < 4; ++i) assign[i] = (mask >> i) & 1;
      best = std::min(best, sse_of(assign));
    }
    if (std::abs(sse_of(km.assignments) - best) > 1e-12) pass = false;
    report("sampling oracles (greedy id-for-id, k-means SSE-optimal)", pass,
           "200 pools <= 64, exhaustive 2-partition check");
  }

  // 8. CLI determinism and checkpoint resume
  {
    bool pass = true;
    std::string detail;
    const fs::path work = fs::temp_directory_path() / "iassl_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string cli = IASSL_CLI_PATH;
    const std::string cfg_path = std::string(IASSL_CONFIG_DIR) + "/toy.json";

    auto run_cli = [&](const std::string& args) {
      const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
      return std::system(cmd.c_str());
    };
    auto find_file = [&](const fs::path& dir, const std::string& prefix) -> fs::path {
      for (const auto& e : fs::directory_iterator(dir))
        if (e.path().filename().string().starts_with(prefix)) return e.path();
      return {};
    };

    pass = pass && run_cli("run --config " + cfg_path + " --out " + (work / "a").string()) == 0;
    pass = pass && run_cli("run --config " + cfg_path + " --out " + (work / "b").string()) == 0;
    if (pass) {
      const fs::path ca = find_file(work / "a", "curve-");
      const fs::path cb = find_file(work / "b", "curve-");
      pass = !ca.empty() && !cb.empty() && read_file(ca.string()) == read_file(cb.string());
      detail = "rerun byte-identical: " + std::string(pass ? "yes" : "no");

      const fs::path cp = find_file(work / "a", "checkpoint-");
      if (pass && !cp.empty()) {
        pass = run_cli("run --config " + cfg_path + " --resume " + cp.string() + " --out " +
                       (work / "c").string()) == 0;
        const fs::path cc = find_file(work / "c", "curve-");
        pass = pass && !cc.empty() && read_file(cc.string()) == read_file(ca.string());
        detail += ", resume byte-identical: " + std::string(pass ? "yes" : "no");
      } else if (cp.empty()) {
        pass = false;
        detail += ", no checkpoint written";
      }
    }
    report("cmd_run determinism and checkpoint resume", pass, detail);
  }

  // 9. Adam reaches the target training loss in fewer epochs than SGD
  {
    const double target = 0.5;
    const int cap = 800;
    struct Race {
      int seed;
      int adam = 0;
      int sgd = 0;
    };
    std::vector<Race> races;
    for (int s = 1; s <= kSeeds; ++s) races.push_back({s});
    parallel_for(races, [&](Race& race) {
      RunConfig cfg = benchmark_config();
      override_seed(cfg, race.seed);
      const DatasetStore store = generate(*cfg.data.generate);
      const auto& well = store.ids(Partition::well);
      for (int o = 0; o < 2; ++o) {
        OptimizerConfig opt;
        opt.kind = o == 0 ? OptKind::adam : OptKind::sgd;
        opt.lr = 0.001;
        opt.seed = race.seed;
        int needed = cap + 1;
        train(DetectorModel::zeros(8, 16), well, store, opt, cap, kDefaultLambdaLoc,
              [&](int epoch, double loss) {
                if (loss <= target) {
                  needed = epoch;
                  return false;
                }
                return true;
              });
        (o == 0 ? race.adam : race.sgd) = needed;
      }
    });
    int adam_wins = 0;
    for (const auto& r : races) adam_wins += r.adam < r.sgd;
    report("adam reaches target loss before sgd (majority vote)", adam_wins > kSeeds / 2,
           std::to_string(adam_wins) + "/" + std::to_string(kSeeds) + " seeds at lr 0.001, target " +
               fmt(target));
  }

  std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures;
}
