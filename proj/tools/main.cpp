// iassl command-line front end: generate / run / sweep / eval / report.
// Exit codes: 0 success, 2 config or usage error, 3 runtime halt with
// partial outputs.

#include <atomic>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "iassl/config.hpp"
#include "iassl/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitHalt = 3;

struct LoadedData {
  iassl::DatasetStore store;
  int num_classes = 0;
  json spec_descr;
};

LoadedData materialize_data(const iassl::RunConfig& cfg) {
  LoadedData out;
  if (cfg.data.generate) {
    out.store = iassl::generate(*cfg.data.generate);
    out.num_classes = static_cast<int>(cfg.data.generate->classes.size());
    out.spec_descr = iassl::genspec_to_json(*cfg.data.generate);
    return out;
  }
  if (cfg.data.dataset) {
    auto loaded = iassl::DatasetIo::dataset_from_json(json::parse(iassl::read_file(*cfg.data.dataset)));
    out.store = std::move(loaded.store);
    out.num_classes = loaded.num_classes;
    out.spec_descr = std::move(loaded.spec);
    return out;
  }
  const iassl::IngestConfig& ing = *cfg.data.ingest;
  std::vector<iassl::GroundTruthRecord> records;
  for (const auto& path : ing.annotations)
    records.push_back(iassl::parse_voc_xml(iassl::read_file(path)));
  const auto table = iassl::read_feature_csv_file(ing.features_csv);
  auto joined = iassl::join_features(records, table, ing.splits);
  out.store = std::move(joined.store);
  out.num_classes = static_cast<int>(joined.class_names.size());
  out.spec_descr = {{"source", "ingest"}, {"classes", joined.class_names}};
  return out;
}

std::string out_path(const std::string& dir, const std::string& stem, const std::string& hash,
                     const std::string& ext) {
  return (fs::path(dir) / (stem + "-" + hash + ext)).string();
}

json summarize_run(const iassl::RunConfig& cfg, const std::string& hash, const iassl::RunResult& res,
                   const iassl::DetectorModel& initial_model) {
  const iassl::Evaluator ev(cfg.eval);
  json s;
  s["config_hash"] = hash;
  s["seed"] = cfg.seed;
  s["strategy"] = iassl::strategy_name(cfg.loop.strategy);
  s["params"] = {cfg.sampling.uncertainty, cfg.sampling.diversity, cfg.sampling.confidence};
  s["status"] = res.status == iassl::RunStatus::complete ? "complete" : "budget_exhausted";
  s["oracle_inspections"] = res.oracle_inspections;
  s["oracle_corrections"] = res.oracle_corrections;
  s["initial_val_acc"] = res.curve.empty() ? 0.0 : res.curve.front().acc_after;
  s["final_val_acc"] = res.curve.empty() ? 0.0 : res.curve.back().acc_after;
  s["initial_test_map"] = ev.map_on(initial_model, res.store, iassl::Partition::test);
  s["final_test_map"] = ev.map_on(res.model, res.store, iassl::Partition::test);
  s["d_well_start"] = res.curve.empty() ? 0 : res.curve.front().d_well_size;
  s["d_well_end"] = res.curve.empty() ? 0 : res.curve.back().d_well_size;
  s["d_tentative_end"] = res.curve.empty() ? 0 : res.curve.back().d_tentative_size;
  s["rows"] = res.curve.size();
  return s;
}

int cmd_generate(const std::string& config_path, const std::string& out_file,
                 std::optional<std::uint64_t> seed) {
  iassl::RunConfig cfg = iassl::load_run_config(config_path);
  if (seed) iassl::override_seed(cfg, *seed);
  if (!cfg.data.generate) throw iassl::ConfigError("config: data.generate: required by the generate command");
  const std::string hash = iassl::config_hash(iassl::run_config_to_json(cfg));

  const LoadedData data = materialize_data(cfg);
  json j = iassl::DatasetIo::dataset_to_json(data.store, data.spec_descr, data.num_classes);
  j["config_hash"] = hash;
  iassl::write_file(out_file, j.dump(2) + "\n");
  std::cout << "wrote " << out_file << " (" << data.store.size() << " samples)\n";
  return kExitOk;
}

int run_one(iassl::RunConfig cfg, const std::string& out_dir, const std::string& resume_path) {
  const std::string hash = iassl::config_hash(iassl::run_config_to_json(cfg));
  fs::create_directories(out_dir);

  LoadedData data;
  iassl::RunResult res;
  iassl::DetectorModel initial_model;
  int num_classes = 0;

  const auto on_phase = [&](const iassl::RunState& st) {
    const json cp = iassl::run_state_to_json(st, hash, num_classes);
    iassl::write_file(out_path(out_dir, "checkpoint", hash, "-phase" + std::to_string(st.phase_done) + ".json"),
                      cp.dump() + "\n");
  };

  if (!resume_path.empty()) {
    auto loaded = iassl::run_state_from_json(json::parse(iassl::read_file(resume_path)));
    if (loaded.config_hash != hash)
      throw iassl::ConfigError("config: --resume: checkpoint hash " + loaded.config_hash +
                               " does not match config hash " + hash);
    num_classes = loaded.num_classes;
    const iassl::IasslConfig icfg = iassl::to_iassl_config(cfg, num_classes);
    res = iassl::resume_iassl(std::move(loaded.state), icfg, on_phase);
    initial_model = res.initial_model;
  } else {
    data = materialize_data(cfg);
    num_classes = data.num_classes;
    const iassl::IasslConfig icfg = iassl::to_iassl_config(cfg, num_classes);
    res = iassl::run_iassl(std::move(data.store), icfg, on_phase);
    initial_model = res.initial_model;
  }

  iassl::write_file(out_path(out_dir, "curve", hash, ".csv"), iassl::curve_to_csv(res.curve));
  iassl::write_file(out_path(out_dir, "model", hash, ".json"),
                    iassl::model_to_json(res.model).dump(2) + "\n");
  iassl::write_file(out_path(out_dir, "audit", hash, ".json"), json(res.audits).dump(2) + "\n");
  const json summary = summarize_run(cfg, hash, res, initial_model);
  iassl::write_file(out_path(out_dir, "summary", hash, ".json"), summary.dump(2) + "\n");

  std::cout << "run " << hash << ": " << summary["status"].get<std::string>()
            << " final_test_map=" << summary["final_test_map"].get<double>()
            << " oracle_inspections=" << res.oracle_inspections << "\n";
  return res.status == iassl::RunStatus::complete ? kExitOk : kExitHalt;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
            const std::string& resume_path) {
  iassl::RunConfig cfg = iassl::load_run_config(config_path);
  if (seed) iassl::override_seed(cfg, *seed);
  return run_one(std::move(cfg), out_dir, resume_path);
}

struct SweepGrid {
  std::vector<double> u, d, c;
  std::vector<iassl::Strategy> strategies;
  std::vector<std::uint64_t> seeds;
};

SweepGrid sweep_grid_from_config(const std::string& config_path) {
  json j;
  try {
    j = json::parse(iassl::read_file(config_path));
  } catch (const json::parse_error& e) {
    throw iassl::ConfigError(std::string("config: ") + e.what());
  }
  if (!j.contains("sweep")) throw iassl::ConfigError("config: sweep: section required by the sweep command");
  const json& s = j.at("sweep");
  SweepGrid g;
  try {
    g.u = s.at("u").get<std::vector<double>>();
    g.d = s.at("d").get<std::vector<double>>();
    g.c = s.at("c").get<std::vector<double>>();
    for (const auto& name : s.at("strategies"))
      g.strategies.push_back(iassl::strategy_from_name(name.get<std::string>()));
    g.seeds = s.at("seeds").get<std::vector<std::uint64_t>>();
  } catch (const json::exception& e) {
    throw iassl::ConfigError(std::string("config: sweep: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw iassl::ConfigError(std::string("config: sweep.strategies: ") + e.what());
  }
  if (g.u.empty() || g.d.empty() || g.c.empty() || g.strategies.empty() || g.seeds.empty())
    throw iassl::ConfigError("config: sweep: empty grid axis");
  return g;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, unsigned jobs) {
  const iassl::RunConfig base = iassl::load_run_config(config_path);
  const SweepGrid grid = sweep_grid_from_config(config_path);
  fs::create_directories(out_dir);

  struct Cell {
    iassl::RunConfig cfg;
    json summary;
  };
  std::vector<Cell> cells;
  for (double u : grid.u)
    for (double d : grid.d)
      for (double c : grid.c)
        for (iassl::Strategy st : grid.strategies)
          for (std::uint64_t seed : grid.seeds) {
            iassl::RunConfig cfg = base;
            cfg.sampling = {u, d, c};
            cfg.loop.strategy = st;
            iassl::override_seed(cfg, seed);
            cells.push_back({std::move(cfg), {}});
          }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      Cell& cell = cells[i];
      const std::string hash = iassl::config_hash(iassl::run_config_to_json(cell.cfg));
      LoadedData data = materialize_data(cell.cfg);
      const iassl::IasslConfig icfg = iassl::to_iassl_config(cell.cfg, data.num_classes);
      const iassl::RunResult res = iassl::run_iassl(std::move(data.store), icfg);
      cell.summary = summarize_run(cell.cfg, hash, res, res.initial_model);
    }
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(jobs, cells.size()));
  std::vector<std::thread> threads;
  for (unsigned t = 0; t < n_workers; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  // one row per cell, in grid order
  std::string csv =
      "u,d,c,strategy,seed,status,initial_val_acc,final_val_acc,initial_test_map,final_test_map,"
      "oracle_inspections,oracle_corrections,d_well_start,d_well_end,d_tentative_end,config_hash\n";
  for (const Cell& cell : cells) {
    const json& s = cell.summary;
    csv += iassl::format_double(cell.cfg.sampling.uncertainty) + ',' +
           iassl::format_double(cell.cfg.sampling.diversity) + ',' +
           iassl::format_double(cell.cfg.sampling.confidence) + ',' +
           std::string(iassl::strategy_name(cell.cfg.loop.strategy)) + ',' +
           std::to_string(cell.cfg.seed) + ',' + s["status"].get<std::string>() + ',' +
           iassl::format_double(s["initial_val_acc"].get<double>()) + ',' +
           iassl::format_double(s["final_val_acc"].get<double>()) + ',' +
           iassl::format_double(s["initial_test_map"].get<double>()) + ',' +
           iassl::format_double(s["final_test_map"].get<double>()) + ',' +
           std::to_string(s["oracle_inspections"].get<std::uint64_t>()) + ',' +
           std::to_string(s["oracle_corrections"].get<std::uint64_t>()) + ',' +
           std::to_string(s["d_well_start"].get<std::size_t>()) + ',' +
           std::to_string(s["d_well_end"].get<std::size_t>()) + ',' +
           std::to_string(s["d_tentative_end"].get<std::size_t>()) + ',' +
           s["config_hash"].get<std::string>() + '\n';
  }
  const std::string sweep_hash = iassl::config_hash(iassl::run_config_to_json(base));
  const std::string path = out_path(out_dir, "sweep", sweep_hash, ".csv");
  iassl::write_file(path, csv);
  std::cout << "wrote " << path << " (" << cells.size() << " rows)\n";
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& data_path, const std::string& split,
             const std::string& out_file, const std::string& dump_path) {
  const iassl::DetectorModel model = iassl::model_from_json(json::parse(iassl::read_file(model_path)));
  auto loaded = iassl::DatasetIo::dataset_from_json(json::parse(iassl::read_file(data_path)));
  const iassl::Partition part = iassl::partition_from_name(split);

  const iassl::Evaluator ev;
  const auto truths = ev.truths_of(loaded.store, part);
  const auto dets = ev.detect(model, loaded.store, part);
  if (!dump_path.empty()) iassl::write_file(dump_path, iassl::detections_to_json(dets).dump(2) + "\n");
  std::set<iassl::ClassId> present;
  for (const auto& t : truths) present.insert(t.cls);

  json per_class = json::object();
  for (iassl::ClassId c : present) {
    std::vector<iassl::TruthRecord> ct;
    std::vector<iassl::DetectionRecord> cd;
    for (const auto& t : truths)
      if (t.cls == c) ct.push_back(t);
    for (const auto& d : dets)
      if (d.cls == c) cd.push_back(d);
    const auto flags = iassl::match_detections(cd, ct);
    per_class[std::to_string(c)] =
        iassl::average_precision(flags, ct.size(), iassl::ApVariant::elevenpoint);
  }
  const double map =
      iassl::mean_ap(dets, truths, {present.begin(), present.end()}, iassl::ApVariant::elevenpoint);

  json out = {{"split", split}, {"map", map}, {"per_class_ap", per_class}, {"n_truth", truths.size()}};
  const std::string text = out.dump(2) + "\n";
  if (out_file.empty())
    std::cout << text;
  else
    iassl::write_file(out_file, text);
  return kExitOk;
}

int cmd_report(const std::string& runs_dir, const std::string& format, const std::string& out_dir) {
  if (!fs::is_directory(runs_dir)) throw iassl::ConfigError("report: not a directory: " + runs_dir);

  // a run is any directory (including runs_dir itself) holding summary-*.json
  std::vector<fs::path> run_dirs;
  auto has_summary = [](const fs::path& dir) {
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().filename().string().starts_with("summary-")) return true;
    return false;
  };
  if (has_summary(runs_dir)) run_dirs.push_back(runs_dir);
  for (const auto& e : fs::directory_iterator(runs_dir))
    if (e.is_directory() && has_summary(e.path())) run_dirs.push_back(e.path());
  std::sort(run_dirs.begin(), run_dirs.end());
  if (run_dirs.empty()) throw iassl::ConfigError("report: no runs under " + runs_dir);

  const std::string dest = out_dir.empty() ? runs_dir : out_dir;
  fs::create_directories(dest);

  json runs = json::array();
  std::vector<double> finals;
  for (const fs::path& dir : run_dirs) {
    json row;
    row["run"] = dir.filename().string().empty() ? dir.string() : dir.filename().string();
    std::string hash;
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (name.starts_with("summary-") && name.ends_with(".json")) {
        const json s = json::parse(iassl::read_file(e.path().string()));
        row["summary"] = s;
        hash = s.value("config_hash", "");
      }
    }
    const fs::path curve_path = dir / ("curve-" + hash + ".csv");
    if (hash.empty() || !fs::exists(curve_path)) {
      row["flag"] = "missing_curve";
    } else {
      const auto curve = iassl::curve_from_csv(iassl::read_file(curve_path.string()));
      std::string acc_txt, dwell_txt;
      for (std::size_t i = 0; i < curve.size(); ++i) {
        acc_txt += std::to_string(i) + ' ' + iassl::format_double(curve[i].acc_after) + '\n';
        dwell_txt += std::to_string(i) + ' ' + std::to_string(curve[i].d_well_size) + '\n';
      }
      const std::string stem = row["run"].get<std::string>() + "-" + hash;
      iassl::write_file((fs::path(dest) / ("plot-" + stem + "-acc.txt")).string(), acc_txt);
      iassl::write_file((fs::path(dest) / ("plot-" + stem + "-dwell.txt")).string(), dwell_txt);
      finals.push_back(row["summary"]["final_test_map"].get<double>());
    }
    runs.push_back(std::move(row));
  }

  json agg;
  if (!finals.empty()) {
    double mean = 0.0;
    for (double v : finals) mean += v;
    mean /= static_cast<double>(finals.size());
    double var = 0.0;
    for (double v : finals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(finals.size());
    agg = {{"runs", finals.size()}, {"final_test_map_mean", mean}, {"final_test_map_variance", var}};
  }
  const json report = {{"runs", runs}, {"aggregate", agg}};

  if (format == "json") {
    iassl::write_file((fs::path(dest) / "report.json").string(), report.dump(2) + "\n");
  } else if (format == "csv") {
    std::string csv = "run,config_hash,status,final_test_map,oracle_inspections,flag\n";
    for (const auto& row : runs) {
      const bool ok = row.contains("summary") && !row.contains("flag");
      const json s = row.value("summary", json::object());
      csv += row["run"].get<std::string>() + ',' + s.value("config_hash", "") + ',' +
             s.value("status", "") + ',' +
             (ok ? iassl::format_double(s["final_test_map"].get<double>()) : "") + ',' +
             (s.contains("oracle_inspections")
                  ? std::to_string(s["oracle_inspections"].get<std::uint64_t>())
                  : "") +
             ',' + row.value("flag", "") + '\n';
    }
    iassl::write_file((fs::path(dest) / "report.csv").string(), csv);
  } else {
    throw iassl::ConfigError("report: unknown format " + format);
  }
  std::cout << "report for " << runs.size() << " run(s) written to " << dest << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"incremental active semi-supervised learning engine"};
  app.require_subcommand(1);

  std::string config_path, out_arg, resume_path, model_path, data_path, dump_path, split = "test",
              format = "csv";
  std::optional<std::uint64_t> seed;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  gen->add_option("--config", config_path)->required();
  gen->add_option("--out", out_arg)->required();
  gen->add_option("--seed", seed);

  auto* run = app.add_subcommand("run", "execute one IASSL run");
  run->add_option("--config", config_path)->required();
  run->add_option("--out", out_arg)->required();
  run->add_option("--seed", seed);
  run->add_option("--resume", resume_path);

  auto* sweep = app.add_subcommand("sweep", "run a parameter/strategy grid");
  sweep->add_option("--config", config_path)->required();
  sweep->add_option("--out", out_arg)->required();
  sweep->add_option("--jobs", jobs);

  auto* ev = app.add_subcommand("eval", "evaluate a model file on a dataset file");
  ev->add_option("--model", model_path)->required();
  ev->add_option("--data", data_path)->required();
  ev->add_option("--split", split);
  ev->add_option("--out", out_arg);
  ev->add_option("--dump", dump_path);

  auto* rep = app.add_subcommand("report", "aggregate runs and emit plot data");
  rep->add_option("--runs", data_path)->required();
  rep->add_option("--format", format);
  rep->add_option("--out", out_arg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_generate(config_path, out_arg, seed);
    if (run->parsed()) return cmd_run(config_path, out_arg, seed, resume_path);
    if (sweep->parsed()) return cmd_sweep(config_path, out_arg, jobs);
    if (ev->parsed()) return cmd_eval(model_path, data_path, split, out_arg, dump_path);
    if (rep->parsed()) return cmd_report(data_path, format, out_arg);
  } catch (const iassl::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
