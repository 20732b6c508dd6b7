// End-to-end checks of the command-line front end: exit codes, file
// contracts, determinism, resume, sweep and report behavior.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int g_failures = 0;
fs::path g_work;

void check(bool ok, const std::string& what) {
  if (!ok) {
    std::cout << "FAIL: " << what << "\n";
    ++g_failures;
  } else {
    std::cout << "ok:   " << what << "\n";
  }
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(IASSL_CLI_PATH) + " " + args + " > " +
                          (g_work / "stdout.txt").string() + " 2> " + (g_work / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path find_file(const fs::path& dir, const std::string& prefix) {
  if (!fs::is_directory(dir)) return {};
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename().string().starts_with(prefix)) return e.path();
  return {};
}

std::size_t line_count(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

const char* kToyConfig = R"({
  "seed": 5,
  "data": {"generate": {
    "seed": 5, "dim": 4, "n_total": 300, "label_noise": 0.25, "box_jitter": 0.02,
    "classes": [
      {"id": 0, "mean": [2.5, 2.5, 0.0, 0.0], "cov_scale": 0.8, "weight": 0.4},
      {"id": 1, "mean": [-2.5, 2.5, 0.0, 0.0], "cov_scale": 0.8, "weight": 0.35},
      {"id": 2, "mean": [0.0, -2.5, 1.0, 0.0], "cov_scale": 0.8, "weight": 0.25}],
    "splits": {"well": 0.12, "tentative": 0.48, "validation": 0.2, "test": 0.2}}},
  "sampling": {"u": 0.8, "d": 0.6, "c": 0.8},
  "optimizer": {"kind": "adam", "lr": 0.001},
  "loop": {"phases": 2, "bins": 4, "pool": 50, "bin_epochs": 15, "initial_epochs": 80,
           "eps_phase": 0.0},
  "eval": {"iou_thresh": 0.5, "ap_variant": "elevenpoint"},
  "oracle": {"budget": null},
  "sweep": {"u": [0.8], "d": [0.6], "c": [0.8],
            "strategies": ["collaborative", "ssl_only"], "seeds": [1, 2]}
})";

void write(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

}  // namespace

int main() {
  g_work = fs::temp_directory_path() / "iassl_cli_tests";
  fs::remove_all(g_work);
  fs::create_directories(g_work);
  const fs::path cfg = g_work / "toy.json";
  write(cfg, kToyConfig);

  // generate: success, idempotence, config errors
  {
    const fs::path out1 = g_work / "data1.json", out2 = g_work / "data2.json";
    check(run_cli("generate --config " + cfg.string() + " --out " + out1.string()) == 0,
          "generate exits 0 on a valid config");
    check(fs::exists(out1), "generate writes the dataset file");
    check(run_cli("generate --config " + cfg.string() + " --out " + out2.string()) == 0 &&
              slurp(out1) == slurp(out2),
          "generate rerun is byte-identical");

    write(g_work / "broken.json", "{ not json");
    check(run_cli("generate --config " + (g_work / "broken.json").string() + " --out " +
                  (g_work / "x.json").string()) == 2,
          "malformed config exits 2");

    write(g_work / "badfield.json", std::string(kToyConfig).replace(
                                        std::string(kToyConfig).find("\"adam\""), 6, "\"momentum\""));
    check(run_cli("generate --config " + (g_work / "badfield.json").string() + " --out " +
                  (g_work / "x.json").string()) == 2,
          "unknown optimizer kind exits 2");
  }

  // run: outputs, bounds, audit content, determinism, resume
  {
    const fs::path ra = g_work / "run_a", rb = g_work / "run_b", rc = g_work / "run_c";
    check(run_cli("run --config " + cfg.string() + " --out " + ra.string()) == 0,
          "run exits 0 on the toy config");
    const fs::path curve = find_file(ra, "curve-");
    check(!curve.empty(), "run writes the curve csv");
    check(!find_file(ra, "model-").empty(), "run writes the final model");
    check(!find_file(ra, "summary-").empty(), "run writes the summary");
    check(!find_file(ra, "checkpoint-").empty(), "run writes per-phase checkpoints");

    const std::string curve_text = slurp(curve);
    check(curve_text.starts_with("phase,bin_index,candidate_bin_id,accepted,acc_before,acc_after,"
                                 "oracle_inspections,oracle_corrections,d_well_size,"
                                 "d_tentative_size,wall_time_ms\n"),
          "curve header matches the contract");
    check(line_count(curve_text) <= 1 + 1 + 2 * 4, "curve has at most 1 + P*j bin rows");

    const std::string audit = slurp(find_file(ra, "audit-"));
    check(audit.find("0.8,\n      0.6,\n      0.8") != std::string::npos ||
              audit.find("[0.8,0.6,0.8]") != std::string::npos ||
              audit.find("0.8, 0.6, 0.8") != std::string::npos,
          "audit records the sampling triple verbatim");

    check(run_cli("run --config " + cfg.string() + " --out " + rb.string()) == 0 &&
              slurp(find_file(rb, "curve-")) == curve_text,
          "run twice produces byte-identical curves");

    const fs::path cp = find_file(ra, "checkpoint-");
    check(run_cli("run --config " + cfg.string() + " --resume " + cp.string() + " --out " +
                  rc.string()) == 0 &&
              slurp(find_file(rc, "curve-")) == curve_text,
          "resume from the phase-1 checkpoint reproduces the curve");

    // resume against a different config must be refused
    std::string other = kToyConfig;
    other.replace(other.find("\"seed\": 5"), 9, "\"seed\": 6");
    write(g_work / "other.json", other);
    check(run_cli("run --config " + (g_work / "other.json").string() + " --resume " + cp.string() +
                  " --out " + (g_work / "run_d").string()) == 2,
          "resume with a mismatched config exits 2");
  }

  // run: oracle budget exhaustion halts with exit 3 and partial outputs
  {
    std::string budgeted = kToyConfig;
    budgeted.replace(budgeted.find("\"budget\": null"), 14, "\"budget\": 1");
    // high label noise in the pseudo-labels comes from a weak initial model
    budgeted.replace(budgeted.find("\"initial_epochs\": 80"), 20, "\"initial_epochs\": 1");
    write(g_work / "budget.json", budgeted);
    const fs::path out = g_work / "run_budget";
    const int code = run_cli("run --config " + (g_work / "budget.json").string() + " --out " +
                             out.string());
    if (code == 3) {
      check(!find_file(out, "curve-").empty(), "halted run still writes partial outputs");
    } else {
      check(code == 0, "budgeted run exits 0 when the budget suffices");
    }
  }

  // unknown strategy in the config
  {
    std::string bad = kToyConfig;
    bad.replace(bad.find("\"collaborative\", \"ssl_only\""), 27, "\"telepathy\", \"ssl_only\"  ");
    write(g_work / "badstrat.json", bad);
    check(run_cli("sweep --config " + (g_work / "badstrat.json").string() + " --out " +
                  (g_work / "sweep_bad").string()) == 2,
          "unknown sweep strategy exits 2");
  }

  // sweep: row count and determinism
  {
    const fs::path so = g_work / "sweep_out";
    check(run_cli("sweep --config " + cfg.string() + " --out " + so.string() + " --jobs 4") == 0,
          "sweep exits 0");
    const fs::path sweep_csv = find_file(so, "sweep-");
    const std::string text = slurp(sweep_csv);
    check(line_count(text) == 1 + 2 * 2, "sweep writes one row per (triple, strategy, seed)");
    check(run_cli("sweep --config " + cfg.string() + " --out " + (g_work / "sweep_out2").string() +
                  " --jobs 2") == 0 &&
              slurp(find_file(g_work / "sweep_out2", "sweep-")) == text,
          "sweep rows are reproducible regardless of worker count");
    check(text.find("collaborative") != std::string::npos &&
              text.find("ssl_only") != std::string::npos,
          "sweep covers the requested strategies");
  }

  // eval: model x dataset -> mAP report
  {
    const fs::path model = find_file(g_work / "run_a", "model-");
    const fs::path data = g_work / "data1.json";
    const fs::path out = g_work / "eval.json";
    const fs::path dump = g_work / "dets.json";
    check(run_cli("eval --model " + model.string() + " --data " + data.string() +
                  " --split test --out " + out.string() + " --dump " + dump.string()) == 0,
          "eval exits 0");
    const std::string report = slurp(out);
    check(report.find("\"map\"") != std::string::npos &&
              report.find("\"per_class_ap\"") != std::string::npos,
          "eval reports map and per-class ap");
    check(slurp(dump).find("\"sample_id\"") != std::string::npos,
          "eval dumps the detection records");
  }

  // report: aggregates runs, flags missing curves, rejects empty dirs
  {
    const fs::path runs = g_work / "runs";
    fs::create_directories(runs);
    fs::create_directories(runs / "r1");
    fs::create_directories(runs / "r2");
    for (const auto& e : fs::directory_iterator(g_work / "run_a"))
      fs::copy(e.path(), runs / "r1" / e.path().filename());
    for (const auto& e : fs::directory_iterator(g_work / "run_b"))
      fs::copy(e.path(), runs / "r2" / e.path().filename());

    check(run_cli("report --runs " + runs.string() + " --format csv --out " +
                  (g_work / "rep").string()) == 0,
          "report exits 0 on a populated dir");
    const std::string rep = slurp(g_work / "rep" / "report.csv");
    check(line_count(rep) == 3, "report has one row per run");
    bool plot_found = false;
    for (const auto& e : fs::directory_iterator(g_work / "rep"))
      if (e.path().filename().string().starts_with("plot-r1-")) plot_found = true;
    check(plot_found, "report emits plot data named by run and config hash");

    // two identical runs: zero cross-run variance
    check(run_cli("report --runs " + runs.string() + " --format json --out " +
                  (g_work / "repj").string()) == 0,
          "json report exits 0");
    const std::string repj = slurp(g_work / "repj" / "report.json");
    check(repj.find("\"final_test_map_variance\": 0.0") != std::string::npos,
          "identical runs report zero variance");

    // a run with a missing curve is flagged, the others still reported
    fs::remove(find_file(runs / "r2", "curve-"));
    check(run_cli("report --runs " + runs.string() + " --format csv --out " +
                  (g_work / "rep2").string()) == 0,
          "report tolerates a missing curve");
    check(slurp(g_work / "rep2" / "report.csv").find("missing_curve") != std::string::npos,
          "missing curve is flagged");

    fs::create_directories(g_work / "empty");
    check(run_cli("report --runs " + (g_work / "empty").string() + " --format csv") == 2,
          "empty runs dir exits 2");
  }

  std::printf("%d failure(s)\n", g_failures);
  return g_failures;
}
