#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "iassl/data.hpp"
#include "iassl/loop.hpp"

namespace iassl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IngestConfig {
  std::vector<std::string> annotations;  // VOC XML paths
  std::string features_csv;
  JoinSplits splits;  // source names per partition
};

// Exactly one of generate / dataset / ingest.
struct DataConfig {
  std::optional<GenSpec> generate;
  std::optional<std::string> dataset;  // dataset JSON path
  std::optional<IngestConfig> ingest;
};

struct RunConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  SamplingParams sampling;
  ConfidenceRule confidence_rule = ConfidenceRule::max_min;
  OptimizerConfig optimizer;
  bool optimizer_seed_set = false;  // when false, the run seed seeds the optimizer
  LoopConfig loop;
  EvalConfig eval;
  std::optional<std::uint64_t> oracle_budget;
};

// Throws ConfigError naming the offending field path.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Canonical form: every effective setting spelled out, for hashing and echo.
nlohmann::json run_config_to_json(const RunConfig& cfg);

// Replaces the run seed and, for generated data, the generator seed.
void override_seed(RunConfig& cfg, std::uint64_t seed);

// The library-level knobs implied by a run config.
IasslConfig to_iassl_config(const RunConfig& cfg, int num_classes);

}  // namespace iassl
