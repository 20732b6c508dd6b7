#include "iassl/config.hpp"

#include "iassl/serialize.hpp"

namespace iassl {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config: " + path + ": " + what);
}

const nlohmann::json* maybe(const nlohmann::json& j, const std::string& key) {
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

template <class T>
T get_as(const nlohmann::json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(path, "wrong type");
  }
}

template <class T>
T field_or(const nlohmann::json& j, const std::string& key, const std::string& path, T fallback) {
  const nlohmann::json* v = maybe(j, key);
  return v ? get_as<T>(*v, path + "." + key) : fallback;
}

template <class T>
T field(const nlohmann::json& j, const std::string& key, const std::string& path) {
  const nlohmann::json* v = maybe(j, key);
  if (!v) fail(path + "." + key, "missing");
  return get_as<T>(*v, path + "." + key);
}

GenSpec genspec_from(const nlohmann::json& j, const std::string& path) {
  try {
    return genspec_from_json(j);
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail("<root>", "expected an object");
  RunConfig cfg;
  cfg.seed = field<std::uint64_t>(j, "seed", "");

  const nlohmann::json* data = maybe(j, "data");
  if (!data || !data->is_object()) fail("data", "missing or not an object");
  int sources = 0;
  if (const auto* g = maybe(*data, "generate")) {
    cfg.data.generate = genspec_from(*g, "data.generate");
    ++sources;
  }
  if (const auto* d = maybe(*data, "dataset")) {
    cfg.data.dataset = get_as<std::string>(*d, "data.dataset");
    ++sources;
  }
  if (const auto* ing = maybe(*data, "ingest")) {
    IngestConfig ic;
    ic.annotations = field<std::vector<std::string>>(*ing, "annotations", "data.ingest");
    ic.features_csv = field<std::string>(*ing, "features_csv", "data.ingest");
    const nlohmann::json* sp = maybe(*ing, "splits");
    if (!sp) fail("data.ingest.splits", "missing");
    ic.splits.well = field_or(*sp, "well", "data.ingest.splits", std::vector<std::string>{});
    ic.splits.tentative = field_or(*sp, "tentative", "data.ingest.splits", std::vector<std::string>{});
    ic.splits.validation = field_or(*sp, "validation", "data.ingest.splits", std::vector<std::string>{});
    ic.splits.test = field_or(*sp, "test", "data.ingest.splits", std::vector<std::string>{});
    cfg.data.ingest = std::move(ic);
    ++sources;
  }
  if (sources != 1) fail("data", "exactly one of generate/dataset/ingest required");

  if (const auto* s = maybe(j, "sampling")) {
    cfg.sampling.uncertainty = field_or(*s, "u", "sampling", cfg.sampling.uncertainty);
    cfg.sampling.diversity = field_or(*s, "d", "sampling", cfg.sampling.diversity);
    cfg.sampling.confidence = field_or(*s, "c", "sampling", cfg.sampling.confidence);
    const std::string rule = field_or<std::string>(*s, "confidence_rule", "sampling", "max_min");
    if (rule == "max_min")
      cfg.confidence_rule = ConfidenceRule::max_min;
    else if (rule == "most_similar")
      cfg.confidence_rule = ConfidenceRule::most_similar;
    else
      fail("sampling.confidence_rule", "expected max_min or most_similar");
    try {
      cfg.sampling.validate();
    } catch (const std::exception& e) {
      fail("sampling", e.what());
    }
  }

  if (const auto* o = maybe(j, "optimizer")) {
    const std::string kind = field_or<std::string>(*o, "kind", "optimizer", "adam");
    if (kind == "adam")
      cfg.optimizer.kind = OptKind::adam;
    else if (kind == "sgd")
      cfg.optimizer.kind = OptKind::sgd;
    else
      fail("optimizer.kind", "expected adam or sgd");
    cfg.optimizer.lr = field_or(*o, "lr", "optimizer", cfg.optimizer.lr);
    cfg.optimizer.beta1 = field_or(*o, "beta1", "optimizer", cfg.optimizer.beta1);
    cfg.optimizer.beta2 = field_or(*o, "beta2", "optimizer", cfg.optimizer.beta2);
    cfg.optimizer.eps = field_or(*o, "eps", "optimizer", cfg.optimizer.eps);
    cfg.optimizer.shuffle = field_or(*o, "shuffle", "optimizer", cfg.optimizer.shuffle);
    if (maybe(*o, "seed")) {
      cfg.optimizer.seed = field<std::uint64_t>(*o, "seed", "optimizer");
      cfg.optimizer_seed_set = true;
    }
    try {
      cfg.optimizer.validate();
    } catch (const std::exception& e) {
      fail("optimizer", e.what());
    }
  }
  if (!cfg.optimizer_seed_set) cfg.optimizer.seed = cfg.seed;

  if (const auto* l = maybe(j, "loop")) {
    cfg.loop.phases = field_or(*l, "phases", "loop", cfg.loop.phases);
    cfg.loop.bins = field_or(*l, "bins", "loop", cfg.loop.bins);
    cfg.loop.pool = field_or(*l, "pool", "loop", cfg.loop.pool);
    cfg.loop.bin_epochs = field_or(*l, "bin_epochs", "loop", cfg.loop.bin_epochs);
    cfg.loop.initial_epochs = field_or(*l, "initial_epochs", "loop", cfg.loop.initial_epochs);
    cfg.loop.eps_phase = field_or(*l, "eps_phase", "loop", cfg.loop.eps_phase);
    if (const auto* cb = maybe(*l, "corrected_bin")) {
      try {
        cfg.loop.corrected_bin = corrected_bin_from_name(get_as<std::string>(*cb, "loop.corrected_bin"));
      } catch (const std::invalid_argument& e) {
        fail("loop.corrected_bin", e.what());
      }
    }
    if (const auto* st = maybe(*l, "strategy")) {
      try {
        cfg.loop.strategy = strategy_from_name(get_as<std::string>(*st, "loop.strategy"));
      } catch (const std::invalid_argument& e) {
        fail("loop.strategy", e.what());
      }
    }
    try {
      cfg.loop.validate();
    } catch (const std::exception& e) {
      fail("loop", e.what());
    }
  }

  if (const auto* e = maybe(j, "eval")) {
    cfg.eval.iou_thresh = field_or(*e, "iou_thresh", "eval", cfg.eval.iou_thresh);
    const std::string v = field_or<std::string>(*e, "ap_variant", "eval", "elevenpoint");
    if (v == "elevenpoint")
      cfg.eval.variant = ApVariant::elevenpoint;
    else if (v == "allpoint")
      cfg.eval.variant = ApVariant::allpoint;
    else
      fail("eval.ap_variant", "expected elevenpoint or allpoint");
    if (cfg.eval.iou_thresh <= 0.0 || cfg.eval.iou_thresh > 1.0) fail("eval.iou_thresh", "outside (0,1]");
  }

  if (const auto* o = maybe(j, "oracle")) {
    if (const auto* b = maybe(*o, "budget"); b && !b->is_null())
      cfg.oracle_budget = get_as<std::uint64_t>(*b, "oracle.budget");
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json data;
  if (cfg.data.generate) data["generate"] = genspec_to_json(*cfg.data.generate);
  if (cfg.data.dataset) data["dataset"] = *cfg.data.dataset;
  if (cfg.data.ingest) {
    data["ingest"] = {{"annotations", cfg.data.ingest->annotations},
                      {"features_csv", cfg.data.ingest->features_csv},
                      {"splits",
                       {{"well", cfg.data.ingest->splits.well},
                        {"tentative", cfg.data.ingest->splits.tentative},
                        {"validation", cfg.data.ingest->splits.validation},
                        {"test", cfg.data.ingest->splits.test}}}};
  }
  return {{"seed", cfg.seed},
          {"data", std::move(data)},
          {"sampling",
           {{"u", cfg.sampling.uncertainty},
            {"d", cfg.sampling.diversity},
            {"c", cfg.sampling.confidence},
            {"confidence_rule",
             cfg.confidence_rule == ConfidenceRule::max_min ? "max_min" : "most_similar"}}},
          {"optimizer",
           {{"kind", cfg.optimizer.kind == OptKind::adam ? "adam" : "sgd"},
            {"lr", cfg.optimizer.lr},
            {"beta1", cfg.optimizer.beta1},
            {"beta2", cfg.optimizer.beta2},
            {"eps", cfg.optimizer.eps},
            {"seed", cfg.optimizer.seed},
            {"shuffle", cfg.optimizer.shuffle}}},
          {"loop",
           {{"phases", cfg.loop.phases},
            {"bins", cfg.loop.bins},
            {"pool", cfg.loop.pool},
            {"bin_epochs", cfg.loop.bin_epochs},
            {"initial_epochs", cfg.loop.initial_epochs},
            {"eps_phase", cfg.loop.eps_phase},
            {"corrected_bin", corrected_bin_name(cfg.loop.corrected_bin)},
            {"strategy", strategy_name(cfg.loop.strategy)}}},
          {"eval",
           {{"iou_thresh", cfg.eval.iou_thresh},
            {"ap_variant", cfg.eval.variant == ApVariant::elevenpoint ? "elevenpoint" : "allpoint"}}},
          {"oracle",
           {{"budget", cfg.oracle_budget ? nlohmann::json(*cfg.oracle_budget) : nlohmann::json(nullptr)}}}};
}

void override_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  if (!cfg.optimizer_seed_set) cfg.optimizer.seed = seed;
  if (cfg.data.generate) cfg.data.generate->seed = seed;
}

IasslConfig to_iassl_config(const RunConfig& cfg, int num_classes) {
  IasslConfig ic;
  ic.params = cfg.sampling;
  ic.confidence_rule = cfg.confidence_rule;
  ic.opt = cfg.optimizer;
  ic.loop = cfg.loop;
  ic.eval = cfg.eval;
  ic.oracle_budget = cfg.oracle_budget;
  ic.num_classes = num_classes;
  ic.seed = cfg.seed;
  return ic;
}

}  // namespace iassl
