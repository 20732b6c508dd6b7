#include "iassl/serialize.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace iassl {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

nlohmann::json genspec_to_json(const GenSpec& spec) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : spec.classes)
    classes.push_back({{"id", c.id}, {"mean", c.mean}, {"cov_scale", c.cov_scale}, {"weight", c.weight}});
  return {{"seed", spec.seed},
          {"dim", spec.dim},
          {"classes", classes},
          {"n_total", spec.n_total},
          {"label_noise", spec.label_noise},
          {"box_jitter", spec.box_jitter},
          {"splits",
           {{"well", spec.splits.well},
            {"tentative", spec.splits.tentative},
            {"validation", spec.splits.validation},
            {"test", spec.splits.test}}}};
}

GenSpec genspec_from_json(const nlohmann::json& j) {
  GenSpec spec;
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.dim = j.at("dim").get<int>();
  for (const auto& c : j.at("classes")) {
    ClassSpec cs;
    cs.id = c.at("id").get<ClassId>();
    cs.mean = c.at("mean").get<std::vector<double>>();
    cs.cov_scale = c.at("cov_scale").get<double>();
    cs.weight = c.at("weight").get<double>();
    spec.classes.push_back(std::move(cs));
  }
  spec.n_total = j.at("n_total").get<std::size_t>();
  spec.label_noise = j.at("label_noise").get<double>();
  spec.box_jitter = j.at("box_jitter").get<double>();
  const auto& s = j.at("splits");
  spec.splits = {s.at("well").get<double>(), s.at("tentative").get<double>(),
                 s.at("validation").get<double>(), s.at("test").get<double>()};
  spec.validate();
  return spec;
}

nlohmann::json model_to_json(const DetectorModel& m) {
  return {{"version", 1},
          {"dim", m.dim},
          {"num_classes", m.num_classes},
          {"weights", m.weights},
          {"loc_weights", m.loc_weights}};
}

DetectorModel model_from_json(const nlohmann::json& j) {
  DetectorModel m;
  m.dim = j.at("dim").get<int>();
  m.num_classes = j.at("num_classes").get<int>();
  m.weights = j.at("weights").get<std::vector<double>>();
  m.loc_weights = j.at("loc_weights").get<std::vector<double>>();
  m.validate();
  return m;
}

namespace {

nlohmann::json box_to_json(const BoundingBox& b) {
  return {{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}};
}

BoundingBox box_from_json(const nlohmann::json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(),
          j.at("h").get<double>()};
}

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::initial: return "initial";
    case Provenance::oracle: return "oracle";
    case Provenance::pseudo: return "pseudo";
  }
  return "?";
}

Provenance provenance_from_name(const std::string& s) {
  if (s == "initial") return Provenance::initial;
  if (s == "oracle") return Provenance::oracle;
  if (s == "pseudo") return Provenance::pseudo;
  throw std::invalid_argument("unknown provenance: " + s);
}

nlohmann::json given_to_json(const GivenLabel& g) {
  return {{"cls", g.cls}, {"box", box_to_json(g.box)}, {"provenance", provenance_name(g.provenance)}};
}

GivenLabel given_from_json(const nlohmann::json& j) {
  return {j.at("cls").get<ClassId>(), box_from_json(j.at("box")),
          provenance_from_name(j.at("provenance").get<std::string>())};
}

}  // namespace

nlohmann::json DatasetIo::dataset_to_json(const DatasetStore& store, nlohmann::json spec_descr,
                                          int num_classes) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& [id, s] : store.samples()) {
    nlohmann::json js;
    js["id"] = id;
    js["features"] = s.features;
    js["partition"] = partition_name(store.partition_of(id));
    const auto& truth = s.truth(TruthKey{});
    js["truth"] = truth ? nlohmann::json{{"cls", truth->cls}, {"box", box_to_json(truth->box)}}
                        : nlohmann::json(nullptr);
    js["given_label"] = s.given_label ? given_to_json(*s.given_label) : nlohmann::json(nullptr);
    if (s.pseudo_score) js["pseudo_score"] = *s.pseudo_score;
    if (s.prior_label) js["prior_label"] = given_to_json(*s.prior_label);
    samples.push_back(std::move(js));
  }
  // partition membership order matters (stream order, training order)
  nlohmann::json order;
  for (Partition p : {Partition::well, Partition::tentative, Partition::validation, Partition::test})
    order[partition_name(p)] = store.ids(p);
  return {{"version", 1},
          {"spec", std::move(spec_descr)},
          {"num_classes", num_classes},
          {"order", std::move(order)},
          {"samples", std::move(samples)}};
}

DatasetIo::LoadedDataset DatasetIo::dataset_from_json(const nlohmann::json& j) {
  LoadedDataset out;
  out.num_classes = j.at("num_classes").get<int>();
  out.spec = j.value("spec", nlohmann::json(nullptr));

  std::map<SampleId, std::pair<Sample, Partition>> parsed;
  for (const auto& js : j.at("samples")) {
    const SampleId id = js.at("id").get<SampleId>();
    std::optional<ObjectLabel> truth;
    if (!js.at("truth").is_null())
      truth = ObjectLabel{js.at("truth").at("cls").get<ClassId>(), box_from_json(js.at("truth").at("box"))};
    std::optional<GivenLabel> given;
    if (!js.at("given_label").is_null()) given = given_from_json(js.at("given_label"));
    Sample s(id, js.at("features").get<std::vector<double>>(), std::move(truth), std::move(given));
    if (js.contains("pseudo_score")) s.pseudo_score = js.at("pseudo_score").get<double>();
    if (js.contains("prior_label")) s.prior_label = given_from_json(js.at("prior_label"));
    const Partition p = partition_from_name(js.at("partition").get<std::string>());
    parsed.emplace(id, std::make_pair(std::move(s), p));
  }

  // insertion order inside each partition must be preserved (stream order,
  // training order); fall back to file order for documents without it
  if (j.contains("order")) {
    for (Partition p : {Partition::well, Partition::tentative, Partition::validation, Partition::test})
      for (SampleId id : j.at("order").at(partition_name(p)).get<std::vector<SampleId>>()) {
        auto it = parsed.find(id);
        if (it == parsed.end() || it->second.second != p)
          throw std::invalid_argument("dataset: order block disagrees with samples");
        out.store.insert(std::move(it->second.first), p);
        parsed.erase(it);
      }
    if (!parsed.empty()) throw std::invalid_argument("dataset: order block misses some samples");
  } else {
    for (auto& [id, sp] : parsed) out.store.insert(std::move(sp.first), sp.second);
  }
  return out;
}

std::string curve_to_csv(const LearningCurve& curve) {
  std::string out = kCurveHeader;
  out += '\n';
  for (const auto& r : curve) {
    out += std::to_string(r.phase) + ',' + std::to_string(r.bin_index) + ',' +
           std::to_string(r.candidate_bin_id) + ',' + (r.accepted ? "1" : "0") + ',' +
           format_double(r.acc_before) + ',' + format_double(r.acc_after) + ',' +
           std::to_string(r.oracle_inspections) + ',' + std::to_string(r.oracle_corrections) + ',' +
           std::to_string(r.d_well_size) + ',' + std::to_string(r.d_tentative_size) + ',' +
           std::to_string(r.wall_time_ms) + '\n';
  }
  return out;
}

LearningCurve curve_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCurveHeader)
    throw std::invalid_argument("curve csv: unexpected header");
  LearningCurve curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 11) throw std::invalid_argument("curve csv: bad row: " + line);
    CurveRow r;
    r.phase = std::stoi(cells[0]);
    r.bin_index = std::stoi(cells[1]);
    r.candidate_bin_id = std::stoi(cells[2]);
    r.accepted = cells[3] == "1";
    r.acc_before = std::stod(cells[4]);
    r.acc_after = std::stod(cells[5]);
    r.oracle_inspections = std::stoull(cells[6]);
    r.oracle_corrections = std::stoull(cells[7]);
    r.d_well_size = std::stoull(cells[8]);
    r.d_tentative_size = std::stoull(cells[9]);
    r.wall_time_ms = std::stoll(cells[10]);
    curve.push_back(r);
  }
  return curve;
}

namespace {

nlohmann::json curve_rows_to_json(const LearningCurve& curve) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : curve)
    rows.push_back({{"phase", r.phase},
                    {"bin_index", r.bin_index},
                    {"candidate_bin_id", r.candidate_bin_id},
                    {"accepted", r.accepted},
                    {"acc_before", r.acc_before},
                    {"acc_after", r.acc_after},
                    {"oracle_inspections", r.oracle_inspections},
                    {"oracle_corrections", r.oracle_corrections},
                    {"d_well_size", r.d_well_size},
                    {"d_tentative_size", r.d_tentative_size},
                    {"wall_time_ms", r.wall_time_ms}});
  return rows;
}

LearningCurve curve_rows_from_json(const nlohmann::json& rows) {
  LearningCurve curve;
  for (const auto& j : rows) {
    CurveRow r;
    r.phase = j.at("phase").get<int>();
    r.bin_index = j.at("bin_index").get<int>();
    r.candidate_bin_id = j.at("candidate_bin_id").get<int>();
    r.accepted = j.at("accepted").get<bool>();
    r.acc_before = j.at("acc_before").get<double>();
    r.acc_after = j.at("acc_after").get<double>();
    r.oracle_inspections = j.at("oracle_inspections").get<std::uint64_t>();
    r.oracle_corrections = j.at("oracle_corrections").get<std::uint64_t>();
    r.d_well_size = j.at("d_well_size").get<std::size_t>();
    r.d_tentative_size = j.at("d_tentative_size").get<std::size_t>();
    r.wall_time_ms = j.at("wall_time_ms").get<std::int64_t>();
    curve.push_back(r);
  }
  return curve;
}

}  // namespace

nlohmann::json run_state_to_json(const RunState& state, const std::string& cfg_hash, int num_classes) {
  return {{"version", 1},
          {"config_hash", cfg_hash},
          {"rng_state", {{"seed_derived", true}}},
          {"phase", state.phase_done},
          {"stream", state.stream_rest},
          {"model", model_to_json(state.model)},
          {"initial_model", model_to_json(state.initial_model)},
          {"partitions", DatasetIo::dataset_to_json(state.store, nlohmann::json(nullptr), num_classes)},
          {"oracle", {{"inspections", state.oracle_inspections}, {"corrections", state.oracle_corrections}}},
          {"curve", curve_rows_to_json(state.curve)},
          {"audits", state.audits},
          {"prev_phase_acc", state.prev_phase_acc},
          {"acc_current", state.acc_current},
          {"stopped", state.stopped}};
}

LoadedState run_state_from_json(const nlohmann::json& j) {
  LoadedState out;
  out.config_hash = j.at("config_hash").get<std::string>();
  out.state.phase_done = j.at("phase").get<int>();
  out.state.stream_rest = j.at("stream").get<std::vector<SampleId>>();
  out.state.model = model_from_json(j.at("model"));
  out.state.initial_model = model_from_json(j.at("initial_model"));
  auto loaded = DatasetIo::dataset_from_json(j.at("partitions"));
  out.state.store = std::move(loaded.store);
  out.num_classes = loaded.num_classes;
  out.state.oracle_inspections = j.at("oracle").at("inspections").get<std::uint64_t>();
  out.state.oracle_corrections = j.at("oracle").at("corrections").get<std::uint64_t>();
  out.state.curve = curve_rows_from_json(j.at("curve"));
  out.state.audits = j.at("audits").get<std::vector<nlohmann::json>>();
  out.state.prev_phase_acc = j.at("prev_phase_acc").get<double>();
  out.state.acc_current = j.at("acc_current").get<double>();
  out.state.stopped = j.at("stopped").get<bool>();
  return out;
}

nlohmann::json detections_to_json(const std::vector<DetectionRecord>& dets) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& d : dets)
    out.push_back(
        {{"sample_id", d.sample_id}, {"cls", d.cls}, {"score", d.score}, {"box", box_to_json(d.box)}});
  return out;
}

std::vector<DetectionRecord> detections_from_json(const nlohmann::json& j) {
  std::vector<DetectionRecord> out;
  for (const auto& d : j)
    out.push_back({d.at("sample_id").get<SampleId>(), d.at("cls").get<ClassId>(),
                   d.at("score").get<double>(), box_from_json(d.at("box"))});
  return out;
}

nlohmann::json ground_truth_to_json(const std::vector<GroundTruthRecord>& recs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : recs) {
    nlohmann::json objs = nlohmann::json::array();
    for (const auto& [name, box] : r.objects) objs.push_back({{"name", name}, {"box", box_to_json(box)}});
    out.push_back({{"source", r.source}, {"objects", std::move(objs)}});
  }
  return out;
}

std::vector<GroundTruthRecord> ground_truth_from_json(const nlohmann::json& j) {
  std::vector<GroundTruthRecord> out;
  for (const auto& r : j) {
    GroundTruthRecord rec;
    rec.source = r.at("source").get<std::string>();
    for (const auto& o : r.at("objects"))
      rec.objects.emplace_back(o.at("name").get<std::string>(), box_from_json(o.at("box")));
    out.push_back(std::move(rec));
  }
  return out;
}

std::string config_hash(const nlohmann::json& canonical_config) {
  const std::string text = canonical_config.dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 16);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace iassl
