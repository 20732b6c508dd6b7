#include "iassl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "iassl/rng.hpp"

namespace iassl {

void GenSpec::validate() const {
  if (dim < 2) throw std::invalid_argument("GenSpec: dim must be >= 2");
  if (classes.empty()) throw std::invalid_argument("GenSpec: no classes");
  double wsum = 0.0;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto& c = classes[k];
    if (c.id != static_cast<ClassId>(k))
      throw std::invalid_argument("GenSpec: class ids must be dense 0..C-1");
    if (c.mean.size() != static_cast<std::size_t>(dim))
      throw std::invalid_argument("GenSpec: class mean dimension mismatch");
    if (c.cov_scale < 0.0) throw std::invalid_argument("GenSpec: negative covariance scale");
    wsum += c.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-9) throw std::invalid_argument("GenSpec: prior weights must sum to 1");
  const double ssum = splits.well + splits.tentative + splits.validation + splits.test;
  if (std::abs(ssum - 1.0) > 1e-9) throw std::invalid_argument("GenSpec: splits must sum to 1");
  if (label_noise < 0.0 || label_noise > 1.0)
    throw std::invalid_argument("GenSpec: label_noise must be in [0,1]");
  if (box_jitter < 0.0) throw std::invalid_argument("GenSpec: box_jitter must be >= 0");
}

std::vector<std::size_t> quota_allocate(const std::vector<double>& weights, std::size_t total) {
  std::vector<std::size_t> counts(weights.size());
  std::vector<std::pair<double, std::size_t>> rem;  // (remainder, index)
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-12));
    assigned += counts[i];
    rem.emplace_back(exact - static_cast<double>(counts[i]), i);
  }
  std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t j = 0; assigned < total; ++j, ++assigned) ++counts[rem[j % rem.size()].second];
  return counts;
}

namespace {

// Gentle squash: nearly linear over the usual feature range, so the toy
// localization task stays learnable by a linear head.
double logistic(double v) { return 1.0 / (1.0 + std::exp(-0.25 * v)); }

// per-class box side, fixed by class index
double class_box_side(ClassId k) { return 0.2 + 0.04 * static_cast<double>(k % 5); }

BoundingBox truth_box_for(ClassId cls, const std::vector<double>& f, double jx, double jy) {
  const double side = class_box_side(cls);
  double cx = logistic(f[0]) + jx;
  double cy = logistic(f[1]) + jy;
  cx = std::clamp(cx, side / 2.0, 1.0 - side / 2.0);
  cy = std::clamp(cy, side / 2.0, 1.0 - side / 2.0);
  return BoundingBox{cx - side / 2.0, cy - side / 2.0, side, side};
}

}  // namespace

DatasetStore generate(const GenSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_total;
  const std::size_t C = spec.classes.size();

  std::vector<double> weights;
  for (const auto& c : spec.classes) weights.push_back(c.weight);
  const std::vector<std::size_t> per_class = quota_allocate(weights, n);

  const Rng master(spec.seed);
  Rng feat_rng = master.derive(1);
  Rng jitter_rng = master.derive(2);
  Rng split_rng = master.derive(3);
  Rng noise_rng = master.derive(4);
  Rng class_rng = master.derive(5);

  // exact quota counts, spread over ids so that stream order mixes classes
  std::vector<ClassId> cls_of(n);
  {
    std::size_t at = 0;
    for (std::size_t k = 0; k < C; ++k)
      for (std::size_t i = 0; i < per_class[k]; ++i) cls_of[at++] = static_cast<ClassId>(k);
    class_rng.shuffle(cls_of);
  }

  // features and truth boxes, in id order
  std::vector<std::vector<double>> feats(n);
  std::vector<BoundingBox> boxes(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ClassSpec& cs = spec.classes[cls_of[i]];
    auto& f = feats[i];
    f.resize(spec.dim);
    for (int j = 0; j < spec.dim; ++j) f[j] = cs.mean[j] + cs.cov_scale * feat_rng.normal();
    const double jx = spec.box_jitter * jitter_rng.uniform(-1.0, 1.0);
    const double jy = spec.box_jitter * jitter_rng.uniform(-1.0, 1.0);
    boxes[i] = truth_box_for(cls_of[i], f, jx, jy);
  }

  // partition split: exact quotas over a seeded permutation
  const std::vector<std::size_t> split_counts = quota_allocate(
      {spec.splits.well, spec.splits.tentative, spec.splits.validation, spec.splits.test}, n);
  std::vector<SampleId> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  split_rng.shuffle(perm);
  std::vector<Partition> part_of(n);
  {
    std::size_t at = 0;
    const Partition order[4] = {Partition::well, Partition::tentative, Partition::validation,
                                Partition::test};
    for (int p = 0; p < 4; ++p)
      for (std::size_t i = 0; i < split_counts[p]; ++i) part_of[perm[at++]] = order[p];
  }

  DatasetStore store;
  for (std::size_t i = 0; i < n; ++i) {
    const SampleId id = static_cast<SampleId>(i);
    const ObjectLabel truth{cls_of[i], boxes[i]};
    std::optional<GivenLabel> given;
    if (part_of[i] == Partition::well) {
      given = GivenLabel{truth.cls, truth.box, Provenance::initial};
    } else if (part_of[i] == Partition::tentative) {
      ClassId lbl = truth.cls;
      if (noise_rng.uniform01() < spec.label_noise && C > 1) {
        const std::uint64_t pick = noise_rng.below(C - 1);
        lbl = static_cast<ClassId>(pick >= static_cast<std::uint64_t>(truth.cls) ? pick + 1 : pick);
      }
      given = GivenLabel{lbl, truth.box, Provenance::initial};
    }
    store.insert(Sample(id, std::move(feats[i]), truth, std::move(given)), part_of[i]);
  }
  return store;
}

GroundTruthRecord parse_voc_xml(const std::string& document) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(document);
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(std::string("voc: malformed XML: ") + e.what());
  }

  auto require = [&](const std::string& path) -> const pt::ptree& {
    auto child = tree.get_child_optional(path);
    if (!child) throw ParseError("voc: missing " + path);
    return *child;
  };
  auto require_num = [&](const pt::ptree& node, const std::string& path, const std::string& ctx) {
    auto v = node.get_optional<double>(path);
    if (!v) throw ParseError("voc: missing " + ctx + "/" + path);
    return *v;
  };

  GroundTruthRecord rec;
  const auto& ann = require("annotation");
  auto fname = ann.get_optional<std::string>("filename");
  if (!fname || fname->empty()) throw ParseError("voc: missing annotation/filename");
  rec.source = *fname;

  require("annotation.size");
  const double width = require_num(ann, "size.width", "annotation/size");
  const double height = require_num(ann, "size.height", "annotation/size");
  if (width <= 0.0 || height <= 0.0) throw ParseError("voc: non-positive annotation/size");

  for (const auto& [key, obj] : ann) {
    if (key != "object") continue;
    auto name = obj.get_optional<std::string>("name");
    if (!name || name->empty()) throw ParseError("voc: missing annotation/object/name");
    if (!obj.get_child_optional("bndbox")) throw ParseError("voc: missing annotation/object/bndbox");
    const double xmin = require_num(obj, "bndbox.xmin", "annotation/object/bndbox");
    const double ymin = require_num(obj, "bndbox.ymin", "annotation/object/bndbox");
    const double xmax = require_num(obj, "bndbox.xmax", "annotation/object/bndbox");
    const double ymax = require_num(obj, "bndbox.ymax", "annotation/object/bndbox");
    if (xmax <= xmin || ymax <= ymin)
      throw ParseError("voc: degenerate bndbox in " + rec.source + " (xmax<=xmin or ymax<=ymin)");
    BoundingBox b{xmin / width, ymin / height, (xmax - xmin) / width, (ymax - ymin) / height};
    if (!b.valid()) throw ParseError("voc: bndbox outside the image in " + rec.source);
    rec.objects.emplace_back(*name, b);
  }
  return rec;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<FeatureRow> read_feature_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("feature csv: empty input");
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "name")
    throw ParseError("feature csv: header must start with 'name'");

  std::vector<FeatureRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("feature csv: line " + std::to_string(lineno) + " has " +
                       std::to_string(cells.size()) + " cells, expected " + std::to_string(header.size()));
    FeatureRow row;
    row.name = cells[0];
    for (std::size_t i = 1; i < cells.size(); ++i) {
      try {
        std::size_t pos = 0;
        row.features.push_back(std::stod(cells[i], &pos));
        if (pos != cells[i].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError("feature csv: line " + std::to_string(lineno) + ": bad number '" + cells[i] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<FeatureRow> read_feature_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("feature csv: cannot open " + path);
  return read_feature_csv(in);
}

JoinResult join_features(const std::vector<GroundTruthRecord>& records,
                         const std::vector<FeatureRow>& table, const JoinSplits& splits) {
  std::map<std::string, const FeatureRow*> by_name;
  for (const auto& row : table) {
    if (!by_name.emplace(row.name, &row).second)
      throw std::invalid_argument("join_features: duplicate feature row '" + row.name + "'");
  }

  std::vector<std::string> missing;
  for (const auto& rec : records)
    if (!by_name.count(rec.source)) missing.push_back(rec.source);
  if (!missing.empty()) {
    std::string msg = "join_features: no feature row for:";
    for (const auto& m : missing) msg += " " + m;
    throw std::invalid_argument(msg);
  }

  std::map<std::string, Partition> part_of;
  auto claim = [&](const std::vector<std::string>& names, Partition p) {
    for (const auto& n : names)
      if (!part_of.emplace(n, p).second)
        throw std::invalid_argument("join_features: '" + n + "' appears in two split lists");
  };
  claim(splits.well, Partition::well);
  claim(splits.tentative, Partition::tentative);
  claim(splits.validation, Partition::validation);
  claim(splits.test, Partition::test);

  std::set<std::string> names;
  for (const auto& rec : records)
    for (const auto& [cls, box] : rec.objects) names.insert(cls);
  JoinResult out;
  out.class_names.assign(names.begin(), names.end());
  std::map<std::string, ClassId> cls_of;
  for (std::size_t i = 0; i < out.class_names.size(); ++i)
    cls_of[out.class_names[i]] = static_cast<ClassId>(i);

  SampleId next = 0;
  for (const auto& rec : records) {
    const auto pit = part_of.find(rec.source);
    if (pit == part_of.end())
      throw std::invalid_argument("join_features: '" + rec.source + "' is not in any split list");
    const Partition p = pit->second;
    const FeatureRow* row = by_name.at(rec.source);
    if (!table.empty() && row->features.size() != table.front().features.size())
      throw std::invalid_argument("join_features: inconsistent feature dimension at '" + rec.source + "'");
    for (const auto& [cls_name, box] : rec.objects) {
      const ObjectLabel truth{cls_of.at(cls_name), box};
      std::optional<GivenLabel> given;
      if (p == Partition::well || p == Partition::tentative)
        given = GivenLabel{truth.cls, truth.box, Provenance::initial};
      out.store.insert(Sample(next++, row->features, truth, given), p);
    }
  }
  return out;
}

}  // namespace iassl
