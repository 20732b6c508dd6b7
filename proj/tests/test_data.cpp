#include <doctest.h>

#include <map>
#include <sstream>

#include "iassl/data.hpp"
#include "iassl/eval.hpp"
#include "iassl/rng.hpp"
#include "iassl/serialize.hpp"

using namespace iassl;

namespace iassl {
// test-only ground-truth peek, declared as a friend in core.hpp
struct TruthPeek {
  static const std::optional<ObjectLabel>& get(const Sample& s) { return s.truth(TruthKey{}); }
};
}  // namespace iassl

namespace {

GenSpec base_spec() {
  GenSpec spec;
  spec.seed = 11;
  spec.dim = 3;
  spec.n_total = 1000;
  spec.classes = {{0, {2, 0, 0}, 1.0, 0.9}, {1, {-2, 0, 0}, 1.0, 0.1}};
  spec.splits = {0.2, 0.5, 0.15, 0.15};
  return spec;
}

const char* kMinimalVoc = R"(<annotation>
  <filename>room.jpg</filename>
  <size><width>100</width><height>200</height><depth>3</depth></size>
  <object>
    <name>chair</name>
    <bndbox><xmin>10</xmin><ymin>10</ymin><xmax>60</xmax><ymax>110</ymax></bndbox>
  </object>
</annotation>)";

}  // namespace

TEST_CASE("quota allocation: largest remainder hits 900/100 exactly") {
  const auto counts = quota_allocate({0.9, 0.1}, 1000);
  CHECK(counts == std::vector<std::size_t>{900, 100});

  const GenSpec spec = base_spec();
  const DatasetStore store = generate(spec);
  std::map<ClassId, std::size_t> per_class;
  for (const auto& [id, s] : store.samples()) ++per_class[TruthPeek::get(s)->cls];
  CHECK(per_class[0] == 900);
  CHECK(per_class[1] == 100);
}

TEST_CASE("quota allocation: counts always sum to the total") {
  const auto counts = quota_allocate({1.0 / 3, 1.0 / 3, 1.0 / 3}, 100);
  CHECK(counts[0] + counts[1] + counts[2] == 100);
}

TEST_CASE("generate: zero label noise keeps every given label equal to truth") {
  GenSpec spec = base_spec();
  spec.label_noise = 0.0;
  const DatasetStore store = generate(spec);
  for (const auto& [id, s] : store.samples()) {
    if (!s.given_label) continue;
    CHECK(s.given_label->cls == TruthPeek::get(s)->cls);
    CHECK(s.given_label->box == TruthPeek::get(s)->box);
  }
}

TEST_CASE("generate: identical spec twice serializes byte-identically") {
  const GenSpec spec = base_spec();
  const auto a = DatasetIo::dataset_to_json(generate(spec), genspec_to_json(spec), 2).dump();
  const auto b = DatasetIo::dataset_to_json(generate(spec), genspec_to_json(spec), 2).dump();
  CHECK(a == b);
}

TEST_CASE("generate: split sizes follow the quota and labels follow the partition") {
  const DatasetStore store = generate(base_spec());
  CHECK(store.ids(Partition::well).size() == 200);
  CHECK(store.ids(Partition::tentative).size() == 500);
  CHECK(store.ids(Partition::validation).size() == 150);
  CHECK(store.ids(Partition::test).size() == 150);
  for (SampleId id : store.ids(Partition::well))
    CHECK(store.at(id).given_label->provenance == Provenance::initial);
  for (SampleId id : store.ids(Partition::validation)) CHECK_FALSE(store.at(id).given_label);
  for (const auto& [id, s] : store.samples()) CHECK(TruthPeek::get(s)->box.valid());
}

TEST_CASE("generate: tentative corruption rate stays inside the binomial band") {
  // pooled over 10 seeds, 1000 tentative samples each, noise 0.3
  GenSpec spec = base_spec();
  spec.n_total = 2000;
  spec.label_noise = 0.3;
  spec.splits = {0.3, 0.5, 0.1, 0.1};
  std::size_t corrupted = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    spec.seed = seed;
    const DatasetStore store = generate(spec);
    REQUIRE(store.ids(Partition::tentative).size() == 1000);
    for (SampleId id : store.ids(Partition::tentative)) {
      const Sample& s = store.at(id);
      corrupted += s.given_label->cls != TruthPeek::get(s)->cls;
      ++total;
    }
  }
  const double rate = double(corrupted) / double(total);
  CHECK(rate >= 0.26);
  CHECK(rate <= 0.34);
}

TEST_CASE("generate: invalid specs are rejected") {
  GenSpec spec = base_spec();
  spec.dim = 1;
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
  spec = base_spec();
  spec.classes.clear();
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
  spec = base_spec();
  spec.classes[0].weight = 0.5;  // weights no longer sum to 1
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
  spec = base_spec();
  spec.splits.test = 0.5;
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}

TEST_CASE("parse_voc_xml: pixel corners normalize to corner+size") {
  const GroundTruthRecord rec = parse_voc_xml(kMinimalVoc);
  CHECK(rec.source == "room.jpg");
  REQUIRE(rec.objects.size() == 1);
  CHECK(rec.objects[0].first == "chair");
  const BoundingBox& b = rec.objects[0].second;
  CHECK(b.x == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(b.y == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(b.w == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(b.h == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("parse_voc_xml: zero objects is fine, missing pieces are not") {
  const GroundTruthRecord empty = parse_voc_xml(
      "<annotation><filename>a.jpg</filename>"
      "<size><width>10</width><height>10</height></size></annotation>");
  CHECK(empty.objects.empty());

  CHECK_THROWS_WITH_AS(parse_voc_xml("<annotation><size><width>10</width><height>10</height>"
                                     "</size></annotation>"),
                       doctest::Contains("filename"), ParseError);
  CHECK_THROWS_WITH_AS(parse_voc_xml("<annotation><filename>a.jpg</filename></annotation>"),
                       doctest::Contains("size"), ParseError);
  CHECK_THROWS_WITH_AS(parse_voc_xml("<annotation><filename>a.jpg</filename>"
                                     "<size><width>10</width><height>10</height></size>"
                                     "<object><name>cat</name></object></annotation>"),
                       doctest::Contains("bndbox"), ParseError);
  CHECK_THROWS_WITH_AS(parse_voc_xml("<annotation><filename>a.jpg</filename>"
                                     "<size><width>10</width><height>10</height></size>"
                                     "<object><name>cat</name><bndbox><xmin>5</xmin><ymin>1</ymin>"
                                     "<xmax>5</xmax><ymax>9</ymax></bndbox></object></annotation>"),
                       doctest::Contains("xmax"), ParseError);
  CHECK_THROWS_AS(parse_voc_xml("not xml at all <<<"), ParseError);
}

TEST_CASE("read_feature_csv: header and numeric validation") {
  std::istringstream ok("name,f0,f1\nroom.jpg,0.5,-1.25\nhall.jpg,2,3\n");
  const auto rows = read_feature_csv(ok);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].name == "room.jpg");
  CHECK(rows[0].features == std::vector<double>{0.5, -1.25});

  std::istringstream bad_header("id,f0\nx,1\n");
  CHECK_THROWS_AS(read_feature_csv(bad_header), ParseError);
  std::istringstream bad_cell("name,f0\nx,abc\n");
  CHECK_THROWS_AS(read_feature_csv(bad_cell), ParseError);
  std::istringstream ragged("name,f0\nx,1,2\n");
  CHECK_THROWS_AS(read_feature_csv(ragged), ParseError);
}

TEST_CASE("join_features: one sample per object, shared feature row") {
  GroundTruthRecord rec;
  rec.source = "room.jpg";
  rec.objects = {{"chair", {0.1, 0.1, 0.2, 0.2}}, {"sofa", {0.5, 0.5, 0.3, 0.3}}};
  const std::vector<FeatureRow> table{{"room.jpg", {1.0, 2.0}}};
  JoinSplits splits;
  splits.well = {"room.jpg"};

  const JoinResult out = join_features({rec}, table, splits);
  CHECK(out.store.size() == 2);
  CHECK(out.class_names == std::vector<std::string>{"chair", "sofa"});
  for (const auto& [id, s] : out.store.samples()) {
    CHECK(s.features == std::vector<double>{1.0, 2.0});
    CHECK(s.given_label.has_value());
  }
  CHECK(TruthPeek::get(out.store.at(0))->cls == 0);  // "chair" sorts first
}

TEST_CASE("join_features: error paths") {
  GroundTruthRecord rec;
  rec.source = "room.jpg";
  rec.objects = {{"chair", {0.1, 0.1, 0.2, 0.2}}};
  JoinSplits splits;
  splits.tentative = {"room.jpg"};

  CHECK_THROWS_WITH_AS(join_features({rec}, {}, splits), doctest::Contains("room.jpg"),
                       std::invalid_argument);

  const std::vector<FeatureRow> dup{{"room.jpg", {1.0}}, {"room.jpg", {2.0}}};
  CHECK_THROWS_WITH_AS(join_features({rec}, dup, splits), doctest::Contains("duplicate"),
                       std::invalid_argument);

  JoinSplits twice;
  twice.well = {"room.jpg"};
  twice.tentative = {"room.jpg"};
  CHECK_THROWS_AS(join_features({rec}, {{"room.jpg", {1.0}}}, twice), std::invalid_argument);

  JoinSplits none;
  CHECK_THROWS_AS(join_features({rec}, {{"room.jpg", {1.0}}}, none), std::invalid_argument);

  const JoinResult empty = join_features({}, {}, JoinSplits{});
  CHECK(empty.store.size() == 0);
}

TEST_CASE("detection, ground-truth, and model json round trips are lossless") {
  Rng rng(77);
  std::vector<DetectionRecord> dets;
  for (int i = 0; i < 30; ++i)
    dets.push_back({SampleId(rng.below(100)), ClassId(rng.below(5)), rng.uniform01(),
                    {0.1 * rng.uniform01(), 0.1 * rng.uniform01(), 0.3, 0.4}});
  const auto dj = detections_to_json(dets);
  const auto dets2 = detections_from_json(dj);
  REQUIRE(dets2.size() == dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    CHECK(dets2[i].sample_id == dets[i].sample_id);
    CHECK(dets2[i].score == dets[i].score);  // exact: shortest-round-trip floats
    CHECK(dets2[i].box == dets[i].box);
  }

  std::vector<GroundTruthRecord> recs{{"a.jpg", {{"chair", {0.1, 0.2, 0.3, 0.4}}}},
                                      {"b.jpg", {}}};
  const auto gj = ground_truth_to_json(recs);
  const auto recs2 = ground_truth_from_json(gj);
  REQUIRE(recs2.size() == 2);
  CHECK(recs2[0].source == "a.jpg");
  CHECK(recs2[0].objects[0].second == recs[0].objects[0].second);
  CHECK(recs2[1].objects.empty());

  DetectorModel m = DetectorModel::zeros(3, 2);
  for (std::size_t i = 0; i < m.weights.size(); ++i) m.weights[i] = rng.normal();
  const DetectorModel m2 = model_from_json(model_to_json(m));
  CHECK(m2 == m);
}

TEST_CASE("dataset json round trip preserves store content and order") {
  GenSpec spec = base_spec();
  spec.n_total = 60;
  const DatasetStore store = generate(spec);
  const auto j = DatasetIo::dataset_to_json(store, genspec_to_json(spec), 2);
  const auto loaded = DatasetIo::dataset_from_json(j);
  CHECK(loaded.num_classes == 2);
  CHECK(loaded.store.size() == store.size());
  CHECK(loaded.store.ids(Partition::tentative) == store.ids(Partition::tentative));
  const auto j2 = DatasetIo::dataset_to_json(loaded.store, genspec_to_json(spec), 2);
  CHECK(j.dump() == j2.dump());
}
