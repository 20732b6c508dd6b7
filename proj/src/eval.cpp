#include "iassl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "iassl/detector.hpp"

namespace iassl {

void rank_detections(std::vector<DetectionRecord>& dets) {
  std::sort(dets.begin(), dets.end(), [](const DetectionRecord& a, const DetectionRecord& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.sample_id != b.sample_id) return a.sample_id < b.sample_id;
    return a.cls < b.cls;
  });
}

std::vector<bool> match_detections(std::vector<DetectionRecord> dets,
                                   const std::vector<TruthRecord>& truths, double iou_thresh) {
  rank_detections(dets);
  std::vector<bool> used(truths.size(), false);
  std::vector<bool> flags(dets.size(), false);
  for (std::size_t d = 0; d < dets.size(); ++d) {
    const auto& det = dets[d];
    double best = -1.0;
    std::size_t best_t = truths.size();
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (used[t] || truths[t].sample_id != det.sample_id || truths[t].cls != det.cls) continue;
      const double ov = iou(det.box, truths[t].box);
      if (ov > best) {
        best = ov;
        best_t = t;
      }
    }
    if (best_t < truths.size() && best >= iou_thresh) {
      flags[d] = true;
      used[best_t] = true;
    }
  }
  return flags;
}

PrCurve pr_curve(const std::vector<bool>& flags, std::size_t n_truth) {
  if (n_truth == 0) throw std::invalid_argument("pr_curve: n_truth must be >= 1");
  PrCurve c;
  std::size_t tp = 0, fp = 0;
  for (bool f : flags) {
    f ? ++tp : ++fp;
    c.recall.push_back(static_cast<double>(tp) / static_cast<double>(n_truth));
    c.precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  c.ap_11pt = average_precision(flags, n_truth, ApVariant::elevenpoint);
  c.ap_all = average_precision(flags, n_truth, ApVariant::allpoint);
  return c;
}

double average_precision(const std::vector<bool>& flags, std::size_t n_truth, ApVariant variant) {
  if (n_truth == 0) throw std::invalid_argument("average_precision: n_truth must be >= 1");
  const std::size_t n = flags.size();
  std::vector<double> rec(n), pre(n);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    flags[i] ? ++tp : ++fp;
    rec[i] = static_cast<double>(tp) / static_cast<double>(n_truth);
    pre[i] = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }

  if (variant == ApVariant::elevenpoint) {
    double sum = 0.0;
    for (int k = 0; k <= 10; ++k) {
      const double t = k / 10.0;
      double pmax = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (rec[i] >= t - 1e-12) pmax = std::max(pmax, pre[i]);
      sum += pmax;
    }
    return sum / 11.0;
  }

  // all-point: area under the precision envelope
  std::vector<double> mrec{0.0};
  mrec.insert(mrec.end(), rec.begin(), rec.end());
  std::vector<double> mpre{0.0};
  mpre.insert(mpre.end(), pre.begin(), pre.end());
  for (std::size_t i = mpre.size() - 1; i >= 1; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < mrec.size(); ++i) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  return ap;
}

double mean_ap(const std::vector<DetectionRecord>& dets, const std::vector<TruthRecord>& truths,
               const std::vector<ClassId>& classes, ApVariant variant, double iou_thresh) {
  if (classes.empty()) throw std::invalid_argument("mean_ap: class list is empty");
  double sum = 0.0;
  std::size_t scored = 0;
  for (ClassId c : classes) {
    std::vector<TruthRecord> ct;
    for (const auto& t : truths)
      if (t.cls == c) ct.push_back(t);
    if (ct.empty()) continue;  // class absent from truth is excluded, not scored 0
    std::vector<DetectionRecord> cd;
    for (const auto& d : dets)
      if (d.cls == c) cd.push_back(d);
    const auto flags = match_detections(cd, ct, iou_thresh);
    sum += average_precision(flags, ct.size(), variant);
    ++scored;
  }
  if (scored == 0) throw std::invalid_argument("mean_ap: no listed class has any ground truth");
  return sum / static_cast<double>(scored);
}

std::vector<TruthRecord> Evaluator::truths_of(const DatasetStore& store, Partition part) const {
  std::vector<TruthRecord> out;
  for (SampleId id : store.ids(part)) {
    const Sample& s = store.at(id);
    if (!s.has_truth()) continue;
    const auto& t = s.truth(TruthKey{});
    out.push_back({id, t->cls, t->box});
  }
  return out;
}

std::vector<DetectionRecord> Evaluator::detect(const DetectorModel& model, const DatasetStore& store,
                                               Partition part) const {
  std::vector<DetectionRecord> out;
  out.reserve(store.ids(part).size());
  for (SampleId id : store.ids(part)) {
    const Sample& s = store.at(id);
    const DetectionScore d = score(model, s.features);
    out.push_back({id, d.top_class, d.f_x, d.box});
  }
  return out;
}

double Evaluator::map_on(const DetectorModel& model, const DatasetStore& store, Partition part) const {
  const auto truths = truths_of(store, part);
  std::set<ClassId> present;
  for (const auto& t : truths) present.insert(t.cls);
  const std::vector<ClassId> classes(present.begin(), present.end());
  const auto dets = detect(model, store, part);
  return mean_ap(dets, truths, classes, cfg_.variant, cfg_.iou_thresh);
}

}  // namespace iassl
