#include "iassl/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iassl/rng.hpp"

namespace iassl {

namespace {

constexpr double kMinBoxSide = 1e-3;

// logits_c = w_c . [x; 1]
void logits_of(const DetectorModel& m, std::span<const double> x, std::vector<double>& out) {
  const int d = m.dim;
  out.resize(m.num_classes);
  for (int c = 0; c < m.num_classes; ++c) {
    const double* w = &m.weights[static_cast<std::size_t>(c) * (d + 1)];
    double z = w[d];
    for (int i = 0; i < d; ++i) z += w[i] * x[i];
    out[c] = z;
  }
}

void raw_box_of(const DetectorModel& m, std::span<const double> x, double out[4]) {
  const int d = m.dim;
  for (int r = 0; r < 4; ++r) {
    const double* w = &m.loc_weights[static_cast<std::size_t>(r) * (d + 1)];
    double z = w[d];
    for (int i = 0; i < d; ++i) z += w[i] * x[i];
    out[r] = z;
  }
}

void softmax(std::vector<double>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

BoundingBox clamp_box(const double raw[4]) {
  BoundingBox b;
  b.w = std::clamp(raw[2], kMinBoxSide, 1.0);
  b.h = std::clamp(raw[3], kMinBoxSide, 1.0);
  b.x = std::clamp(raw[0], 0.0, 1.0 - b.w);
  b.y = std::clamp(raw[1], 0.0, 1.0 - b.h);
  return b;
}

}  // namespace

DetectorModel DetectorModel::zeros(int num_classes, int dim) {
  if (num_classes < 2) throw std::invalid_argument("DetectorModel: num_classes must be >= 2");
  if (dim < 1) throw std::invalid_argument("DetectorModel: dim must be >= 1");
  DetectorModel m;
  m.num_classes = num_classes;
  m.dim = dim;
  m.weights.assign(static_cast<std::size_t>(num_classes) * (dim + 1), 0.0);
  m.loc_weights.assign(static_cast<std::size_t>(4) * (dim + 1), 0.0);
  return m;
}

bool DetectorModel::finite() const {
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return ok(weights) && ok(loc_weights);
}

void DetectorModel::validate() const {
  if (num_classes < 2) throw std::invalid_argument("DetectorModel: num_classes must be >= 2");
  if (weights.size() != static_cast<std::size_t>(num_classes) * (dim + 1) ||
      loc_weights.size() != static_cast<std::size_t>(4) * (dim + 1))
    throw std::invalid_argument("DetectorModel: weight shapes do not match (C,d+1)/(4,d+1)");
  if (!finite()) throw std::invalid_argument("DetectorModel: non-finite weights");
}

DetectionScore score(const DetectorModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.dim)
    throw std::invalid_argument("score: feature dimension mismatch");

  DetectionScore s;
  logits_of(model, x, s.class_probs);
  softmax(s.class_probs);

  int top = 0;
  for (int c = 1; c < model.num_classes; ++c)
    if (s.class_probs[c] > s.class_probs[top]) top = c;
  double second = 0.0;
  for (int c = 0; c < model.num_classes; ++c)
    if (c != top) second = std::max(second, s.class_probs[c]);

  s.top_class = top;
  s.f_x = s.class_probs[top];
  s.margin = s.f_x - second;

  double raw[4];
  raw_box_of(model, x, raw);
  s.box = clamp_box(raw);
  return s;
}

LossGrad sample_loss_grad(const DetectorModel& model, std::span<const double> x, const GivenLabel& label,
                          double lambda_loc) {
  if (static_cast<int>(x.size()) != model.dim)
    throw std::invalid_argument("sample_loss_grad: feature dimension mismatch");
  if (label.cls < 0 || label.cls >= model.num_classes)
    throw std::invalid_argument("sample_loss_grad: class id out of range");

  const int d = model.dim;
  LossGrad out;
  out.grad.assign(model.param_count(), 0.0);

  std::vector<double> p;
  logits_of(model, x, p);
  softmax(p);
  const double p_true = std::max(p[label.cls], 1e-300);
  out.loss = -std::log(p_true);

  // d loss / d logit_c = p_c - [c == y]
  for (int c = 0; c < model.num_classes; ++c) {
    const double dz = p[c] - (c == label.cls ? 1.0 : 0.0);
    double* g = &out.grad[static_cast<std::size_t>(c) * (d + 1)];
    for (int i = 0; i < d; ++i) g[i] += dz * x[i];
    g[d] += dz;
  }

  double raw[4];
  raw_box_of(model, x, raw);
  const double target[4] = {label.box.x, label.box.y, label.box.w, label.box.h};
  const std::size_t loc_off = model.weights.size();
  for (int r = 0; r < 4; ++r) {
    const double diff = raw[r] - target[r];
    out.loss += lambda_loc * diff * diff;
    const double dz = 2.0 * lambda_loc * diff;
    double* g = &out.grad[loc_off + static_cast<std::size_t>(r) * (d + 1)];
    for (int i = 0; i < d; ++i) g[i] += dz * x[i];
    g[d] += dz;
  }
  return out;
}

LossGrad batch_loss_grad(const DetectorModel& model, const std::vector<SampleId>& ids,
                         const DatasetStore& store, double lambda_loc) {
  if (ids.empty()) throw std::invalid_argument("batch_loss_grad: empty id set");
  LossGrad total;
  total.grad.assign(model.param_count(), 0.0);
  for (SampleId id : ids) {
    const Sample& s = store.at(id);
    if (!s.given_label)
      throw std::invalid_argument("batch_loss_grad: sample " + std::to_string(id) + " has no label");
    const LossGrad lg = sample_loss_grad(model, s.features, *s.given_label, lambda_loc);
    total.loss += lg.loss;
    for (std::size_t i = 0; i < total.grad.size(); ++i) total.grad[i] += lg.grad[i];
  }
  const double inv = 1.0 / static_cast<double>(ids.size());
  total.loss *= inv;
  for (double& g : total.grad) g *= inv;
  return total;
}

DetectorModel train(const DetectorModel& model_init, const std::vector<SampleId>& train_ids,
                    const DatasetStore& store, const OptimizerConfig& opt, int epochs, double lambda_loc,
                    const EpochCallback& on_epoch) {
  model_init.validate();
  opt.validate();
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (train_ids.empty()) throw std::invalid_argument("train: empty training set");
  for (SampleId id : train_ids)
    if (!store.at(id).given_label)
      throw std::invalid_argument("train: sample " + std::to_string(id) + " has no label");

  DetectorModel model = model_init;
  const std::size_t n_cls = model.weights.size();

  // Separate Adam states per head step in lockstep, so bias correction is
  // identical to a single flat state.
  AdamState adam_cls = AdamState::zeros(n_cls);
  AdamState adam_loc = AdamState::zeros(model.loc_weights.size());
  Rng rng = Rng(opt.seed).derive(0x7261696eULL);  // training-order stream
  std::vector<SampleId> order = train_ids;

  for (int e = 0; e < epochs; ++e) {
    if (opt.shuffle) rng.shuffle(order);
    for (SampleId id : order) {
      const Sample& s = store.at(id);
      const LossGrad lg = sample_loss_grad(model, s.features, *s.given_label, lambda_loc);
      const std::span<const double> g_cls(lg.grad.data(), n_cls);
      const std::span<const double> g_loc(lg.grad.data() + n_cls, model.loc_weights.size());
      if (opt.kind == OptKind::sgd) {
        sgd_step_inplace(model.weights, g_cls, opt.lr);
        sgd_step_inplace(model.loc_weights, g_loc, opt.lr);
      } else {
        adam_step_inplace(adam_cls, model.weights, g_cls, opt);
        adam_step_inplace(adam_loc, model.loc_weights, g_loc, opt);
      }
    }
    if (on_epoch && !on_epoch(e + 1, batch_loss_grad(model, train_ids, store, lambda_loc).loss)) break;
  }
  return model;
}

DatasetStore pseudo_label(const DetectorModel& model, const std::vector<SampleId>& ids, DatasetStore store) {
  const auto& tentative = store.ids(Partition::tentative);
  for (SampleId id : ids)
    if (std::find(tentative.begin(), tentative.end(), id) == tentative.end())
      throw std::invalid_argument("pseudo_label: id " + std::to_string(id) + " is not tentative");

  for (SampleId id : ids) {
    Sample& s = store.at_mut(id);
    const DetectionScore d = score(model, s.features);
    if (s.given_label && s.given_label->provenance != Provenance::pseudo) s.prior_label = s.given_label;
    s.given_label = GivenLabel{d.top_class, d.box, Provenance::pseudo};
    s.pseudo_score = d.f_x;
  }
  return store;
}

}  // namespace iassl
