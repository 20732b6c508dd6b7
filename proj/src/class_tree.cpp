#include "iassl/class_tree.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace iassl {

const char* case_tag_name(CaseTag t) {
  switch (t) {
    case CaseTag::none: return "none";
    case CaseTag::existing: return "existing";
    case CaseTag::combined: return "combined";
    case CaseTag::new_class: return "new";
  }
  return "?";
}

ClassTree& ClassTree::add(int id, const std::string& name, int parent, CaseTag tag) {
  if (nodes_.count(id)) throw std::invalid_argument("ClassTree: duplicate node id " + std::to_string(id));
  TreeNode n;
  n.id = id;
  n.name = name;
  n.tag = tag;
  if (parent < 0) {
    if (root_ >= 0) throw std::invalid_argument("ClassTree: second root");
    n.parent = -1;
    n.level = 0;
    root_ = id;
  } else {
    auto it = nodes_.find(parent);
    if (it == nodes_.end())
      throw std::invalid_argument("ClassTree: parent " + std::to_string(parent) + " not found");
    n.parent = parent;
    n.level = it->second.level + 1;
    if (n.level > 3) throw std::invalid_argument("ClassTree: depth exceeds three levels");
    auto& ch = it->second.children;
    ch.insert(std::upper_bound(ch.begin(), ch.end(), id), id);
  }
  nodes_.emplace(id, std::move(n));
  return *this;
}

void ClassTree::validate() const {
  if (root_ < 0) throw std::invalid_argument("ClassTree: no root");
  for (const auto& [id, n] : nodes_) {
    if (n.level < 3 && n.children.empty())
      throw std::invalid_argument("ClassTree: node " + std::to_string(id) + " is a leaf above level 3");
    if (n.tag != CaseTag::none && n.level != 2 && n.level != 3)
      throw std::invalid_argument("ClassTree: case tag on level-" + std::to_string(n.level) + " node " +
                                  std::to_string(id));
  }
}

const TreeNode& ClassTree::node(int id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw std::out_of_range("ClassTree: no node " + std::to_string(id));
  return it->second;
}

int ClassTree::root() const {
  if (root_ < 0) throw std::out_of_range("ClassTree: empty tree");
  return root_;
}

bool ClassTree::is_chain(int sup, int obj, int sub) const {
  if (!has_node(sup) || !has_node(obj) || !has_node(sub)) return false;
  return node(sup).level == 1 && node(sup).parent == root_ && node(obj).parent == sup &&
         node(sub).parent == obj;
}

std::vector<std::array<int, 3>> ClassTree::all_chains() const {
  std::vector<std::array<int, 3>> out;
  for (int sup : children(root()))
    for (int obj : children(sup))
      for (int sub : children(obj)) out.push_back({sup, obj, sub});
  return out;
}

void ClassTree::set_tag(int id, CaseTag tag) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw std::out_of_range("ClassTree: no node " + std::to_string(id));
  if (tag != CaseTag::none && it->second.level != 2 && it->second.level != 3)
    throw std::invalid_argument("ClassTree: case tags belong on object/sub nodes");
  it->second.tag = tag;
}

namespace {

std::size_t child_index(const std::vector<int>& children, int id) {
  const auto it = std::find(children.begin(), children.end(), id);
  if (it == children.end()) throw std::invalid_argument("ClassTree: not a child: " + std::to_string(id));
  return static_cast<std::size_t>(it - children.begin());
}

// -log p(child | x) under the node's conditional model; 0 for an only child.
double term_of(const DetectorModel* model, const std::vector<int>& children, int child,
               std::span<const double> x) {
  const std::size_t idx = child_index(children, child);
  if (children.size() == 1) return 0.0;
  if (!model) throw std::invalid_argument("hierarchical_score: missing level model");
  if (model->num_classes != static_cast<int>(children.size()))
    throw std::invalid_argument("hierarchical_score: model class count does not match children");
  const DetectionScore s = score(*model, x);
  return -std::log(std::max(s.class_probs[idx], kProbFloor));
}

const DetectorModel* find_model(const std::map<int, DetectorModel>& m, int key) {
  const auto it = m.find(key);
  return it == m.end() ? nullptr : &it->second;
}

}  // namespace

HierarchicalScore hierarchical_score(const ClassTree& tree, const LevelModels& models,
                                     std::span<const double> x, int sup, int obj, int sub) {
  if (!tree.is_chain(sup, obj, sub))
    throw std::invalid_argument("hierarchical_score: not a root-to-leaf chain");

  HierarchicalScore hs;
  const auto& supers = tree.children(tree.root());
  hs.sup_term = term_of(supers.size() > 1 ? &models.super_model : nullptr, supers, sup, x);

  const auto& objs = tree.children(sup);
  hs.obj_term = term_of(find_model(models.object_models, sup), objs, obj, x);

  const auto& subs = tree.children(obj);
  if (subs.size() == 1) {
    hs.sub_terms.assign(1, 0.0);
  } else {
    const auto it = models.sub_models.find(obj);
    if (it == models.sub_models.end() || it->second.empty())
      throw std::invalid_argument("hierarchical_score: missing sub-level model");
    for (const DetectorModel& part : it->second) hs.sub_terms.push_back(term_of(&part, subs, sub, x));
  }

  hs.total = hs.sup_term + hs.obj_term;
  for (double t : hs.sub_terms) hs.total += t;
  return hs;
}

namespace {

// arg-min of the level term over children; ties go to the lowest child id.
int greedy_pick(const DetectorModel* model, const std::vector<int>& children, std::span<const double> x) {
  if (children.size() == 1) return children[0];
  if (!model) throw std::invalid_argument("predict_path: missing level model");
  const DetectionScore s = score(*model, x);
  std::size_t best = 0;
  for (std::size_t i = 1; i < children.size(); ++i)
    if (s.class_probs[i] > s.class_probs[best]) best = i;
  return children[best];
}

int greedy_pick_sub(const std::vector<DetectorModel>& parts, const std::vector<int>& children,
                    std::span<const double> x) {
  if (children.size() == 1) return children[0];
  if (parts.empty()) throw std::invalid_argument("predict_path: missing sub-level model");
  std::vector<double> term(children.size(), 0.0);
  for (const DetectorModel& part : parts) {
    const DetectionScore s = score(part, x);
    for (std::size_t i = 0; i < children.size(); ++i)
      term[i] += -std::log(std::max(s.class_probs[i], kProbFloor));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < children.size(); ++i)
    if (term[i] < term[best]) best = i;
  return children[best];
}

}  // namespace

PathResult predict_path(const ClassTree& tree, const LevelModels& models, std::span<const double> x,
                        PathStrategy strategy) {
  if (tree.empty()) throw std::invalid_argument("predict_path: empty tree");
  tree.validate();

  PathResult r;
  if (strategy == PathStrategy::exact) {
    const auto chains = tree.all_chains();
    if (chains.empty()) throw std::invalid_argument("predict_path: tree has no chains");
    bool first = true;
    for (const auto& c : chains) {
      const HierarchicalScore hs = hierarchical_score(tree, models, x, c[0], c[1], c[2]);
      if (first || hs.total < r.score.total) {
        r = {c[0], c[1], c[2], hs};
        first = false;
      }
    }
    return r;
  }

  const int sup = greedy_pick(tree.children(tree.root()).size() > 1 ? &models.super_model : nullptr,
                              tree.children(tree.root()), x);
  const int obj = greedy_pick(find_model(models.object_models, sup), tree.children(sup), x);
  const auto sub_it = models.sub_models.find(obj);
  static const std::vector<DetectorModel> kNoParts;
  const int sub = greedy_pick_sub(sub_it == models.sub_models.end() ? kNoParts : sub_it->second,
                                  tree.children(obj), x);
  return {sup, obj, sub, hierarchical_score(tree, models, x, sup, obj, sub)};
}

CaseTag assign_case(double max_likelihood, double tau_exist, double tau_new) {
  if (!(tau_new < tau_exist)) throw std::invalid_argument("assign_case: requires tau_new < tau_exist");
  if (max_likelihood < 0.0 || max_likelihood > 1.0)
    throw std::invalid_argument("assign_case: likelihood outside [0,1]");
  if (max_likelihood >= tau_exist) return CaseTag::existing;
  if (max_likelihood >= tau_new) return CaseTag::combined;
  return CaseTag::new_class;
}

CaseTag assign_case(ClassTree& tree, int node, double max_likelihood, double tau_exist, double tau_new) {
  const CaseTag tag = assign_case(max_likelihood, tau_exist, tau_new);
  tree.set_tag(node, tag);
  return tag;
}

namespace {

struct LevelProblem {
  DetectorModel* model = nullptr;                       // classification head only
  std::vector<std::pair<SampleId, int>> labeled;        // (sample, class index)
};

double problem_loss_grad(const LevelProblem& p, const DatasetStore& store, std::vector<double>* grad) {
  const std::size_t n_w = p.model->weights.size();
  if (grad) grad->assign(n_w, 0.0);
  if (p.labeled.empty()) return 0.0;
  double loss = 0.0;
  const GivenLabel dummy_box{0, BoundingBox{0, 0, 1, 1}, Provenance::initial};
  for (const auto& [id, cls] : p.labeled) {
    GivenLabel lbl = dummy_box;
    lbl.cls = cls;
    const LossGrad lg = sample_loss_grad(*p.model, store.at(id).features, lbl, /*lambda_loc=*/0.0);
    loss += lg.loss;
    if (grad)
      for (std::size_t i = 0; i < n_w; ++i) (*grad)[i] += lg.grad[i];
  }
  const double inv = 1.0 / static_cast<double>(p.labeled.size());
  if (grad)
    for (double& g : *grad) g *= inv;
  return loss * inv;
}

// One block: every problem of a level. Params are the concatenated
// classification weights.
struct LevelBlock {
  std::vector<LevelProblem> problems;

  std::vector<double> pack() const {
    std::vector<double> out;
    for (const auto& p : problems) out.insert(out.end(), p.model->weights.begin(), p.model->weights.end());
    return out;
  }
  void unpack(const std::vector<double>& flat) {
    std::size_t off = 0;
    for (auto& p : problems) {
      std::copy(flat.begin() + off, flat.begin() + off + p.model->weights.size(), p.model->weights.begin());
      off += p.model->weights.size();
    }
  }

  double loss_grad(const DatasetStore& store, std::vector<double>* grad, double l2) const {
    double loss = 0.0;
    std::size_t off = 0;
    if (grad) grad->assign(pack_size(), 0.0);
    for (const auto& p : problems) {
      std::vector<double> g;
      loss += problem_loss_grad(p, store, grad ? &g : nullptr);
      if (grad) std::copy(g.begin(), g.end(), grad->begin() + off);
      off += p.model->weights.size();
    }
    if (l2 > 0.0) {
      off = 0;
      for (const auto& p : problems)
        for (std::size_t i = 0; i < p.model->weights.size(); ++i, ++off) {
          loss += l2 * p.model->weights[i] * p.model->weights[i];
          if (grad) (*grad)[off] += 2.0 * l2 * p.model->weights[i];
        }
    }
    return loss;
  }

  std::size_t pack_size() const {
    std::size_t n = 0;
    for (const auto& p : problems) n += p.model->weights.size();
    return n;
  }
};

// Backtracking full-batch gradient descent; never increases the objective.
void backtracking_descent(LevelBlock& block, const DatasetStore& store, double l2, int max_steps) {
  for (int step = 0; step < max_steps; ++step) {
    std::vector<double> grad;
    const double loss = block.loss_grad(store, &grad, l2);
    double gnorm2 = 0.0;
    for (double g : grad) gnorm2 += g * g;
    if (gnorm2 < 1e-18) return;

    std::vector<double> theta = block.pack();
    double t = 1.0;
    while (t > 1e-12) {
      std::vector<double> trial(theta.size());
      for (std::size_t i = 0; i < theta.size(); ++i) trial[i] = theta[i] - t * grad[i];
      block.unpack(trial);
      const double new_loss = block.loss_grad(store, nullptr, l2);
      if (new_loss <= loss - 1e-4 * t * gnorm2) break;
      t *= 0.5;
    }
    if (t <= 1e-12) {
      block.unpack(theta);  // no usable step
      return;
    }
  }
}

}  // namespace

HierarchyFit train_hierarchy(const ClassTree& tree, const std::vector<SampleId>& ids,
                             const DatasetStore& store, const BcdConfig& cfg) {
  tree.validate();
  if (ids.empty()) throw std::invalid_argument("train_hierarchy: empty training set");
  const int dim = static_cast<int>(store.at(ids.front()).features.size());

  HierarchyFit fit;
  LevelModels& models = fit.models;

  const auto& supers = tree.children(tree.root());
  if (supers.size() > 1) models.super_model = DetectorModel::zeros(static_cast<int>(supers.size()), dim);
  for (int sup : supers) {
    const auto& objs = tree.children(sup);
    if (objs.size() > 1) models.object_models[sup] = DetectorModel::zeros(static_cast<int>(objs.size()), dim);
    for (int obj : objs) {
      const auto& subs = tree.children(obj);
      if (subs.size() > 1)
        models.sub_models[obj] = {DetectorModel::zeros(static_cast<int>(subs.size()), dim)};
    }
  }

  // Leaf labels imply the whole chain.
  std::vector<ChainLabel> chains;
  for (SampleId id : ids) {
    const Sample& s = store.at(id);
    if (!s.given_label)
      throw std::invalid_argument("train_hierarchy: sample " + std::to_string(id) + " has no label");
    const int sub = s.given_label->cls;
    if (!tree.has_node(sub) || tree.node(sub).level != 3)
      throw std::invalid_argument("train_hierarchy: label of sample " + std::to_string(id) +
                                  " is not a sub-class node");
    const int obj = tree.node(sub).parent;
    const int sup = tree.node(obj).parent;
    chains.push_back({id, sup, obj, sub});
  }

  LevelBlock sup_block, obj_block, sub_block;
  if (supers.size() > 1) {
    LevelProblem p;
    p.model = &models.super_model;
    for (const auto& c : chains)
      p.labeled.push_back({c.id, static_cast<int>(child_index(supers, c.sup))});
    sup_block.problems.push_back(std::move(p));
  }
  for (auto& [sup, model] : models.object_models) {
    LevelProblem p;
    p.model = &model;
    for (const auto& c : chains)
      if (c.sup == sup) p.labeled.push_back({c.id, static_cast<int>(child_index(tree.children(sup), c.obj))});
    obj_block.problems.push_back(std::move(p));
  }
  for (auto& [obj, parts] : models.sub_models) {
    for (auto& part : parts) {
      LevelProblem p;
      p.model = &part;
      for (const auto& c : chains)
        if (c.obj == obj)
          p.labeled.push_back({c.id, static_cast<int>(child_index(tree.children(obj), c.sub))});
      sub_block.problems.push_back(std::move(p));
    }
  }

  std::array<LevelBlock*, 3> level_blocks{&sup_block, &obj_block, &sub_block};
  std::vector<BcdBlock> blocks(3);
  for (std::size_t i = 0; i < 3; ++i) {
    LevelBlock* lb = level_blocks[i];
    const double l2 = i == 0 ? cfg.lambda1 : cfg.lambda2;
    blocks[i].params = lb->pack();
    blocks[i].minimize = [lb, &store, l2](const BlockParams& all, std::size_t idx) {
      lb->unpack(all[idx]);
      backtracking_descent(*lb, store, l2, /*max_steps=*/20);
      return lb->pack();
    };
  }

  auto objective = [&](const BlockParams& all) {
    for (std::size_t i = 0; i < 3; ++i) level_blocks[i]->unpack(all[i]);
    double loss = 0.0;
    for (const LevelBlock* lb : level_blocks) loss += lb->loss_grad(store, nullptr, 0.0);
    return loss;
  };

  const BcdResult res = bcd_minimize(blocks, objective, cfg);
  for (std::size_t i = 0; i < 3; ++i) level_blocks[i]->unpack(res.params[i]);
  fit.trace = res.trace;
  fit.cycles = res.cycles;
  return fit;
}

}  // namespace iassl
