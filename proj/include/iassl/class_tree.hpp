#pragma once

#include <map>
#include <string>
#include <vector>

#include "iassl/detector.hpp"

namespace iassl {

enum class CaseTag { none, existing, combined, new_class };

const char* case_tag_name(CaseTag t);

struct TreeNode {
  int id = 0;
  std::string name;
  int parent = -1;  // -1 for the root
  int level = 0;    // 0 root, 1 super, 2 object, 3 sub
  CaseTag tag = CaseTag::none;
  std::vector<int> children;  // ascending node id
};

// Three-level taxonomy: super class / object class / sub class under a
// single root. Case tags live on object- and sub-class nodes only.
class ClassTree {
 public:
  // parent < 0 declares the root; exactly one root allowed.
  ClassTree& add(int id, const std::string& name, int parent, CaseTag tag = CaseTag::none);

  // Checks the three-level shape: every leaf at level 3, every non-root
  // reachable, tags only on levels 2 and 3.
  void validate() const;

  bool empty() const { return nodes_.empty(); }
  const TreeNode& node(int id) const;
  bool has_node(int id) const { return nodes_.count(id) != 0; }
  int root() const;
  const std::vector<int>& children(int id) const { return node(id).children; }

  bool is_chain(int sup, int obj, int sub) const;
  std::vector<std::array<int, 3>> all_chains() const;

  void set_tag(int id, CaseTag tag);

 private:
  std::map<int, TreeNode> nodes_;
  int root_ = -1;
};

// Per-node conditional classifiers. A model's class index is the position of
// the child in the parent's (id-ordered) child list. Nodes with a single
// child need no model: their conditional probability is 1. The sub level may
// carry R part models per object node; R = 1 is the plain-classifier case.
struct LevelModels {
  DetectorModel super_model;                            // over the root's children
  std::map<int, DetectorModel> object_models;           // keyed by super-class node id
  std::map<int, std::vector<DetectorModel>> sub_models;  // keyed by object-class node id
};

inline constexpr double kProbFloor = 1e-12;  // floor applied before logs

struct HierarchicalScore {
  double sup_term = 0.0;
  double obj_term = 0.0;
  std::vector<double> sub_terms;  // one per part
  double total = 0.0;
};

// Negative-log score of a root-to-leaf chain: -log p(sup|x) - log p(obj|sup,x)
// - sum_r log p_r(sub|obj,x). Probabilities are floored at kProbFloor.
HierarchicalScore hierarchical_score(const ClassTree& tree, const LevelModels& models,
                                     std::span<const double> x, int sup, int obj, int sub);

enum class PathStrategy { greedy, exact };

struct PathResult {
  int sup = 0;
  int obj = 0;
  int sub = 0;
  HierarchicalScore score;
};

// greedy: per-level arg-min of the term (beam width 1).
// exact: exhaustive minimization of the total over all chains; ties resolve
// to the lexicographically smallest (sup, obj, sub).
PathResult predict_path(const ClassTree& tree, const LevelModels& models, std::span<const double> x,
                        PathStrategy strategy = PathStrategy::greedy);

// likelihood >= tau_exist -> existing; [tau_new, tau_exist) -> combined;
// below tau_new -> new class.
CaseTag assign_case(double max_likelihood, double tau_exist = 0.7, double tau_new = 0.3);

// Same rule, applied to an object- or sub-class node of the tree.
CaseTag assign_case(ClassTree& tree, int node, double max_likelihood, double tau_exist = 0.7,
                    double tau_new = 0.3);

// Level labels for one training sample: the chain its leaf label implies.
struct ChainLabel {
  SampleId id = 0;
  int sup = 0;
  int obj = 0;
  int sub = 0;
};

// Joint training of all level models by block coordinate descent: blocks are
// the super, object and sub levels in that order; each block minimizer runs
// backtracking full-batch gradient descent on that level's cross-entropy,
// which cannot increase the joint objective. Samples are labeled by leaf
// (sub-class) node id.
struct HierarchyFit {
  LevelModels models;
  std::vector<double> trace;
  std::size_t cycles = 0;
};

HierarchyFit train_hierarchy(const ClassTree& tree, const std::vector<SampleId>& ids,
                             const DatasetStore& store, const BcdConfig& cfg);

}  // namespace iassl
