#include "iassl/core.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace iassl {

std::atomic<std::uint64_t> Sample::truth_reads_{0};

const char* partition_name(Partition p) {
  switch (p) {
    case Partition::well: return "well";
    case Partition::tentative: return "tentative";
    case Partition::validation: return "validation";
    case Partition::test: return "test";
  }
  return "?";
}

Partition partition_from_name(const std::string& name) {
  if (name == "well") return Partition::well;
  if (name == "tentative") return Partition::tentative;
  if (name == "validation") return Partition::validation;
  if (name == "test") return Partition::test;
  throw std::invalid_argument("unknown partition: " + name);
}

void DatasetStore::insert(Sample s, Partition p) {
  if (s.id < 0) throw std::invalid_argument("sample id must be non-negative");
  if (contains(s.id)) throw std::invalid_argument("duplicate sample id " + std::to_string(s.id));
  if (!samples_.empty() && s.features.size() != samples_.begin()->second.features.size())
    throw std::invalid_argument("feature dimension mismatch for sample " + std::to_string(s.id));
  if (p == Partition::well && !s.given_label.has_value())
    throw std::invalid_argument("well-labeled sample " + std::to_string(s.id) + " lacks a label");
  parts_[index(p)].push_back(s.id);
  samples_.emplace(s.id, std::move(s));
}

const Sample& DatasetStore::at(SampleId id) const {
  auto it = samples_.find(id);
  if (it == samples_.end()) throw std::out_of_range("no sample with id " + std::to_string(id));
  return it->second;
}

Sample& DatasetStore::at_mut(SampleId id) {
  auto it = samples_.find(id);
  if (it == samples_.end()) throw std::out_of_range("no sample with id " + std::to_string(id));
  return it->second;
}

Partition DatasetStore::partition_of(SampleId id) const {
  for (auto p : {Partition::well, Partition::tentative, Partition::validation, Partition::test}) {
    const auto& v = parts_[index(p)];
    if (std::find(v.begin(), v.end(), id) != v.end()) return p;
  }
  throw std::out_of_range("no sample with id " + std::to_string(id));
}

void DatasetStore::move(const std::vector<SampleId>& ids, Partition from, Partition to) {
  if (from == to) throw std::invalid_argument("promote: source and target partition are the same");
  auto& src = parts_[index(from)];
  std::unordered_set<SampleId> moving;
  for (SampleId id : ids) {
    if (std::find(src.begin(), src.end(), id) == src.end())
      throw std::invalid_argument("promote: id " + std::to_string(id) + " is not in partition " +
                                  partition_name(from));
    if (!moving.insert(id).second)
      throw std::invalid_argument("promote: duplicate id " + std::to_string(id));
    if (to == Partition::well && !at(id).given_label.has_value())
      throw std::invalid_argument("promote: sample " + std::to_string(id) +
                                  " has no label and cannot enter the well set");
  }
  src.erase(std::remove_if(src.begin(), src.end(), [&](SampleId id) { return moving.count(id) != 0; }),
            src.end());
  auto& dst = parts_[index(to)];
  for (SampleId id : ids) dst.push_back(id);
}

DatasetStore promote(DatasetStore store, const std::vector<SampleId>& ids, Partition from, Partition to) {
  store.move(ids, from, to);
  return store;
}

double distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace iassl
