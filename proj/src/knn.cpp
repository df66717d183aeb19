#include <algorithm>
#include <cmath>

#include "coiner/classifiers.hpp"
#include "coiner/error.hpp"

namespace coiner::ml {

void Knn::fit(const DocTermMatrix& m, std::span<const int> positions,
              std::size_t num_classes) {
  num_classes_ = num_classes;
  rows_ = m.rows;
  labels_.assign(positions.begin(), positions.end());
  norms_.resize(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) norms_[i] = rows_[i].norm();
  std::vector<std::size_t> counts(num_classes, 0);
  for (int l : labels_) ++counts[static_cast<std::size_t>(l)];
  majority_ = static_cast<std::size_t>(
      std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::vector<Neighbor> Knn::neighbors(const SparseVector& x, int k) const {
  const double nx = x.norm();
  std::vector<Neighbor> all(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const double denom = nx * norms_[i];
    all[i] = {i, denom > 0.0 ? x.dot(rows_[i]) / denom : 0.0};
  }
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), all.size());
  std::stable_sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.similarity > b.similarity;
  });
  // Similarities within rounding of a group's leader are ties, ranked by row.
  for (std::size_t g = 0; g < take;) {
    const double floor = all[g].similarity - kTieTolerance * std::abs(all[g].similarity);
    std::size_t e = g + 1;
    while (e < all.size() && all[e].similarity >= floor) ++e;
    std::sort(all.begin() + static_cast<std::ptrdiff_t>(g), all.begin() + static_cast<std::ptrdiff_t>(e),
              [](const Neighbor& a, const Neighbor& b) { return a.row < b.row; });
    g = e;
  }
  all.resize(take);
  return all;
}

std::vector<double> Knn::vote(const SparseVector& x, int k) const {
  std::vector<double> votes(num_classes_, 0.0);
  if (x.empty()) return votes;
  for (const auto& n : neighbors(x, k)) {
    votes[static_cast<std::size_t>(labels_[n.row])] += 1.0;
  }
  return votes;
}

std::vector<double> Knn::scores(const SparseVector& x) const { return vote(x, k_); }

std::size_t Knn::decide(const SparseVector& x, std::span<const double> scores) const {
  if (x.empty()) return majority_;
  const double best = *std::max_element(scores.begin(), scores.end());
  // Among tied classes, the one whose first neighbour ranks highest wins.
  for (const auto& n : neighbors(x, k_)) {
    const auto c = static_cast<std::size_t>(labels_[n.row]);
    if (scores[c] == best) return c;
  }
  return argmax_first(scores);
}

nlohmann::json Knn::save() const {
  nlohmann::json j;
  j["k"] = k_;
  j["num_classes"] = num_classes_;
  j["labels"] = labels_;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rows_) {
    nlohmann::json sparse = nlohmann::json::array();
    for (const auto& e : r.entries) sparse.push_back({e.index, e.value});
    rows.push_back(std::move(sparse));
  }
  j["dimension"] = rows_.empty() ? 0 : rows_.front().dimension;
  j["rows"] = std::move(rows);
  return j;
}

void Knn::load(const nlohmann::json& j) {
  k_ = j.at("k").get<int>();
  const auto num_classes = j.at("num_classes").get<std::size_t>();
  const auto dim = j.at("dimension").get<std::size_t>();
  const auto labels = j.at("labels").get<std::vector<int>>();
  DocTermMatrix m;
  m.dimension = dim;
  for (const auto& sparse : j.at("rows")) {
    SparseVector v;
    v.dimension = dim;
    for (const auto& pair : sparse) {
      v.entries.push_back({pair.at(0).get<std::uint32_t>(), pair.at(1).get<double>()});
    }
    m.rows.push_back(std::move(v));
  }
  if (labels.size() != m.rows.size()) throw Error(ErrorCode::Parse, "KNN label count mismatch");
  fit(m, labels, num_classes);
}

}  // namespace coiner::ml
