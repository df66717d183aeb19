#include <algorithm>
#include <cmath>
#include <numeric>

#include "coiner/classifiers.hpp"
#include "coiner/error.hpp"

namespace coiner::ml {

void MultinomialNB::fit(const DocTermMatrix& m, std::span<const int> positions,
                        std::size_t num_classes) {
  dimension_ = m.dimension;
  class_docs_.assign(num_classes, 0.0);
  feature_counts_.assign(num_classes, std::vector<double>(dimension_, 0.0));
  partial_fit(m, positions, num_classes);
}

void MultinomialNB::partial_fit(const DocTermMatrix& m, std::span<const int> positions,
                                std::size_t num_classes) {
  if (feature_counts_.empty()) dimension_ = m.dimension;
  if (m.dimension != dimension_) {
    throw Error(ErrorCode::Argument, "update dimension does not match the model");
  }
  if (class_docs_.size() < num_classes) {
    class_docs_.resize(num_classes, 0.0);
    feature_counts_.resize(num_classes, std::vector<double>(dimension_, 0.0));
  }
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    const auto c = static_cast<std::size_t>(positions[r]);
    class_docs_[c] += 1.0;
    for (const auto& e : m.rows[r].entries) {
      if (e.value < 0.0) {
        throw Error(ErrorCode::Argument, "multinomial naive Bayes needs nonnegative features");
      }
      feature_counts_[c][e.index] += e.value;
    }
  }
  refresh();
}

void MultinomialNB::remap_classes(std::span<const std::size_t> mapping,
                                  std::size_t num_classes) {
  std::vector<double> docs(num_classes, 0.0);
  std::vector<std::vector<double>> counts(num_classes, std::vector<double>(dimension_, 0.0));
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    docs[mapping[i]] = class_docs_[i];
    counts[mapping[i]] = std::move(feature_counts_[i]);
  }
  class_docs_ = std::move(docs);
  feature_counts_ = std::move(counts);
}

void MultinomialNB::refresh() {
  const std::size_t nc = class_docs_.size();
  const double total_docs = std::accumulate(class_docs_.begin(), class_docs_.end(), 0.0);
  log_prior_.assign(nc, 0.0);
  log_theta_.assign(nc, std::vector<double>(dimension_, 0.0));
  const double v = static_cast<double>(dimension_);
  for (std::size_t c = 0; c < nc; ++c) {
    // A class with no documents yet keeps -inf prior and never wins.
    log_prior_[c] = std::log(class_docs_[c] / total_docs);
    const double total = std::accumulate(feature_counts_[c].begin(),
                                         feature_counts_[c].end(), 0.0);
    const double denom = std::log(total + alpha_ * v);
    for (std::size_t i = 0; i < dimension_; ++i) {
      log_theta_[c][i] = std::log(feature_counts_[c][i] + alpha_) - denom;
    }
  }
}

std::vector<double> MultinomialNB::joint_log_likelihood(const SparseVector& x) const {
  std::vector<double> jll(log_prior_);
  for (std::size_t c = 0; c < jll.size(); ++c) {
    double s = 0.0;
    for (const auto& e : x.entries) s += e.value * log_theta_[c][e.index];
    jll[c] += s;
  }
  return jll;
}

std::vector<double> MultinomialNB::scores(const SparseVector& x) const {
  return softmax(joint_log_likelihood(x));
}

std::size_t MultinomialNB::decide(const SparseVector& x, std::span<const double>) const {
  // Decide on the log scale; exponentiation can merge nearly equal classes.
  return argmax_first(joint_log_likelihood(x));
}

nlohmann::json MultinomialNB::save() const {
  nlohmann::json j;
  j["alpha"] = alpha_;
  j["dimension"] = dimension_;
  j["class_docs"] = class_docs_;
  // Sparse per class: [[index, count], ...]
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& row : feature_counts_) {
    nlohmann::json sparse = nlohmann::json::array();
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i] != 0.0) sparse.push_back({i, row[i]});
    }
    counts.push_back(std::move(sparse));
  }
  j["feature_counts"] = std::move(counts);
  return j;
}

void MultinomialNB::load(const nlohmann::json& j) {
  alpha_ = j.at("alpha").get<double>();
  dimension_ = j.at("dimension").get<std::size_t>();
  class_docs_ = j.at("class_docs").get<std::vector<double>>();
  feature_counts_.assign(class_docs_.size(), std::vector<double>(dimension_, 0.0));
  const auto& counts = j.at("feature_counts");
  for (std::size_t c = 0; c < class_docs_.size(); ++c) {
    for (const auto& pair : counts.at(c)) {
      const auto idx = pair.at(0).get<std::size_t>();
      if (idx >= dimension_) throw Error(ErrorCode::Parse, "feature index out of range");
      feature_counts_[c][idx] = pair.at(1).get<double>();
    }
  }
  refresh();
}

void ComplementNB::fit(const DocTermMatrix& m, std::span<const int> positions,
                       std::size_t num_classes) {
  const std::size_t dim = m.dimension;
  std::vector<std::vector<double>> counts(num_classes, std::vector<double>(dim, 0.0));
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    const auto c = static_cast<std::size_t>(positions[r]);
    for (const auto& e : m.rows[r].entries) {
      if (e.value < 0.0) {
        throw Error(ErrorCode::Argument, "complement naive Bayes needs nonnegative features");
      }
      counts[c][e.index] += e.value;
    }
  }
  std::vector<double> all(dim, 0.0);
  for (const auto& row : counts) {
    for (std::size_t i = 0; i < dim; ++i) all[i] += row[i];
  }
  const double v = static_cast<double>(dim);
  weights_.assign(num_classes, std::vector<double>(dim, 0.0));
  for (std::size_t c = 0; c < num_classes; ++c) {
    double comp_total = 0.0;
    for (std::size_t i = 0; i < dim; ++i) comp_total += all[i] - counts[c][i];
    double l1 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double theta = (all[i] - counts[c][i] + alpha_) / (comp_total + alpha_ * v);
      weights_[c][i] = -std::log(theta);
      l1 += std::abs(weights_[c][i]);
    }
    if (l1 > 0.0) {
      for (auto& w : weights_[c]) w /= l1;
    }
  }
}

std::vector<double> ComplementNB::scores(const SparseVector& x) const {
  std::vector<double> out(weights_.size(), 0.0);
  for (std::size_t c = 0; c < weights_.size(); ++c) {
    double s = 0.0;
    for (const auto& e : x.entries) s += e.value * weights_[c][e.index];
    out[c] = s;
  }
  return out;
}

nlohmann::json ComplementNB::save() const {
  nlohmann::json j;
  j["alpha"] = alpha_;
  j["weights"] = weights_;
  return j;
}

void ComplementNB::load(const nlohmann::json& j) {
  alpha_ = j.at("alpha").get<double>();
  weights_ = j.at("weights").get<std::vector<std::vector<double>>>();
}

}  // namespace coiner::ml
