#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coiner/features.hpp"
#include "json.hpp"

namespace coiner::ml {

using features::DocTermMatrix;
using features::SparseVector;

enum class Family {
  MultinomialNB,
  ComplementNB,
  KNN,
  LinearSVM,
  PolySVM,
  LogRegL2,
  LogRegSGD,
};

inline constexpr std::array<Family, 7> kAllFamilies = {
    Family::MultinomialNB, Family::ComplementNB, Family::KNN,
    Family::LinearSVM,     Family::PolySVM,      Family::LogRegL2,
    Family::LogRegSGD};

enum class Loss { Hinge, SquaredHinge };
enum class Penalty { L1, L2 };
// Which row representation a family is trained on. Auto = raw counts for the
// naive Bayes families, TF-IDF for the rest.
enum class InputKind { Auto, Counts, TfIdf };

std::string_view to_string(Family f);
std::string_view to_string(Loss l);
std::string_view to_string(Penalty p);
std::string_view to_string(InputKind k);
std::optional<Family> parse_family(std::string_view name);

struct Hyperparameters {
  double alpha = 1.0;
  int k = 1;
  double C = 1.0;
  Loss loss = Loss::Hinge;
  Penalty penalty = Penalty::L2;
  int degree = 3;
  double gamma = 1.0;
  double coef0 = 1.0;
  double lambda = 1.0;
  double learning_rate = 0.1;
  int epochs = 100;
  double tolerance = 1e-3;
  int max_iterations = 100000;

  bool operator==(const Hyperparameters&) const = default;
};

struct AlgorithmSpec {
  Family family = Family::MultinomialNB;
  Hyperparameters params;
  std::uint64_t seed = 42;
  InputKind input = InputKind::Auto;

  // Throws Error(Argument) naming the offending parameter.
  void validate() const;
  bool uses_counts() const;
  bool operator==(const AlgorithmSpec&) const = default;
};

AlgorithmSpec default_spec(Family family);

// Tunable parameter names accepted by set_parameter for a family.
std::vector<std::string> parameter_names(Family family);

// Parses value for the named parameter; throws Error(Argument) for unknown
// names, unparsable values or out-of-range values.
void set_parameter(AlgorithmSpec& spec, std::string_view name, std::string_view value);
std::string get_parameter(const AlgorithmSpec& spec, std::string_view name);

nlohmann::json to_json(const AlgorithmSpec& spec);
AlgorithmSpec spec_from_json(const nlohmann::json& j);

// Per-class scores aligned with the model's class list.
struct ScoreVector {
  std::vector<double> scores;
};

struct Prediction {
  int label = 0;
  double confidence = 0.0;
};

// Family-specific learner. Labels handed to fit are class positions in
// [0, num_classes), and scores come back in the same order.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual void fit(const DocTermMatrix& m, std::span<const int> positions,
                   std::size_t num_classes) = 0;
  virtual std::vector<double> scores(const SparseVector& x) const = 0;
  virtual bool probabilistic() const = 0;
  // Default: argmax of scores, ties to the lowest position.
  virtual std::size_t decide(const SparseVector& x, std::span<const double> scores) const;
  virtual nlohmann::json save() const = 0;
  virtual void load(const nlohmann::json& j) = 0;
};

// Relative gap below which two scores are treated as equal.
inline constexpr double kTieTolerance = 1e-10;

// First position whose value is within kTieTolerance of the maximum.
std::size_t argmax_first(std::span<const double> values);
std::vector<double> softmax(std::span<const double> values);

class MultinomialNB final : public Classifier {
 public:
  explicit MultinomialNB(double alpha = 1.0) : alpha_(alpha) {}

  void fit(const DocTermMatrix& m, std::span<const int> positions,
           std::size_t num_classes) override;
  // Running count update; equivalent to fit on the concatenated data.
  void partial_fit(const DocTermMatrix& m, std::span<const int> positions,
                   std::size_t num_classes);
  // Moves class statistics to new positions (old position i -> mapping[i]).
  void remap_classes(std::span<const std::size_t> mapping, std::size_t num_classes);

  std::vector<double> scores(const SparseVector& x) const override;
  std::vector<double> joint_log_likelihood(const SparseVector& x) const;
  std::size_t decide(const SparseVector& x, std::span<const double> scores) const override;
  bool probabilistic() const override { return true; }
  nlohmann::json save() const override;
  void load(const nlohmann::json& j) override;

  const std::vector<double>& log_prior() const { return log_prior_; }
  const std::vector<std::vector<double>>& log_theta() const { return log_theta_; }

 private:
  void refresh();

  double alpha_;
  std::size_t dimension_ = 0;
  std::vector<double> class_docs_;
  std::vector<std::vector<double>> feature_counts_;
  std::vector<double> log_prior_;
  std::vector<std::vector<double>> log_theta_;
};

class ComplementNB final : public Classifier {
 public:
  explicit ComplementNB(double alpha = 1.0) : alpha_(alpha) {}

  void fit(const DocTermMatrix& m, std::span<const int> positions,
           std::size_t num_classes) override;
  std::vector<double> scores(const SparseVector& x) const override;
  bool probabilistic() const override { return false; }
  nlohmann::json save() const override;
  void load(const nlohmann::json& j) override;

  // L1-normalised -log of the smoothed complement frequencies.
  const std::vector<std::vector<double>>& weights() const { return weights_; }

 private:
  double alpha_;
  std::vector<std::vector<double>> weights_;
};

struct Neighbor {
  std::size_t row;
  double similarity;
};

class Knn final : public Classifier {
 public:
  explicit Knn(int k = 1) : k_(k) {}

  void fit(const DocTermMatrix& m, std::span<const int> positions,
           std::size_t num_classes) override;
  // Vote counts among the k nearest rows by cosine similarity.
  std::vector<double> scores(const SparseVector& x) const override;
  std::vector<double> vote(const SparseVector& x, int k) const;
  // Rows ranked by descending similarity, ties to the lower row index.
  std::vector<Neighbor> neighbors(const SparseVector& x, int k) const;
  std::size_t decide(const SparseVector& x, std::span<const double> scores) const override;
  bool probabilistic() const override { return false; }
  nlohmann::json save() const override;
  void load(const nlohmann::json& j) override;

  int k() const { return k_; }

 private:
  int k_;
  std::size_t num_classes_ = 0;
  std::vector<SparseVector> rows_;
  std::vector<double> norms_;
  std::vector<int> labels_;
  std::size_t majority_ = 0;
};

// One binary scorer of a one-vs-rest linear model.
struct LinearScorer {
  std::vector<double> weights;
  double bias = 0.0;

  double decision(const SparseVector& x) const { return x.dot(weights) + bias; }
};

class LinearSvm final : public Classifier {
 public:
  explicit LinearSvm(const AlgorithmSpec& spec) : spec_(spec) {}

  void fit(const DocTermMatrix& m, std::span<const int> positions,
           std::size_t num_classes) override;
  std::vector<double> scores(const SparseVector& x) const override;
  bool probabilistic() const override { return false; }
  nlohmann::json save() const override;
  void load(const nlohmann::json& j) override;

  const std::vector<LinearScorer>& scorers() const { return scorers_; }
  // Objective of the best iterate after each epoch, per one-vs-rest problem.
  const std::vector<std::vector<double>>& objective_history() const { return history_; }

  // penalty + C * sum(loss(y_i (w.x_i + b))), y in {-1, +1}. The L2 penalty
  // is (|w|^2 + b^2) / 2; the L1 penalty |w|_1 leaves the bias free.
  static double objective(const DocTermMatrix& m, std::span<const double> y,
                          const LinearScorer& s, double C, Loss loss, Penalty penalty);
  static double loss_sum(const DocTermMatrix& m, std::span<const double> y,
                         const LinearScorer& s, Loss loss);

 private:
  AlgorithmSpec spec_;
  std::vector<LinearScorer> scorers_;
  std::vector<std::vector<double>> history_;
};

class PolySvm final : public Classifier {
 public:
  explicit PolySvm(const AlgorithmSpec& spec) : spec_(spec) {}

  void fit(const DocTermMatrix& m, std::span<const int> positions,
           std::size_t num_classes) override;
  std::vector<double> scores(const SparseVector& x) const override;
  bool probabilistic() const override { return false; }
  nlohmann::json save() const override;
  void load(const nlohmann::json& j) override;

  double kernel(const SparseVector& a, const SparseVector& b) const;

  // Dual solution of one-vs-rest problem c over the training rows.
  const std::vector<double>& alphas(std::size_t c) const { return alphas_[c]; }
  double bias(std::size_t c) const { return biases_[c]; }
  // Maximal KKT violation m(alpha) - M(alpha) at termination.
  double kkt_gap(std::size_t c) const { return gaps_[c]; }
  std::size_t iterations(std::size_t c) const { return iterations_[c]; }
  std::size_t support_vector_count() const { return support_.size(); }

 private:
  AlgorithmSpec spec_;
  std::vector<SparseVector> support_;
  // coefficients_[c][s] = alpha * y for support row s in problem c.
  std::vector<std::vector<double>> coefficients_;
  std::vector<double> biases_;
  // Training-time diagnostics; not persisted.
  std::vector<std::vector<double>> alphas_;
  std::vector<double> gaps_;
  std::vector<std::size_t> iterations_;
};

class LogisticRegression final : public Classifier {
 public:
  enum class Trainer { Batch, Sgd };

  LogisticRegression(const AlgorithmSpec& spec, Trainer trainer)
      : spec_(spec), trainer_(trainer) {}

  void fit(const DocTermMatrix& m, std::span<const int> positions,
           std::size_t num_classes) override;
  // One-vs-rest sigmoid outputs normalised to sum to one.
  std::vector<double> scores(const SparseVector& x) const override;
  bool probabilistic() const override { return true; }
  nlohmann::json save() const override;
  void load(const nlohmann::json& j) override;

  const std::vector<LinearScorer>& scorers() const { return scorers_; }

  // sum_i log(1 + exp(-y_i (w.x_i + b))) + lambda/2 |w|^2 with params =
  // [w..., b]; fills gradient (same layout) when non-null.
  static double objective(const DocTermMatrix& m, std::span<const double> y,
                          double lambda, std::span<const double> params,
                          std::vector<double>* gradient);

 private:
  AlgorithmSpec spec_;
  Trainer trainer_;
  std::vector<LinearScorer> scorers_;
};

std::unique_ptr<Classifier> make_classifier(const AlgorithmSpec& spec);

// An immutable fitted classifier over label ids (canonical class indices).
class TrainedModel {
 public:
  TrainedModel() = default;

  const AlgorithmSpec& spec() const { return spec_; }
  // Label ids seen in training, ascending.
  const std::vector<int>& classes() const { return classes_; }
  std::size_t dimension() const { return dimension_; }
  bool probabilistic() const { return impl_->probabilistic(); }

  ScoreVector score(const SparseVector& x) const;
  Prediction predict(const SparseVector& x) const;

  // Incremental update; only MultinomialNB supports it.
  TrainedModel partial_fit(const DocTermMatrix& m, std::span<const int> labels) const;

  template <typename T>
  const T* as() const {
    return dynamic_cast<const T*>(impl_.get());
  }

  nlohmann::json to_json() const;
  static TrainedModel from_json(const nlohmann::json& j);

  friend TrainedModel fit(const AlgorithmSpec& spec, const DocTermMatrix& m,
                          std::span<const int> labels);

 private:
  void check_dimension(const SparseVector& x) const;

  AlgorithmSpec spec_;
  std::vector<int> classes_;
  std::size_t dimension_ = 0;
  std::shared_ptr<const Classifier> impl_;
};

// Throws Error(Argument) on shape mismatches and Error(DegenerateTraining)
// when fewer than two rows or two distinct labels are given.
TrainedModel fit(const AlgorithmSpec& spec, const DocTermMatrix& m,
                 std::span<const int> labels);

ScoreVector mnb_score(const TrainedModel& model, const SparseVector& x);
ScoreVector cnb_score(const TrainedModel& model, const SparseVector& x);
ScoreVector knn_vote(const TrainedModel& model, const SparseVector& x, int k);

}  // namespace coiner::ml
