#include "coiner/classifiers.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "coiner/error.hpp"

namespace coiner::ml {

namespace {

[[noreturn]] void bad_param(std::string_view name, const std::string& why) {
  throw Error(ErrorCode::Argument, "invalid hyperparameter '" + std::string(name) + "': " + why);
}

double parse_double(std::string_view name, std::string_view value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
    bad_param(name, "'" + std::string(value) + "' is not a finite number");
  }
  return out;
}

int parse_int(std::string_view name, std::string_view value) {
  // Accept integral doubles such as "3.0" coming from JSON grids.
  const double d = parse_double(name, value);
  if (d != std::floor(d) || std::abs(d) > 1e9) {
    bad_param(name, "'" + std::string(value) + "' is not an integer");
  }
  return static_cast<int>(d);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string_view to_string(Family f) {
  switch (f) {
    case Family::MultinomialNB: return "MultinomialNB";
    case Family::ComplementNB: return "ComplementNB";
    case Family::KNN: return "KNN";
    case Family::LinearSVM: return "LinearSVM";
    case Family::PolySVM: return "PolySVM";
    case Family::LogRegL2: return "LogRegL2";
    case Family::LogRegSGD: return "LogRegSGD";
  }
  return "?";
}

std::string_view to_string(Loss l) { return l == Loss::Hinge ? "hinge" : "squared-hinge"; }
std::string_view to_string(Penalty p) { return p == Penalty::L1 ? "l1" : "l2"; }

std::string_view to_string(InputKind k) {
  switch (k) {
    case InputKind::Auto: return "auto";
    case InputKind::Counts: return "counts";
    case InputKind::TfIdf: return "tfidf";
  }
  return "?";
}

std::optional<Family> parse_family(std::string_view name) {
  for (Family f : kAllFamilies) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

bool AlgorithmSpec::uses_counts() const {
  if (input == InputKind::Counts) return true;
  if (input == InputKind::TfIdf) return false;
  return family == Family::MultinomialNB || family == Family::ComplementNB;
}

AlgorithmSpec default_spec(Family family) {
  AlgorithmSpec spec;
  spec.family = family;
  auto& p = spec.params;
  switch (family) {
    case Family::LinearSVM:
      p.learning_rate = 0.1;
      p.epochs = 100;
      break;
    case Family::PolySVM:
      p.tolerance = 1e-3;
      p.max_iterations = 100000;
      break;
    case Family::LogRegL2:
      p.lambda = 1.0;
      p.tolerance = 1e-5;
      p.max_iterations = 1000;
      break;
    case Family::LogRegSGD:
      p.lambda = 1e-4;
      p.learning_rate = 0.5;
      p.epochs = 30;
      break;
    default:
      break;
  }
  return spec;
}

std::vector<std::string> parameter_names(Family family) {
  switch (family) {
    case Family::MultinomialNB:
    case Family::ComplementNB:
      return {"alpha", "input"};
    case Family::KNN:
      return {"k", "input"};
    case Family::LinearSVM:
      return {"C", "loss", "penalty", "learning_rate", "epochs", "input"};
    case Family::PolySVM:
      return {"C", "degree", "gamma", "coef0", "tolerance", "max_iterations", "input"};
    case Family::LogRegL2:
      return {"lambda", "tolerance", "max_iterations", "input"};
    case Family::LogRegSGD:
      return {"lambda", "learning_rate", "epochs", "input"};
  }
  return {};
}

void set_parameter(AlgorithmSpec& spec, std::string_view name, std::string_view value) {
  const auto names = parameter_names(spec.family);
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    bad_param(name, "not a parameter of " + std::string(to_string(spec.family)));
  }
  auto& p = spec.params;
  if (name == "alpha") {
    p.alpha = parse_double(name, value);
  } else if (name == "k") {
    p.k = parse_int(name, value);
  } else if (name == "C") {
    p.C = parse_double(name, value);
  } else if (name == "loss") {
    if (value == "hinge") p.loss = Loss::Hinge;
    else if (value == "squared-hinge" || value == "squared_hinge") p.loss = Loss::SquaredHinge;
    else bad_param(name, "expected hinge or squared-hinge, got '" + std::string(value) + "'");
  } else if (name == "penalty") {
    if (value == "l1" || value == "L1") p.penalty = Penalty::L1;
    else if (value == "l2" || value == "L2") p.penalty = Penalty::L2;
    else bad_param(name, "expected l1 or l2, got '" + std::string(value) + "'");
  } else if (name == "degree") {
    p.degree = parse_int(name, value);
  } else if (name == "gamma") {
    p.gamma = parse_double(name, value);
  } else if (name == "coef0") {
    p.coef0 = parse_double(name, value);
  } else if (name == "lambda") {
    p.lambda = parse_double(name, value);
  } else if (name == "learning_rate") {
    p.learning_rate = parse_double(name, value);
  } else if (name == "epochs") {
    p.epochs = parse_int(name, value);
  } else if (name == "tolerance") {
    p.tolerance = parse_double(name, value);
  } else if (name == "max_iterations") {
    p.max_iterations = parse_int(name, value);
  } else if (name == "input") {
    if (value == "auto") spec.input = InputKind::Auto;
    else if (value == "counts") spec.input = InputKind::Counts;
    else if (value == "tfidf") spec.input = InputKind::TfIdf;
    else bad_param(name, "expected auto, counts or tfidf, got '" + std::string(value) + "'");
  }
  spec.validate();
}

std::string get_parameter(const AlgorithmSpec& spec, std::string_view name) {
  const auto& p = spec.params;
  if (name == "alpha") return format_double(p.alpha);
  if (name == "k") return std::to_string(p.k);
  if (name == "C") return format_double(p.C);
  if (name == "loss") return std::string(to_string(p.loss));
  if (name == "penalty") return std::string(to_string(p.penalty));
  if (name == "degree") return std::to_string(p.degree);
  if (name == "gamma") return format_double(p.gamma);
  if (name == "coef0") return format_double(p.coef0);
  if (name == "lambda") return format_double(p.lambda);
  if (name == "learning_rate") return format_double(p.learning_rate);
  if (name == "epochs") return std::to_string(p.epochs);
  if (name == "tolerance") return format_double(p.tolerance);
  if (name == "max_iterations") return std::to_string(p.max_iterations);
  if (name == "input") return std::string(to_string(spec.input));
  bad_param(name, "unknown parameter");
}

void AlgorithmSpec::validate() const {
  const auto& p = params;
  auto require = [](bool ok, std::string_view name, const char* why) {
    if (!ok) bad_param(name, why);
  };
  switch (family) {
    case Family::MultinomialNB:
    case Family::ComplementNB:
      require(p.alpha > 0.0, "alpha", "must be > 0");
      break;
    case Family::KNN:
      require(p.k >= 1, "k", "must be >= 1");
      break;
    case Family::LinearSVM:
      require(p.C > 0.0, "C", "must be > 0");
      require(p.learning_rate > 0.0, "learning_rate", "must be > 0");
      require(p.epochs >= 1, "epochs", "must be >= 1");
      break;
    case Family::PolySVM:
      require(p.C > 0.0, "C", "must be > 0");
      require(p.degree >= 1 && p.degree <= 10, "degree", "must be in [1, 10]");
      require(p.gamma > 0.0, "gamma", "must be > 0");
      require(std::isfinite(p.coef0), "coef0", "must be finite");
      require(p.tolerance > 0.0, "tolerance", "must be > 0");
      require(p.max_iterations >= 1, "max_iterations", "must be >= 1");
      break;
    case Family::LogRegL2:
      require(p.lambda >= 0.0, "lambda", "must be >= 0");
      require(p.tolerance > 0.0, "tolerance", "must be > 0");
      require(p.max_iterations >= 1, "max_iterations", "must be >= 1");
      break;
    case Family::LogRegSGD:
      require(p.lambda >= 0.0, "lambda", "must be >= 0");
      require(p.learning_rate > 0.0, "learning_rate", "must be > 0");
      require(p.epochs >= 1, "epochs", "must be >= 1");
      break;
  }
}

nlohmann::json to_json(const AlgorithmSpec& spec) {
  nlohmann::json params = nlohmann::json::object();
  const auto& p = spec.params;
  for (const auto& name : parameter_names(spec.family)) {
    if (name == "input") continue;
    if (name == "alpha") params[name] = p.alpha;
    else if (name == "k") params[name] = p.k;
    else if (name == "C") params[name] = p.C;
    else if (name == "loss") params[name] = std::string(to_string(p.loss));
    else if (name == "penalty") params[name] = std::string(to_string(p.penalty));
    else if (name == "degree") params[name] = p.degree;
    else if (name == "gamma") params[name] = p.gamma;
    else if (name == "coef0") params[name] = p.coef0;
    else if (name == "lambda") params[name] = p.lambda;
    else if (name == "learning_rate") params[name] = p.learning_rate;
    else if (name == "epochs") params[name] = p.epochs;
    else if (name == "tolerance") params[name] = p.tolerance;
    else if (name == "max_iterations") params[name] = p.max_iterations;
  }
  nlohmann::json j;
  j["family"] = std::string(to_string(spec.family));
  j["params"] = params;
  j["input"] = std::string(to_string(spec.input));
  j["seed"] = spec.seed;
  return j;
}

AlgorithmSpec spec_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string()) {
    throw Error(ErrorCode::Parse, "algorithm spec needs a 'family' string");
  }
  const auto name = j["family"].get<std::string>();
  const auto family = parse_family(name);
  if (!family) throw Error(ErrorCode::Argument, "unknown algorithm family '" + name + "'");
  AlgorithmSpec spec = default_spec(*family);
  if (auto it = j.find("params"); it != j.end()) {
    for (const auto& [key, value] : it->items()) {
      const std::string text = value.is_string() ? value.get<std::string>() : value.dump();
      set_parameter(spec, key, text);
    }
  }
  if (auto it = j.find("input"); it != j.end()) {
    set_parameter(spec, "input", it->get<std::string>());
  }
  if (auto it = j.find("seed"); it != j.end()) spec.seed = it->get<std::uint64_t>();
  spec.validate();
  return spec;
}

std::size_t argmax_first(std::span<const double> values) {
  if (values.empty()) return 0;
  const double mx = *std::max_element(values.begin(), values.end());
  // Values that differ from the maximum only by rounding count as tied.
  const double slack = kTieTolerance * std::abs(mx);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= mx - slack) return i;
  }
  return 0;
}

std::vector<double> softmax(std::span<const double> values) {
  std::vector<double> out(values.size());
  if (values.empty()) return out;
  const double mx = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::exp(values[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

std::size_t Classifier::decide(const SparseVector&, std::span<const double> scores) const {
  return argmax_first(scores);
}

std::unique_ptr<Classifier> make_classifier(const AlgorithmSpec& spec) {
  switch (spec.family) {
    case Family::MultinomialNB: return std::make_unique<MultinomialNB>(spec.params.alpha);
    case Family::ComplementNB: return std::make_unique<ComplementNB>(spec.params.alpha);
    case Family::KNN: return std::make_unique<Knn>(spec.params.k);
    case Family::LinearSVM: return std::make_unique<LinearSvm>(spec);
    case Family::PolySVM: return std::make_unique<PolySvm>(spec);
    case Family::LogRegL2:
      return std::make_unique<LogisticRegression>(spec, LogisticRegression::Trainer::Batch);
    case Family::LogRegSGD:
      return std::make_unique<LogisticRegression>(spec, LogisticRegression::Trainer::Sgd);
  }
  throw Error(ErrorCode::Argument, "unknown family");
}

namespace {

void check_training_shape(const DocTermMatrix& m, std::span<const int> labels) {
  if (m.rows.size() != labels.size()) {
    throw Error(ErrorCode::Argument, "matrix has " + std::to_string(m.rows.size()) +
                                         " rows but " + std::to_string(labels.size()) +
                                         " labels were given");
  }
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    if (m.rows[i].dimension != m.dimension) {
      throw Error(ErrorCode::Argument, "row " + std::to_string(i) + " has dimension " +
                                           std::to_string(m.rows[i].dimension) +
                                           ", expected " + std::to_string(m.dimension));
    }
    if (labels[i] < 0) throw Error(ErrorCode::Argument, "negative label id");
  }
}

}  // namespace

TrainedModel fit(const AlgorithmSpec& spec, const DocTermMatrix& m,
                 std::span<const int> labels) {
  spec.validate();
  check_training_shape(m, labels);
  if (m.rows.size() < 2) {
    throw Error(ErrorCode::DegenerateTraining, "training needs at least two rows");
  }
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) {
    throw Error(ErrorCode::DegenerateTraining, "single-class training set");
  }
  if (spec.family == Family::KNN &&
      static_cast<std::size_t>(spec.params.k) > m.rows.size()) {
    throw Error(ErrorCode::Argument, "k = " + std::to_string(spec.params.k) +
                                         " exceeds training size " +
                                         std::to_string(m.rows.size()));
  }
  std::vector<int> positions(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    positions[i] = static_cast<int>(
        std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin());
  }
  auto impl = make_classifier(spec);
  impl->fit(m, positions, classes.size());

  TrainedModel model;
  model.spec_ = spec;
  model.classes_ = std::move(classes);
  model.dimension_ = m.dimension;
  model.impl_ = std::move(impl);
  return model;
}

void TrainedModel::check_dimension(const SparseVector& x) const {
  if (!impl_) throw Error(ErrorCode::ServiceUnavailable, "model is not trained");
  if (x.dimension != dimension_) {
    throw Error(ErrorCode::Argument, "vector dimension " + std::to_string(x.dimension) +
                                         " does not match model dimension " +
                                         std::to_string(dimension_));
  }
}

ScoreVector TrainedModel::score(const SparseVector& x) const {
  check_dimension(x);
  return {impl_->scores(x)};
}

Prediction TrainedModel::predict(const SparseVector& x) const {
  check_dimension(x);
  const auto s = impl_->scores(x);
  const std::size_t pos = impl_->decide(x, s);
  Prediction p;
  p.label = classes_[pos];
  p.confidence = impl_->probabilistic() ? s[pos] : softmax(s)[pos];
  return p;
}

TrainedModel TrainedModel::partial_fit(const DocTermMatrix& m,
                                       std::span<const int> labels) const {
  const auto* nb = as<MultinomialNB>();
  if (!nb) {
    throw Error(ErrorCode::Argument, "incremental training is only supported by MultinomialNB");
  }
  check_training_shape(m, labels);
  if (m.dimension != dimension_) {
    throw Error(ErrorCode::Argument, "update dimension does not match model dimension");
  }
  std::vector<int> merged = classes_;
  merged.insert(merged.end(), labels.begin(), labels.end());
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());

  auto updated = std::make_shared<MultinomialNB>(*nb);
  if (merged.size() != classes_.size()) {
    std::vector<std::size_t> mapping(classes_.size());
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      mapping[i] = static_cast<std::size_t>(
          std::lower_bound(merged.begin(), merged.end(), classes_[i]) - merged.begin());
    }
    updated->remap_classes(mapping, merged.size());
  }
  std::vector<int> positions(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    positions[i] = static_cast<int>(
        std::lower_bound(merged.begin(), merged.end(), labels[i]) - merged.begin());
  }
  updated->partial_fit(m, positions, merged.size());

  TrainedModel out = *this;
  out.classes_ = std::move(merged);
  out.impl_ = std::move(updated);
  return out;
}

nlohmann::json TrainedModel::to_json() const {
  if (!impl_) throw Error(ErrorCode::ServiceUnavailable, "model is not trained");
  nlohmann::json j;
  j["spec"] = ml::to_json(spec_);
  j["classes"] = classes_;
  j["dimension"] = dimension_;
  j["parameters"] = impl_->save();
  return j;
}

TrainedModel TrainedModel::from_json(const nlohmann::json& j) {
  try {
    TrainedModel model;
    model.spec_ = spec_from_json(j.at("spec"));
    model.classes_ = j.at("classes").get<std::vector<int>>();
    model.dimension_ = j.at("dimension").get<std::size_t>();
    auto impl = make_classifier(model.spec_);
    impl->load(j.at("parameters"));
    model.impl_ = std::move(impl);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("malformed classifier section: ") + e.what());
  }
}

ScoreVector mnb_score(const TrainedModel& model, const SparseVector& x) {
  if (!model.as<MultinomialNB>()) throw Error(ErrorCode::Argument, "not a MultinomialNB model");
  return model.score(x);
}

ScoreVector cnb_score(const TrainedModel& model, const SparseVector& x) {
  if (!model.as<ComplementNB>()) throw Error(ErrorCode::Argument, "not a ComplementNB model");
  return model.score(x);
}

ScoreVector knn_vote(const TrainedModel& model, const SparseVector& x, int k) {
  const auto* knn = model.as<Knn>();
  if (!knn) throw Error(ErrorCode::Argument, "not a KNN model");
  if (x.dimension != model.dimension()) {
    throw Error(ErrorCode::Argument, "vector dimension does not match model dimension");
  }
  return {knn->vote(x, k)};
}

}  // namespace coiner::ml
