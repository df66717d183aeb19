#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "coiner/classifiers.hpp"
#include "coiner/error.hpp"
#include "coiner/random.hpp"

namespace coiner::ml {

namespace {

double loss_value(double margin, Loss loss) {
  const double slack = std::max(0.0, 1.0 - margin);
  return loss == Loss::Hinge ? slack : slack * slack;
}

// Derivative of the loss with respect to the margin.
double loss_slope(double margin, Loss loss) {
  if (margin >= 1.0) return 0.0;
  return loss == Loss::Hinge ? -1.0 : -2.0 * (1.0 - margin);
}

void prox(std::vector<double>& w, double tau, Penalty penalty) {
  if (penalty == Penalty::L2) {
    const double shrink = 1.0 / (1.0 + tau);
    for (auto& v : w) v *= shrink;
  } else {
    for (auto& v : w) {
      if (v > tau) v -= tau;
      else if (v < -tau) v += tau;
      else v = 0.0;
    }
  }
}

std::uint64_t problem_seed(std::uint64_t seed, std::size_t c) {
  return seed ^ (0x9e3779b97f4a7c15ULL * (c + 1));
}

}  // namespace

double LinearSvm::loss_sum(const DocTermMatrix& m, std::span<const double> y,
                           const LinearScorer& s, Loss loss) {
  double total = 0.0;
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    total += loss_value(y[i] * s.decision(m.rows[i]), loss);
  }
  return total;
}

double LinearSvm::objective(const DocTermMatrix& m, std::span<const double> y,
                            const LinearScorer& s, double C, Loss loss, Penalty penalty) {
  double reg = 0.0;
  if (penalty == Penalty::L2) {
    for (double v : s.weights) reg += v * v;
    reg = 0.5 * (reg + s.bias * s.bias);
  } else {
    for (double v : s.weights) reg += std::abs(v);
  }
  return reg + C * loss_sum(m, y, s, loss);
}

namespace {

// Dual coordinate descent for the L2 penalty, with the bias as an extra
// constant feature. Each epoch visits the rows in seeded random order and
// solves the one-variable dual subproblem exactly. Stops once the duality gap
// drops below tolerance * max(1, primal). The best primal iterate is kept.
LinearScorer fit_dual(const DocTermMatrix& m, std::span<const double> y,
                      const Hyperparameters& p, Rng& rng, std::vector<double>& history) {
  const std::size_t n = m.rows.size();
  const bool squared = p.loss == Loss::SquaredHinge;
  const double upper = squared ? std::numeric_limits<double>::infinity() : p.C;
  const double diag = squared ? 0.5 / p.C : 0.0;

  std::vector<double> alpha(n, 0.0), qii(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 1.0;
    for (const auto& e : m.rows[i].entries) sq += e.value * e.value;
    qii[i] = sq + diag;
  }
  LinearScorer w{std::vector<double>(m.dimension, 0.0), 0.0};
  LinearScorer best = w;
  double best_obj = LinearSvm::objective(m, y, w, p.C, p.loss, Penalty::L2);
  history.push_back(best_obj);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      const double g = y[i] * w.decision(m.rows[i]) - 1.0 + diag * alpha[i];
      double pg = g;
      if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
      else if (alpha[i] >= upper) pg = std::max(g, 0.0);
      if (pg == 0.0) continue;
      const double next = std::clamp(alpha[i] - g / qii[i], 0.0, upper);
      const double delta = (next - alpha[i]) * y[i];
      alpha[i] = next;
      for (const auto& e : m.rows[i].entries) w.weights[e.index] += delta * e.value;
      w.bias += delta;
    }
    const double primal = LinearSvm::objective(m, y, w, p.C, p.loss, Penalty::L2);
    double sq = w.bias * w.bias, dual = 0.0;
    for (double v : w.weights) sq += v * v;
    for (double a : alpha) dual += a - 0.5 * diag * a * a;
    dual -= 0.5 * sq;
    if (primal < best_obj) {
      best_obj = primal;
      best = w;
    }
    history.push_back(best_obj);
    if (best_obj - dual <= p.tolerance * std::max(1.0, std::abs(best_obj))) break;
  }
  return best;
}

// Proximal stochastic subgradient epochs for the L1 penalty (bias
// unpenalised). An epoch that raises the objective is rolled back and the
// step halved, so the recorded objective never increases.
LinearScorer fit_subgradient(const DocTermMatrix& m, std::span<const double> y,
                             const Hyperparameters& p, Rng& rng, std::vector<double>& history) {
  const std::size_t n = m.rows.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  double rate = p.learning_rate;
  LinearScorer current{std::vector<double>(m.dimension, 0.0), 0.0};
  double obj = LinearSvm::objective(m, y, current, p.C, p.loss, p.penalty);
  history.push_back(obj);
  int stalled = 0;
  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    LinearScorer trial = current;
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t idx : order) {
      const auto& row = m.rows[idx];
      const double margin = y[idx] * trial.decision(row);
      const double slope = loss_slope(margin, p.loss);
      if (slope == 0.0) continue;
      const double step = -rate * slope * y[idx];
      for (const auto& e : row.entries) trial.weights[e.index] += step * e.value;
      trial.bias += step;
    }
    prox(trial.weights, rate / p.C, p.penalty);
    const double next = LinearSvm::objective(m, y, trial, p.C, p.loss, p.penalty);
    if (!std::isfinite(next)) {
      throw Error(ErrorCode::TrainingDiverged,
                  "linear SVM objective became non-finite in epoch " +
                      std::to_string(epoch + 1) + " (learning_rate too large?)");
    }
    if (next <= obj) {
      const double gain = obj - next;
      current = std::move(trial);
      obj = next;
      history.push_back(obj);
      stalled = gain <= 1e-9 * std::max(1.0, obj) ? stalled + 1 : 0;
      if (stalled >= 3) break;
    } else {
      rate *= 0.5;
      if (rate < 1e-12) break;
    }
  }
  return current;
}

}  // namespace

void LinearSvm::fit(const DocTermMatrix& m, std::span<const int> positions,
                    std::size_t num_classes) {
  const auto& p = spec_.params;
  const std::size_t n = m.rows.size();
  scorers_.assign(num_classes, LinearScorer{});
  history_.assign(num_classes, {});
  std::vector<double> y(n);
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<std::size_t>(positions[i]) == c ? 1.0 : -1.0;
    }
    Rng rng(problem_seed(spec_.seed, c));
    scorers_[c] = p.penalty == Penalty::L2 ? fit_dual(m, y, p, rng, history_[c])
                                           : fit_subgradient(m, y, p, rng, history_[c]);
  }
}

std::vector<double> LinearSvm::scores(const SparseVector& x) const {
  std::vector<double> out(scorers_.size());
  for (std::size_t c = 0; c < scorers_.size(); ++c) out[c] = scorers_[c].decision(x);
  return out;
}

nlohmann::json LinearSvm::save() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : scorers_) j.push_back({{"weights", s.weights}, {"bias", s.bias}});
  return {{"scorers", j}};
}

void LinearSvm::load(const nlohmann::json& j) {
  scorers_.clear();
  for (const auto& s : j.at("scorers")) {
    scorers_.push_back({s.at("weights").get<std::vector<double>>(), s.at("bias").get<double>()});
  }
}

}  // namespace coiner::ml
