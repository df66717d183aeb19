#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "coiner/classifiers.hpp"
#include "coiner/error.hpp"
#include "coiner/random.hpp"

namespace coiner::ml {

namespace {

// log(1 + exp(t)) without overflow.
double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Limited-memory BFGS with Armijo backtracking.
template <typename F>
std::vector<double> minimize_lbfgs(F&& f, std::vector<double> x, double tolerance,
                                   int max_iterations) {
  constexpr std::size_t kMemory = 10;
  std::vector<double> g(x.size());
  double fx = f(x, &g);
  if (!std::isfinite(fx)) {
    throw Error(ErrorCode::TrainingDiverged, "logistic objective is not finite at start");
  }
  const double gtol = tolerance * std::max(1.0, max_abs(g));
  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> d(x.size()), x_new(x.size()), g_new(x.size());

  for (int iter = 0; iter < max_iterations; ++iter) {
    if (max_abs(g) <= gtol) break;
    // Two-loop recursion for d = -H g.
    d = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * dot(s_hist[k], d);
      for (std::size_t t = 0; t < d.size(); ++t) d[t] -= alpha[k] * y_hist[k][t];
    }
    if (!s_hist.empty()) {
      const double scale = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (auto& v : d) v *= scale;
    } else {
      const double gn = std::sqrt(dot(g, g));
      for (auto& v : d) v /= gn;
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], d);
      for (std::size_t t = 0; t < d.size(); ++t) d[t] += s_hist[k][t] * (alpha[k] - beta);
    }
    for (auto& v : d) v = -v;
    double slope = dot(g, d);
    if (slope >= 0) {
      // Not a descent direction; restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      const double gn = std::sqrt(dot(g, g));
      for (std::size_t t = 0; t < d.size(); ++t) d[t] = -g[t] / gn;
      slope = dot(g, d);
    }

    double step = 1.0;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t t = 0; t < x.size(); ++t) x_new[t] = x[t] + step * d[t];
      f_new = f(x_new, &g_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    std::vector<double> s(x.size()), yv(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
      s[t] = x_new[t] - x[t];
      yv[t] = g_new[t] - g[t];
    }
    const double sy = dot(s, yv);
    const double decrease = fx - f_new;
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    if (sy > 1e-12) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > kMemory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (decrease <= 1e-14 * std::max(1.0, std::abs(fx))) break;
  }
  return x;
}

}  // namespace

double LogisticRegression::objective(const DocTermMatrix& m, std::span<const double> y,
                                     double lambda, std::span<const double> params,
                                     std::vector<double>* gradient) {
  const std::size_t dim = m.dimension;
  const std::span<const double> w = params.first(dim);
  const double b = params[dim];
  double value = 0.0;
  if (gradient) gradient->assign(dim + 1, 0.0);
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    const double z = m.rows[i].dot(w) + b;
    value += softplus(-y[i] * z);
    if (gradient) {
      const double coef = -y[i] * sigmoid(-y[i] * z);
      for (const auto& e : m.rows[i].entries) (*gradient)[e.index] += coef * e.value;
      (*gradient)[dim] += coef;
    }
  }
  double sq = 0.0;
  for (std::size_t t = 0; t < dim; ++t) sq += w[t] * w[t];
  value += 0.5 * lambda * sq;
  if (gradient) {
    for (std::size_t t = 0; t < dim; ++t) (*gradient)[t] += lambda * w[t];
  }
  return value;
}

void LogisticRegression::fit(const DocTermMatrix& m, std::span<const int> positions,
                             std::size_t num_classes) {
  const auto& p = spec_.params;
  const std::size_t n = m.rows.size();
  const std::size_t dim = m.dimension;
  scorers_.assign(num_classes, LinearScorer{std::vector<double>(dim, 0.0), 0.0});
  std::vector<double> y(n);
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<std::size_t>(positions[i]) == c ? 1.0 : -1.0;
    }
    if (trainer_ == Trainer::Batch) {
      auto f = [&](const std::vector<double>& params, std::vector<double>* grad) {
        return objective(m, y, p.lambda, params, grad);
      };
      auto params = minimize_lbfgs(f, std::vector<double>(dim + 1, 0.0), p.tolerance,
                                   p.max_iterations);
      scorers_[c].bias = params[dim];
      params.resize(dim);
      scorers_[c].weights = std::move(params);
    } else {
      // w = scale * v keeps the per-step L2 shrink O(1).
      std::vector<double> v(dim, 0.0);
      double scale = 1.0;
      double bias = 0.0;
      Rng rng(spec_.seed ^ (0xbf58476d1ce4e5b9ULL * (c + 1)));
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      const double per_sample_lambda = p.lambda / static_cast<double>(n);
      for (int epoch = 0; epoch < p.epochs; ++epoch) {
        const double rate = p.learning_rate / (1.0 + epoch);
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t idx : order) {
          const auto& row = m.rows[idx];
          const double z = scale * row.dot(v) + bias;
          const double g = -y[idx] * sigmoid(-y[idx] * z);
          const double shrink = 1.0 - rate * per_sample_lambda;
          if (shrink <= 0.0) {
            std::fill(v.begin(), v.end(), 0.0);
            scale = 1.0;
          } else {
            scale *= shrink;
          }
          const double step = rate * g / scale;
          for (const auto& e : row.entries) v[e.index] -= step * e.value;
          bias -= rate * g;
          if (scale < 1e-9) {
            for (auto& x : v) x *= scale;
            scale = 1.0;
          }
        }
        bool finite = std::isfinite(bias) && std::isfinite(scale);
        for (double x : v) finite = finite && std::isfinite(x);
        if (!finite) {
          throw Error(ErrorCode::TrainingDiverged,
                      "SGD logistic regression diverged in epoch " + std::to_string(epoch + 1));
        }
      }
      for (auto& x : v) x *= scale;
      scorers_[c].weights = std::move(v);
      scorers_[c].bias = bias;
    }
  }
}

std::vector<double> LogisticRegression::scores(const SparseVector& x) const {
  std::vector<double> out(scorers_.size());
  double total = 0.0;
  for (std::size_t c = 0; c < scorers_.size(); ++c) {
    out[c] = sigmoid(scorers_[c].decision(x));
    total += out[c];
  }
  if (total > 0.0) {
    for (auto& v : out) v /= total;
  } else {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
  }
  return out;
}

nlohmann::json LogisticRegression::save() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : scorers_) j.push_back({{"weights", s.weights}, {"bias", s.bias}});
  return {{"scorers", j}};
}

void LogisticRegression::load(const nlohmann::json& j) {
  scorers_.clear();
  for (const auto& s : j.at("scorers")) {
    scorers_.push_back({s.at("weights").get<std::vector<double>>(), s.at("bias").get<double>()});
  }
}

}  // namespace coiner::ml
