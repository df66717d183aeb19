#include <algorithm>
#include <cmath>
#include <limits>

#include "coiner/classifiers.hpp"
#include "coiner/error.hpp"

namespace coiner::ml {

namespace {

constexpr double kTau = 1e-12;

struct DualSolution {
  std::vector<double> alpha;
  double bias = 0.0;
  double gap = 0.0;
  std::size_t iterations = 0;
};

// SMO with maximal-violating-pair selection on
//   min 1/2 a'Qa - e'a  s.t.  y'a = 0, 0 <= a <= C,  Q_ij = y_i y_j K_ij.
DualSolution solve_dual(const std::vector<double>& gram, std::span<const double> y,
                        double C, double eps, std::size_t max_iterations) {
  const std::size_t n = y.size();
  auto K = [&](std::size_t i, std::size_t j) { return gram[i * n + j]; };
  DualSolution sol;
  sol.alpha.assign(n, 0.0);
  std::vector<double> G(n, -1.0);
  auto& a = sol.alpha;

  auto in_up = [&](std::size_t t) { return (y[t] > 0 && a[t] < C) || (y[t] < 0 && a[t] > 0); };
  auto in_low = [&](std::size_t t) { return (y[t] > 0 && a[t] > 0) || (y[t] < 0 && a[t] < C); };

  for (;;) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * G[t];
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    sol.gap = (i == n || j == n) ? 0.0 : gmax - gmin;
    if (i == n || j == n || sol.gap < eps) break;
    if (sol.iterations >= max_iterations) {
      throw Error(ErrorCode::TrainingIncomplete,
                  "SMO did not reach KKT tolerance after " +
                      std::to_string(sol.iterations) + " iterations (gap " +
                      std::to_string(sol.gap) + ")");
    }
    ++sol.iterations;

    const double Qii = K(i, i), Qjj = K(j, j), Qij = y[i] * y[j] * K(i, j);
    const double old_ai = a[i], old_aj = a[j];
    if (y[i] != y[j]) {
      double quad = Qii + Qjj + 2.0 * Qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0) {
        if (a[j] < 0) {
          a[j] = 0;
          a[i] = diff;
        }
      } else if (a[i] < 0) {
        a[i] = 0;
        a[j] = -diff;
      }
      if (diff > 0) {
        if (a[i] > C) {
          a[i] = C;
          a[j] = C - diff;
        }
      } else if (a[j] > C) {
        a[j] = C;
        a[i] = C + diff;
      }
    } else {
      double quad = Qii + Qjj - 2.0 * Qij;
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > C) {
        if (a[i] > C) {
          a[i] = C;
          a[j] = sum - C;
        }
        if (a[j] > C) {
          a[j] = C;
          a[i] = sum - C;
        }
      } else {
        if (a[j] < 0) {
          a[j] = 0;
          a[i] = sum;
        }
        if (a[i] < 0) {
          a[i] = 0;
          a[j] = sum;
        }
      }
    }
    const double dai = a[i] - old_ai, daj = a[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) {
      G[t] += y[t] * (y[i] * K(i, t) * dai + y[j] * K(j, t) * daj);
    }
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (a[t] >= C) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (a[t] <= 0) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count)
                                    : (ub + lb) / 2.0;
  sol.bias = -rho;
  return sol;
}

}  // namespace

double PolySvm::kernel(const SparseVector& a, const SparseVector& b) const {
  const auto& p = spec_.params;
  return std::pow(p.gamma * a.dot(b) + p.coef0, p.degree);
}

void PolySvm::fit(const DocTermMatrix& m, std::span<const int> positions,
                  std::size_t num_classes) {
  const auto& p = spec_.params;
  const std::size_t n = m.rows.size();
  std::vector<double> gram(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      gram[i * n + j] = gram[j * n + i] = kernel(m.rows[i], m.rows[j]);
    }
  }
  alphas_.assign(num_classes, {});
  biases_.assign(num_classes, 0.0);
  gaps_.assign(num_classes, 0.0);
  iterations_.assign(num_classes, 0);
  std::vector<double> y(n);
  std::vector<bool> is_support(n, false);
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<std::size_t>(positions[i]) == c ? 1.0 : -1.0;
    }
    auto sol = solve_dual(gram, y, p.C, p.tolerance,
                          static_cast<std::size_t>(p.max_iterations));
    for (std::size_t i = 0; i < n; ++i) {
      if (sol.alpha[i] > 0.0) is_support[i] = true;
    }
    biases_[c] = sol.bias;
    gaps_[c] = sol.gap;
    iterations_[c] = sol.iterations;
    alphas_[c] = std::move(sol.alpha);
  }

  support_.clear();
  coefficients_.assign(num_classes, {});
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_support[i]) continue;
    support_.push_back(m.rows[i]);
    for (std::size_t c = 0; c < num_classes; ++c) {
      const double yc = static_cast<std::size_t>(positions[i]) == c ? 1.0 : -1.0;
      coefficients_[c].push_back(alphas_[c][i] * yc);
    }
  }
}

std::vector<double> PolySvm::scores(const SparseVector& x) const {
  std::vector<double> k(support_.size());
  for (std::size_t s = 0; s < support_.size(); ++s) k[s] = kernel(support_[s], x);
  std::vector<double> out(coefficients_.size());
  for (std::size_t c = 0; c < coefficients_.size(); ++c) {
    double d = biases_[c];
    for (std::size_t s = 0; s < k.size(); ++s) d += coefficients_[c][s] * k[s];
    out[c] = d;
  }
  return out;
}

nlohmann::json PolySvm::save() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : support_) {
    nlohmann::json sparse = nlohmann::json::array();
    for (const auto& e : r.entries) sparse.push_back({e.index, e.value});
    rows.push_back(std::move(sparse));
  }
  nlohmann::json j;
  j["dimension"] = support_.empty() ? 0 : support_.front().dimension;
  j["support"] = std::move(rows);
  j["coefficients"] = coefficients_;
  j["biases"] = biases_;
  return j;
}

void PolySvm::load(const nlohmann::json& j) {
  const auto dim = j.at("dimension").get<std::size_t>();
  support_.clear();
  for (const auto& sparse : j.at("support")) {
    SparseVector v;
    v.dimension = dim;
    for (const auto& pair : sparse) {
      v.entries.push_back({pair.at(0).get<std::uint32_t>(), pair.at(1).get<double>()});
    }
    support_.push_back(std::move(v));
  }
  coefficients_ = j.at("coefficients").get<std::vector<std::vector<double>>>();
  biases_ = j.at("biases").get<std::vector<double>>();
  for (const auto& c : coefficients_) {
    if (c.size() != support_.size()) throw Error(ErrorCode::Parse, "support vector count mismatch");
  }
}

}  // namespace coiner::ml
