#include <algorithm>
#include <cmath>
#include <numeric>

#include "coiner/corpus.hpp"
#include "coiner/error.hpp"
#include "coiner/features.hpp"
#include "coiner/model_io.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

using namespace coiner;
using namespace coiner::ml;
using features::DocTermMatrix;
using features::SparseVector;

namespace {

AlgorithmSpec spec_of(Family f) { return default_spec(f); }

DocTermMatrix dense(const std::vector<std::vector<double>>& rows) {
  DocTermMatrix m{rows.front().size(), {}};
  for (const auto& r : rows) {
    std::vector<features::SparseEntry> e;
    for (std::size_t i = 0; i < r.size(); ++i) e.push_back({static_cast<std::uint32_t>(i), r[i]});
    m.rows.push_back(SparseVector::from_pairs(r.size(), e));
  }
  return m;
}

SparseVector point(std::vector<double> v) { return dense({v}).rows[0]; }

double training_accuracy(const TrainedModel& model, const DocTermMatrix& m,
                         const std::vector<int>& labels) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < m.rows.size(); ++i) ok += model.predict(m.rows[i]).label == labels[i];
  return static_cast<double>(ok) / static_cast<double>(m.rows.size());
}

// Columns: lock, releas, wait, map, zoom. A = 0, B = 1.
const DocTermMatrix kToy = dense({{1, 1, 0, 0, 0}, {1, 0, 1, 0, 0}, {0, 0, 0, 1, 1}});
const std::vector<int> kToyLabels{0, 0, 1};

// XOR on the four corners of the square, as ±1 coordinates.
const DocTermMatrix kXor = dense({{1, 1}, {-1, -1}, {1, -1}, {-1, 1}});
const std::vector<int> kXorLabels{0, 0, 1, 1};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Argument;
}

}  // namespace

TEST_CASE("multinomial NB toy example") {
  const auto model = fit(spec_of(Family::MultinomialNB), kToy, kToyLabels);
  const auto x = point({1, 0, 0, 0, 0});
  const auto p = model.predict(x);
  CHECK(p.label == 0);
  // (2/3 * 3/9) / (2/3 * 3/9 + 1/3 * 1/7)
  CHECK(p.confidence == doctest::Approx(14.0 / 17.0));
  const auto s = mnb_score(model, x).scores;
  CHECK(s[0] > s[1]);
  CHECK(s[0] + s[1] == doctest::Approx(1.0));
}

TEST_CASE("multinomial NB symmetry gives uniform scores") {
  const auto m = dense({{1, 2}, {1, 2}, {1, 2}});
  const auto model = fit(spec_of(Family::MultinomialNB), m, std::vector<int>{0, 3, 6});
  for (double v : mnb_score(model, point({3, 1})).scores) CHECK(v == doctest::Approx(1.0 / 3));
}

TEST_CASE("uniform scores over seven classes pick the first class") {
  std::vector<std::vector<double>> rows(7, {1, 1});
  const auto model = fit(spec_of(Family::MultinomialNB), dense(rows), std::vector<int>{0, 1, 2, 3, 4, 5, 6});
  const auto p = model.predict(point({1, 0}));
  CHECK(p.label == 0);
  CHECK(p.confidence == doctest::Approx(1.0 / 7));
}

TEST_CASE("complement NB examples") {
  const auto toy = fit(spec_of(Family::ComplementNB), kToy, kToyLabels);
  CHECK(toy.predict(point({1, 0, 0, 0, 0})).label == 0);

  const auto disjoint = dense({{2, 1, 0, 0}, {1, 2, 0, 0}, {0, 0, 2, 1}, {0, 0, 1, 2}});
  const std::vector<int> labels{0, 0, 1, 1};
  const auto model = fit(spec_of(Family::ComplementNB), disjoint, labels);
  CHECK(training_accuracy(model, disjoint, labels) == 1.0);
  for (const auto& w : model.as<ComplementNB>()->weights()) {
    double l1 = 0;
    for (double v : w) l1 += std::abs(v);
    CHECK(l1 == doctest::Approx(1.0));
  }

  const auto uniform = fit(spec_of(Family::ComplementNB), dense({{1, 1}, {1, 1}}), std::vector<int>{4, 2});
  CHECK(uniform.predict(point({1, 1})).label == 2);
}

TEST_CASE("KNN examples") {
  const auto m = dense({{1, 0, 0}, {0.8, 0.6, 0}, {0, 0, 1}});
  const std::vector<int> labels{0, 1, 2};
  auto spec = spec_of(Family::KNN);
  const auto k1 = fit(spec, m, labels);
  const auto same = k1.predict(m.rows[2]);
  CHECK(same.label == 2);
  CHECK(knn_vote(k1, m.rows[2], 1).scores == std::vector<double>{0, 0, 1});

  // One neighbour of each class: the nearest wins.
  spec.params.k = 2;
  const auto k2 = fit(spec, m, labels);
  CHECK(k2.predict(point({0.6, 0.8, 0})).label == 1);
  CHECK(k2.predict(point({1, 0.1, 0})).label == 0);

  // Neighbour ordering matches a brute-force sort of pairwise cosines.
  const auto* knn = k1.as<Knn>();
  const auto q = point({0.5, 0.5, 0.2});
  std::vector<std::pair<double, std::size_t>> brute;
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    brute.push_back({-q.dot(m.rows[i]) / (q.norm() * m.rows[i].norm()), i});
  }
  std::sort(brute.begin(), brute.end());
  const auto ranked = knn->neighbors(q, 3);
  REQUIRE(ranked.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(ranked[i].row == brute[i].second);

  // A zero query falls back to the majority class.
  const auto maj = fit(spec_of(Family::KNN), dense({{1, 0}, {0, 1}, {0, 2}}), std::vector<int>{0, 5, 5});
  CHECK(maj.predict(point({0, 0})).label == 5);
  CHECK(knn_vote(maj, point({0, 0}), 1).scores == std::vector<double>{0, 0});
}

TEST_CASE("KNN k=1 reproduces its training labels") {
  testing::for_all(200, 51, [](Rng& rng, int) {
    auto d = oracle::random_dataset(rng);
    // Drop contradictory duplicates, including rows that are scalar
    // multiples of each other (cosine 1).
    oracle::Dataset clean{d.features, {}, {}};
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
      bool clash = std::all_of(d.rows[i].begin(), d.rows[i].end(), [](int v) { return v == 0; });
      for (const auto& r : clean.rows) {
        const auto order = oracle::knn_ranking({d.features, {r}, {0}}, d.rows[i]);
        std::int64_t dot = 0, a = 0, b = 0;
        for (std::size_t f = 0; f < d.features; ++f) {
          dot += static_cast<std::int64_t>(r[f]) * d.rows[i][f];
          a += static_cast<std::int64_t>(r[f]) * r[f];
          b += static_cast<std::int64_t>(d.rows[i][f]) * d.rows[i][f];
        }
        (void)order;
        clash = clash || dot * dot == a * b;
      }
      if (!clash) {
        clean.rows.push_back(d.rows[i]);
        clean.labels.push_back(d.labels[i]);
      }
    }
    if (oracle::classes_of(clean).size() < 2) return;
    const auto m = oracle::matrix(clean);
    const auto model = fit(spec_of(Family::KNN), m, clean.labels);
    CHECK(training_accuracy(model, m, clean.labels) == 1.0);
  });
}

TEST_CASE("small instances agree with brute force") {
  testing::for_all(300, 52, [](Rng& rng, int) {
    const auto d = oracle::random_dataset(rng);
    const auto m = oracle::matrix(d);
    const auto mnb = fit(spec_of(Family::MultinomialNB), m, d.labels);
    const auto cnb = fit(spec_of(Family::ComplementNB), m, d.labels);
    auto kspec = spec_of(Family::KNN);
    const auto knn1 = fit(kspec, m, d.labels);
    kspec.params.k = 2;
    const auto knn2 = fit(kspec, m, d.labels);
    for (int q = 0; q < 5; ++q) {
      const auto x = oracle::random_counts(rng, d.features, 3);
      const auto sx = oracle::sparse(x);
      CHECK(mnb.predict(sx).label == oracle::multinomial_nb(d, x, 1.0));
      CHECK(cnb.predict(sx).label == oracle::complement_nb(d, x, 1.0));
      CHECK(knn1.predict(sx).label == oracle::knn(d, x, 1));
      CHECK(knn2.predict(sx).label == oracle::knn(d, x, 2));
    }
  });
}

TEST_CASE("partial_fit matches batch fit") {
  testing::for_all(100, 53, [](Rng& rng, int) {
    const auto a = oracle::random_dataset(rng);
    auto b = oracle::random_dataset(rng);
    b.features = a.features;
    for (auto& r : b.rows) r = oracle::random_counts(rng, a.features, 3);
    oracle::Dataset all = a;
    all.rows.insert(all.rows.end(), b.rows.begin(), b.rows.end());
    all.labels.insert(all.labels.end(), b.labels.begin(), b.labels.end());
    const auto batch = fit(spec_of(Family::MultinomialNB), oracle::matrix(all), all.labels);
    const auto incremental = fit(spec_of(Family::MultinomialNB), oracle::matrix(a), a.labels)
                                 .partial_fit(oracle::matrix(b), b.labels);
    CHECK(incremental.classes() == batch.classes());
    for (int q = 0; q < 3; ++q) {
      const auto x = oracle::sparse(oracle::random_counts(rng, a.features, 3));
      const auto s1 = batch.score(x).scores, s2 = incremental.score(x).scores;
      REQUIRE(s1.size() == s2.size());
      for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s1[i] == doctest::Approx(s2[i]).epsilon(1e-12));
    }
  });
  CHECK(code_of([] {
          fit(spec_of(Family::KNN), kToy, kToyLabels).partial_fit(kToy, kToyLabels);
        }) == ErrorCode::Argument);
}

TEST_CASE("linear SVM examples") {
  const auto one_d = dense({{1}, {-1}});
  const std::vector<int> labels{0, 1};
  const auto model = fit(spec_of(Family::LinearSVM), one_d, labels);
  CHECK(model.as<LinearSvm>()->scorers()[0].weights[0] > 0);
  CHECK(training_accuracy(model, one_d, labels) == 1.0);

  const auto two_d = dense({{2, 1}, {1.5, 2}, {3, 0.5}, {-1, -2}, {-2, 0}, {-0.5, -1.5}});
  const std::vector<int> y{3, 3, 3, 5, 5, 5};
  CHECK(training_accuracy(fit(spec_of(Family::LinearSVM), two_d, y), two_d, y) == 1.0);
  for (auto loss : {Loss::Hinge, Loss::SquaredHinge}) {
    for (auto pen : {Penalty::L1, Penalty::L2}) {
      auto spec = spec_of(Family::LinearSVM);
      spec.params.loss = loss;
      spec.params.penalty = pen;
      CHECK(training_accuracy(fit(spec, two_d, y), two_d, y) == 1.0);
    }
  }
}

TEST_CASE("linear SVM objective never increases across epochs") {
  testing::for_all(60, 54, [](Rng& rng, int) {
    const auto d = oracle::random_dataset(rng);
    auto spec = spec_of(Family::LinearSVM);
    spec.params.loss = rng.below(2) ? Loss::Hinge : Loss::SquaredHinge;
    spec.params.penalty = rng.below(2) ? Penalty::L1 : Penalty::L2;
    spec.params.learning_rate = 0.5;
    spec.seed = rng.next();
    const auto model = fit(spec, oracle::matrix(d), d.labels);
    for (const auto& h : model.as<LinearSvm>()->objective_history()) {
      for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1] * (1 + 1e-12));
    }
  });
}

TEST_CASE("doubling C never increases the converged hinge loss") {
  testing::for_all(40, 55, [](Rng& rng, int) {
    auto d = oracle::random_dataset(rng);
    const int first = d.labels[0];
    for (auto& l : d.labels) l = l == first ? 0 : 1;
    const auto m = oracle::matrix(d);
    std::vector<double> y(d.labels.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = d.labels[i] == 0 ? 1.0 : -1.0;
    auto spec = spec_of(Family::LinearSVM);
    spec.params.epochs = 100000;
    spec.params.tolerance = 1e-10;
    spec.params.C = 0.05 + rng.unit();
    const auto weak = fit(spec, m, d.labels);
    spec.params.C *= 2;
    const auto strong = fit(spec, m, d.labels);
    const double a = LinearSvm::loss_sum(m, y, weak.as<LinearSvm>()->scorers()[0], Loss::Hinge);
    const double b = LinearSvm::loss_sum(m, y, strong.as<LinearSvm>()->scorers()[0], Loss::Hinge);
    CHECK(b <= a + 1e-6 * std::max(1.0, a));
  });
}

TEST_CASE("linear SVM divergence is reported") {
  auto spec = spec_of(Family::LinearSVM);
  spec.params.learning_rate = 1e300;
  spec.params.loss = Loss::SquaredHinge;
  spec.params.penalty = Penalty::L1;
  CHECK(code_of([&] { fit(spec, dense({{1e10, 1}, {-1e10, 1}}), std::vector<int>{0, 1}); }) ==
        ErrorCode::TrainingDiverged);
}

TEST_CASE("polynomial SVM with a linear kernel is a linear model") {
  auto spec = spec_of(Family::PolySVM);
  spec.params.degree = 1;
  spec.params.gamma = 1;
  spec.params.coef0 = 0;
  const auto m = dense({{1}, {-1}, {2}, {-0.5}});
  const std::vector<int> labels{0, 1, 0, 1};
  const auto model = fit(spec, m, labels);
  const auto* svm = model.as<PolySvm>();
  double w = 0;
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    const double yi = labels[i] == 0 ? 1.0 : -1.0;
    w += svm->alphas(0)[i] * yi * m.rows[i].entries[0].value;
  }
  for (double x : {-3.0, -1.0, 0.0, 0.25, 1.0, 4.0}) {
    CHECK(model.score(point({x})).scores[0] == doctest::Approx(w * x + svm->bias(0)).epsilon(1e-6));
  }
  CHECK(training_accuracy(model, m, labels) == 1.0);
}

TEST_CASE("XOR needs a nonlinear kernel") {
  auto spec = spec_of(Family::PolySVM);
  spec.params.coef0 = 1;
  spec.params.degree = 1;
  CHECK(training_accuracy(fit(spec, kXor, kXorLabels), kXor, kXorLabels) <= 0.75);
  for (int d : {2, 3}) {
    spec.params.degree = d;
    CHECK(training_accuracy(fit(spec, kXor, kXorLabels), kXor, kXorLabels) == 1.0);
  }
}

TEST_CASE("polynomial SVM dual solutions are feasible and converged") {
  testing::for_all(60, 56, [](Rng& rng, int) {
    const auto d = oracle::random_dataset(rng);
    auto spec = spec_of(Family::PolySVM);
    spec.params.C = 0.1 + 3 * rng.unit();
    spec.params.degree = 1 + static_cast<int>(rng.below(3));
    const auto model = fit(spec, oracle::matrix(d), d.labels);
    const auto* svm = model.as<PolySvm>();
    for (std::size_t c = 0; c < model.classes().size(); ++c) {
      CHECK(svm->kkt_gap(c) < spec.params.tolerance);
      double balance = 0;
      for (std::size_t i = 0; i < d.labels.size(); ++i) {
        const double a = svm->alphas(c)[i];
        CHECK(a >= 0.0);
        CHECK(a <= spec.params.C + 1e-12);
        balance += a * (d.labels[i] == model.classes()[c] ? 1.0 : -1.0);
      }
      CHECK(std::abs(balance) < 1e-9);
    }
  });
}

TEST_CASE("polynomial SVM stops at the iteration budget") {
  auto spec = spec_of(Family::PolySVM);
  spec.params.max_iterations = 1;
  spec.params.tolerance = 1e-12;
  try {
    fit(spec, kXor, kXorLabels);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TrainingIncomplete);
    CHECK(std::string(e.what()).find("1 iterations") != std::string::npos);
  }
}

TEST_CASE("logistic regression on symmetric data") {
  const auto m = dense({{1, 0.5}, {1, -0.5}, {-1, 0.5}, {-1, -0.5}});
  const std::vector<int> labels{0, 0, 1, 1};
  for (auto f : {Family::LogRegL2, Family::LogRegSGD}) {
    const auto model = fit(spec_of(f), m, labels);
    CAPTURE(to_string(f));
    const auto& sc = model.as<LogisticRegression>()->scorers();
    // The stochastic trainer stops on a noisy final iterate.
    const double tol = f == Family::LogRegL2 ? 1e-6 : 1e-2;
    CHECK(std::abs(sc[0].bias) < tol);
    CHECK(std::abs(model.score(point({0, 0})).scores[0] - 0.5) < tol);
    CHECK(training_accuracy(model, m, labels) == 1.0);
  }
}

TEST_CASE("logistic gradient matches central differences") {
  testing::for_all(100, 57, [](Rng& rng, int) {
    const auto d = oracle::random_dataset(rng);
    const auto m = oracle::matrix(d);
    std::vector<double> y(d.labels.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = d.labels[i] == d.labels[0] ? 1.0 : -1.0;
    const double lambda = 0.01 + 2 * rng.unit();
    std::vector<double> p(d.features + 1);
    for (auto& v : p) v = 2 * rng.unit() - 1;
    std::vector<double> g;
    LogisticRegression::objective(m, y, lambda, p, &g);
    const auto numeric = oracle::numeric_gradient(
        [&](const std::vector<double>& q) {
          return LogisticRegression::objective(m, y, lambda, q, nullptr);
        },
        p);
    double diff = 0, scale = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      diff += (g[i] - numeric[i]) * (g[i] - numeric[i]);
      scale = std::max({scale, std::abs(g[i]), std::abs(numeric[i])});
    }
    CHECK(std::sqrt(diff) / std::max(scale, 1e-12) < 1e-5);
  });
}

TEST_CASE("strong L2 shrinks weights toward the class prior") {
  const auto m = dense({{1, 0}, {0.9, 0.1}, {0.8, 0.3}, {0, 1}});
  const std::vector<int> labels{0, 0, 0, 1};
  double last = std::numeric_limits<double>::infinity();
  std::vector<double> probe;
  for (double lambda : {0.01, 1.0, 100.0, 1e4, 1e6}) {
    auto spec = spec_of(Family::LogRegL2);
    spec.params.lambda = lambda;
    const auto model = fit(spec, m, labels);
    const auto& w = model.as<LogisticRegression>()->scorers()[0].weights;
    const double norm = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
    CHECK(norm < last);
    last = norm;
    probe = model.score(point({0, 1})).scores;
  }
  CHECK(last < 1e-4);
  CHECK(probe[0] == doctest::Approx(0.75).epsilon(1e-3));
}

TEST_CASE("probabilistic scores are distributions and argmax is scale invariant") {
  testing::for_all(60, 58, [](Rng& rng, int) {
    const auto d = oracle::random_dataset(rng);
    const auto m = oracle::matrix(d);
    for (auto f : kAllFamilies) {
      const auto model = fit(spec_of(f), m, d.labels);
      const auto x = oracle::sparse(oracle::random_counts(rng, d.features, 3));
      const auto s = model.score(x).scores;
      for (double v : s) CHECK(std::isfinite(v));
      if (model.probabilistic()) {
        CHECK(std::accumulate(s.begin(), s.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
        for (double v : s) CHECK(v >= 0.0);
      } else {
        const double k = 0.001 + 1000 * rng.unit();
        std::vector<double> scaled(s);
        for (auto& v : scaled) v *= k;
        CHECK(argmax_first(scaled) == argmax_first(s));
      }
      const auto p = model.predict(x);
      CHECK(p.confidence >= 0.0);
      CHECK(p.confidence <= 1.0 + 1e-12);
    }
  });
}

TEST_CASE("fits are deterministic") {
  const auto corpus = generate_synthetic_corpus({.per_class = 10});
  std::vector<std::string> texts;
  std::vector<int> labels;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    texts.push_back(corpus[i].text);
    labels.push_back(corpus.label(i));
  }
  const auto fm = features::FeatureModel::fit(texts, {});
  const auto m = fm.tfidf_matrix(texts);
  for (auto f : kAllFamilies) {
    CAPTURE(to_string(f));
    CHECK(fit(spec_of(f), m, labels).to_json().dump() == fit(spec_of(f), m, labels).to_json().dump());
    const auto model = fit(spec_of(f), m, labels);
    const auto back = TrainedModel::from_json(model.to_json());
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(back.score(m.rows[i]).scores == model.score(m.rows[i]).scores);
    }
  }
}

TEST_CASE("KNN k=1 labels the last table sentence as Quality") {
  const auto all = load_corpus(testing::source_path("data/mini_corpus.jsonl"));
  std::vector<LabeledSentence> table;
  for (const auto& s : all.sentences()) {
    if (s.id.size() == 2 && s.id[0] == 's') table.push_back(s);
  }
  const LabeledCorpus corpus(table);
  const auto bundle = ModelBundle::train(corpus, {}, spec_of(Family::KNN));
  const auto s7 = std::find_if(table.begin(), table.end(), [](const auto& s) { return s.id == "s7"; });
  CHECK(s7->text.rfind("Your interfaces need to display information quickly", 0) == 0);
  CHECK(bundle.predict(s7->text).label == "Quality");
}

TEST_CASE("training errors") {
  CHECK(code_of([] { fit(spec_of(Family::MultinomialNB), kToy, std::vector<int>{1, 1, 1}); }) ==
        ErrorCode::DegenerateTraining);
  CHECK(code_of([] { fit(spec_of(Family::MultinomialNB), dense({{1, 1}}), std::vector<int>{0}); }) ==
        ErrorCode::DegenerateTraining);
  CHECK(code_of([] { fit(spec_of(Family::KNN), kToy, std::vector<int>{0, 1}); }) ==
        ErrorCode::Argument);
  const auto model = fit(spec_of(Family::KNN), kToy, kToyLabels);
  CHECK(code_of([&] { model.predict(point({1, 2})); }) == ErrorCode::Argument);
}

TEST_CASE("hyperparameter parsing and validation") {
  auto spec = spec_of(Family::LinearSVM);
  set_parameter(spec, "C", "0.5");
  set_parameter(spec, "loss", "squared-hinge");
  set_parameter(spec, "penalty", "l1");
  CHECK(spec.params.C == 0.5);
  CHECK(spec.params.loss == Loss::SquaredHinge);
  CHECK(spec.params.penalty == Penalty::L1);
  CHECK(get_parameter(spec, "loss") == "squared-hinge");
  CHECK(spec_from_json(to_json(spec)) == spec);
  CHECK(code_of([&] { set_parameter(spec, "C", "-1"); }) == ErrorCode::Argument);
  CHECK(code_of([&] { set_parameter(spec, "C", "abc"); }) == ErrorCode::Argument);
  CHECK(code_of([&] { set_parameter(spec, "k", "3"); }) == ErrorCode::Argument);
  auto knn = spec_of(Family::KNN);
  CHECK(code_of([&] { set_parameter(knn, "k", "0"); }) == ErrorCode::Argument);
  auto nb = spec_of(Family::MultinomialNB);
  CHECK(code_of([&] { set_parameter(nb, "alpha", "0"); }) == ErrorCode::Argument);
  auto poly = spec_of(Family::PolySVM);
  CHECK(code_of([&] { set_parameter(poly, "degree", "0"); }) == ErrorCode::Argument);
  for (auto f : kAllFamilies) {
    CHECK(parse_family(to_string(f)) == f);
    CHECK_FALSE(parameter_names(f).empty());
  }
  CHECK_FALSE(parse_family("RandomForest").has_value());
}
