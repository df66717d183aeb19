#include <algorithm>
#include <set>

#include "coiner/eval.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

using namespace coiner;
using namespace coiner::eval;

namespace {

LabeledCorpus synthetic(std::size_t per_class, std::uint64_t seed = 42) {
  SyntheticCorpusSpec spec;
  spec.per_class = per_class;
  spec.seed = seed;
  return generate_synthetic_corpus(spec);
}

features::FeatureConfig unigrams() {
  features::FeatureConfig c;
  c.nmax = 1;
  return c;
}

ml::AlgorithmSpec family(ml::Family f) { return ml::default_spec(f); }

// std::vector<bool> is not contiguous.
struct Flags {
  explicit Flags(const std::vector<bool>& v) : data(new bool[v.size()]), size(v.size()) {
    std::copy(v.begin(), v.end(), data.get());
  }
  operator std::span<const bool>() const { return {data.get(), size}; }
  std::unique_ptr<bool[]> data;
  std::size_t size;
};

RocCurve roc_of(const std::vector<double>& s, const std::vector<bool>& pos) {
  return roc(s, Flags(pos));
}

}  // namespace

TEST_CASE("confusion examples") {
  const std::vector<std::string> names{"a", "b"};
  const auto single = confusion(std::vector<int>{1, 1, 1}, std::vector<int>{1, 1, 1}, names);
  CHECK(single.counts == std::vector<std::vector<std::uint64_t>>{{0, 0}, {0, 3}});
  const auto m = metrics(confusion(std::vector<int>{0, 1, 1}, std::vector<int>{0, 1, 0}, names));
  CHECK(m.accuracy == doctest::Approx(2.0 / 3));
  CHECK_THROWS_AS(confusion(std::vector<int>{0}, std::vector<int>{0, 1}, names), Error);
  CHECK_THROWS_AS(confusion(std::vector<int>{}, std::vector<int>{}, names), Error);
  CHECK_THROWS_AS(confusion(std::vector<int>{2}, std::vector<int>{0}, names), Error);
}

TEST_CASE("confusion and metrics agree with a recount") {
  testing::for_all(300, 61, [](Rng& rng, int) {
    const auto names = label_names(Granularity::Seven);
    const std::size_t n = 1 + rng.below(60);
    std::vector<int> pred(n), gold(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<int>(rng.below(7));
      gold[i] = rng.below(3) ? pred[i] : static_cast<int>(rng.below(7));
    }
    const auto cm = confusion(pred, gold, names);
    CHECK(cm.total() == n);
    const auto m = metrics(cm);
    std::size_t correct = 0;
    double wf = 0, wp = 0;
    for (int c = 0; c < 7; ++c) {
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        tp += pred[i] == c && gold[i] == c;
        fp += pred[i] == c && gold[i] != c;
        fn += pred[i] != c && gold[i] == c;
      }
      correct += tp;
      CHECK(cm.counts[c][c] == tp);
      const double p = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
      const double r = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
      const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
      const auto& cls = m.per_class[c];
      CHECK(cls.precision == doctest::Approx(p));
      CHECK(cls.recall == doctest::Approx(r));
      CHECK(cls.f_measure == doctest::Approx(f));
      CHECK(cls.support == tp + fn);
      CHECK(cls.f_measure == f_measure(cls.precision, cls.recall));
      wf += static_cast<double>(tp + fn) * f;
      wp += static_cast<double>(tp + fn) * p;
    }
    CHECK(m.accuracy == doctest::Approx(static_cast<double>(correct) / n));
    CHECK(m.recall == m.accuracy);
    CHECK(m.f_measure == doctest::Approx(wf / n));
    CHECK(m.precision == doctest::Approx(wp / n));
    for (double v : {m.precision, m.recall, m.f_measure, m.macro_precision, m.macro_recall,
                     m.macro_f_measure, m.accuracy}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  });
}

TEST_CASE("F-measure examples") {
  CHECK(f_measure(0.87, 0.87) == doctest::Approx(0.87));
  CHECK(std::abs(f_measure(0.817, 0.820) - 0.8185) <= 0.0005);
  CHECK(std::abs(f_measure(0.81, 0.81) - 0.81) <= 0.0005);
  CHECK(std::abs(f_measure(0.80, 0.79) - 0.7950) <= 0.0005);
  CHECK(f_measure(1.0, 0.0) == 0.0);
  CHECK(f_measure(0.0, 0.0) == 0.0);
}

TEST_CASE("macro averages skip absent classes") {
  const auto m = metrics(confusion(std::vector<int>{0, 1}, std::vector<int>{0, 1}, label_names(Granularity::Seven)));
  CHECK(m.macro_f_measure == 1.0);
  CHECK(m.f_measure == 1.0);
}

TEST_CASE("ROC examples") {
  const std::vector<double> s{0.9, 0.4, 0.35, 0.8};
  const std::vector<bool> pos{true, false, true, false};
  const auto r = roc_of(s, pos);
  CHECK(r.auc == oracle::pairwise_auc(s, pos));
  CHECK(r.auc == 0.5);
  CHECK(roc_of(std::vector<double>{0.9, 0.8, 0.1}, std::vector<bool>{true, true, false}).auc == 1.0);
  const auto flat = roc_of(std::vector<double>{0.3, 0.3, 0.3}, std::vector<bool>{true, false, false});
  CHECK(flat.auc == 0.5);
  CHECK(flat.points == std::vector<RocPoint>{{0, 0}, {1, 1}});
  CHECK_THROWS_AS(roc_of(std::vector<double>{0.1, 0.2}, std::vector<bool>{true, true}), Error);
  const std::vector<BinaryClass> labels{BinaryClass::Coin, BinaryClass::NotCoin};
  CHECK(roc(std::vector<double>{0.7, 0.2}, labels).auc == 1.0);
}

TEST_CASE("ROC curves are monotone and AUC matches pair counting") {
  testing::for_all(500, 62, [](Rng& rng, int) {
    const std::size_t n = 2 + rng.below(40);
    std::vector<double> s(n);
    std::vector<bool> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = rng.below(3) ? static_cast<double>(rng.below(6)) / 5 : rng.unit();
      pos[i] = rng.below(2);
    }
    pos[0] = true;
    pos[1] = false;
    const auto r = roc_of(s, pos);
    CHECK(std::abs(r.auc - oracle::pairwise_auc(s, pos)) <= 1e-12);
    REQUIRE(r.points.size() >= 2);
    CHECK(r.points.front() == RocPoint{0, 0});
    CHECK(r.points.back() == RocPoint{1, 1});
    for (std::size_t i = 1; i < r.points.size(); ++i) {
      CHECK(r.points[i].fpr >= r.points[i - 1].fpr);
      CHECK(r.points[i].tpr >= r.points[i - 1].tpr);
    }
    // Trapezoid area over the returned points.
    double area = 0;
    for (std::size_t i = 1; i < r.points.size(); ++i) {
      area += (r.points[i].fpr - r.points[i - 1].fpr) * (r.points[i].tpr + r.points[i - 1].tpr) / 2;
    }
    CHECK(area == doctest::Approx(r.auc).epsilon(1e-12));
  });
}

TEST_CASE("leave-one-out on seven sentences") {
  const auto corpus = generate_synthetic_corpus({.per_class = 1});
  CvOptions o;
  o.k = 7;
  const auto r = cross_validate(family(ml::Family::KNN), corpus, unigrams(), o);
  REQUIRE(r.folds.size() == 7);
  for (const auto& f : r.folds) {
    CHECK(f.test_size == 1);
    CHECK(f.train_size == 6);
  }
  CHECK(r.confusion.total() == 7);
}

TEST_CASE("cross-validation is deterministic and thread independent") {
  const auto corpus = synthetic(15);
  for (auto f : {ml::Family::LinearSVM, ml::Family::LogRegSGD, ml::Family::MultinomialNB}) {
    CvOptions o;
    o.k = 5;
    const auto a = cross_validate(family(f), corpus, {}, o);
    const auto b = cross_validate(family(f), corpus, {}, o);
    o.threads = 4;
    const auto c = cross_validate(family(f), corpus, {}, o);
    CHECK(a.predictions == b.predictions);
    CHECK(a.predictions == c.predictions);
    CHECK(a.confusion == c.confusion);
    CHECK(a.aggregate == c.aggregate);
    auto ja = to_json(a), jc = to_json(c);
    for (auto* j : {&ja, &jc}) {
      j->erase("seconds");
      for (auto& f : (*j)["folds"]) f.erase("seconds");
    }
    CHECK(ja == jc);
  }
}

TEST_CASE("separable synthetic corpus is learned by multinomial NB") {
  SyntheticCorpusSpec spec;
  spec.per_class = 200 / 7 + 1;
  spec.noise_fraction = 0.0;
  const auto corpus = generate_synthetic_corpus(spec);
  REQUIRE(corpus.size() >= 200);
  const auto r = cross_validate(family(ml::Family::MultinomialNB), corpus, {});
  CHECK(r.aggregate.accuracy >= 0.95);
}

TEST_CASE("pooled aggregate matches the pooled confusion") {
  const auto corpus = synthetic(10).with_granularity(Granularity::Two);
  CvOptions o;
  o.k = 4;
  const auto r = cross_validate(family(ml::Family::LogRegL2), corpus, unigrams(), o);
  CHECK(r.aggregate == metrics(r.confusion));
  std::vector<int> gold;
  for (std::size_t i = 0; i < corpus.size(); ++i) gold.push_back(corpus.label(i));
  CHECK(confusion(r.predictions, gold, label_names(Granularity::Two)) == r.confusion);
  REQUIRE(r.roc.has_value());
  CHECK(r.roc->auc >= 0.0);
  CHECK(r.roc->auc <= 1.0);
  std::uint64_t tested = 0;
  for (const auto& f : r.folds) tested += f.test_size;
  CHECK(tested == corpus.size());
}

TEST_CASE("test folds never reach the training vocabulary") {
  const auto corpus = synthetic(6);
  CvOptions o;
  o.k = 3;
  const auto folds = stratified_folds(corpus, o.k, o.seed);
  const std::size_t victim = 5;
  auto sentences = corpus.sentences();
  sentences[victim].text += " qqsentinel";
  const LabeledCorpus marked(sentences);
  REQUIRE(stratified_folds(marked, o.k, o.seed).fold_of == folds.fold_of);

  const auto before = cross_validate(family(ml::Family::MultinomialNB), corpus, unigrams(), o);
  const auto after = cross_validate(family(ml::Family::MultinomialNB), marked, unigrams(), o);
  for (int f = 0; f < o.k; ++f) {
    const auto expected = before.folds[f].vocabulary_size + (f == folds.fold_of[victim] ? 0 : 1);
    CHECK(after.folds[f].vocabulary_size == expected);
  }
  // The comparison mode fits on everything, so the sentinel shows up.
  o.fit_features_on_full_corpus = true;
  const auto leaky = cross_validate(family(ml::Family::MultinomialNB), marked, unigrams(), o);
  const auto clean = cross_validate(family(ml::Family::MultinomialNB), corpus, unigrams(), o);
  CHECK(leaky.folds[folds.fold_of[victim]].vocabulary_size ==
        clean.folds[folds.fold_of[victim]].vocabulary_size + 1);
  CHECK(leaky.fit_features_on_full_corpus);
}

TEST_CASE("fold errors name the fold") {
  auto spec = family(ml::Family::PolySVM);
  spec.params.max_iterations = 1;
  spec.params.tolerance = 1e-12;
  CvOptions o;
  o.k = 3;
  try {
    cross_validate(spec, synthetic(6), unigrams(), o);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TrainingIncomplete);
    const std::string what = e.what();
    CAPTURE(what);
    CHECK(std::string(e.what()).rfind("fold 0: ", 0) == 0);
  }
  o.k = 100;
  CHECK_THROWS_AS(cross_validate(family(ml::Family::KNN), synthetic(2), unigrams(), o), Error);
}

TEST_CASE("grid enumeration") {
  const auto g = parse_grid(nlohmann::ordered_json::parse(
      R"({"family": "LinearSVM", "grid": {"C": [0.1, 1], "loss": ["hinge", "squared-hinge"]}})"));
  CHECK(g.size() == 4);
  CHECK(g.point(0) == std::vector<std::pair<std::string, std::string>>{{"C", "0.1"}, {"loss", "hinge"}});
  CHECK(g.point(1) == std::vector<std::pair<std::string, std::string>>{{"C", "0.1"}, {"loss", "squared-hinge"}});
  CHECK(g.point(3) == std::vector<std::pair<std::string, std::string>>{{"C", "1"}, {"loss", "squared-hinge"}});
  CHECK(load_grid(testing::source_path("data/grids/linear_svm_2x2.json")).size() == 4);
  CHECK(load_grid(testing::source_path("data/grids/linear_svm_756.json")).size() == 756);
  CHECK_NOTHROW(load_grid(testing::source_path("data/grids/poly_svm.json")).validate());

  for (const char* bad : {R"({"family": "LinearSVM", "grid": {"k": [1]}})",
                          R"({"family": "LinearSVM", "grid": {"C": []}})",
                          R"({"family": "LinearSVM", "grid": {"C": [-1]}})",
                          R"({"family": "Forest", "grid": {"C": [1]}})"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_grid(nlohmann::ordered_json::parse(bad)), Error);
  }
}

TEST_CASE("grid size is the product of the value lists") {
  testing::for_all(100, 63, [](Rng& rng, int) {
    Grid g;
    g.family = ml::Family::LogRegSGD;
    const std::vector<std::string> names{"learning_rate", "epochs", "lambda", "input"};
    std::size_t product = 1;
    for (std::size_t p = 0, n = 1 + rng.below(4); p < n; ++p) {
      const auto count = 1 + rng.below(4);
      std::vector<std::string> values;
      for (std::size_t v = 0; v < count; ++v) {
        values.push_back(names[p] == "input" ? std::vector<std::string>{"auto", "counts", "tfidf", "auto"}[v]
                                             : std::to_string(v + 1));
      }
      g.parameters.push_back({names[p], values});
      product *= count;
    }
    CHECK(g.size() == product);
    std::set<std::vector<std::pair<std::string, std::string>>> seen;
    for (std::size_t i = 0; i < g.size(); ++i) seen.insert(g.point(i));
    CHECK(seen.size() <= product);
    // Mixed-radix decode with the last parameter fastest.
    const auto i = rng.below(product);
    auto rest = i;
    auto pt = g.point(i);
    for (std::size_t p = g.parameters.size(); p-- > 0;) {
      const auto& vals = g.parameters[p].second;
      CHECK(pt[p].second == vals[rest % vals.size()]);
      rest /= vals.size();
    }
  });
}

TEST_CASE("grid search logs every trial and picks the best") {
  const auto corpus = synthetic(6);
  SearchOptions o;
  o.cv.k = 3;
  auto g = load_grid(testing::source_path("data/grids/linear_svm_2x2.json"));
  std::size_t seen = 0;
  o.on_trial = [&](const Trial&) { ++seen; };
  const auto r = grid_search(g, corpus, unigrams(), o);
  CHECK(r.trials.size() == 4);
  CHECK(seen == 4);
  for (std::size_t i = 0; i < r.trials.size(); ++i) {
    CHECK(r.trials[i].index == i);
    CHECK(r.trials[i].aggregate.has_value());
  }
  REQUIRE(r.best.has_value());
  for (const auto& t : r.trials) CHECK(t.aggregate->f_measure <= r.best_trial().aggregate->f_measure);
  for (std::size_t i = 0; i < *r.best; ++i) {
    CHECK(r.trials[i].aggregate->f_measure < r.best_trial().aggregate->f_measure);
  }
  o.threads = 3;
  const auto par = grid_search(g, corpus, unigrams(), o);
  CHECK(par.best == r.best);
  for (std::size_t i = 0; i < 4; ++i) CHECK(par.trials[i].aggregate == r.trials[i].aggregate);
}

TEST_CASE("grid search prefers the C that does not underfit") {
  // Six COIN sentences per Not-COIN one: with a tiny C every dual variable
  // sits at its bound and the class-size term swamps the features.
  const auto corpus = synthetic(10).with_granularity(Granularity::Two);
  Grid g;
  g.family = ml::Family::LinearSVM;
  g.parameters = {{"C", {"0.00001", "1", "0.0001"}}};
  SearchOptions o;
  o.cv.k = 3;
  const auto r = grid_search(g, corpus, unigrams(), o);
  CHECK(r.best_trial().assignment[0].second == "1");
  for (std::size_t t : {0, 2}) {
    CHECK(r.trials[t].aggregate->per_class[1].recall == 0.0);
    CHECK(r.trials[t].aggregate->f_measure < r.trials[1].aggregate->f_measure);
  }
  CHECK(r.trials[1].aggregate->per_class[1].recall > 0.9);
}

TEST_CASE("failing trials are recorded") {
  const auto corpus = synthetic(6);
  Grid g;
  g.family = ml::Family::PolySVM;
  g.parameters = {{"max_iterations", {"1", "100000"}}, {"tolerance", {"0.000000000001"}}};
  SearchOptions o;
  o.cv.k = 3;
  const auto r = grid_search(g, corpus, unigrams(), o);
  REQUIRE(r.trials.size() == 2);
  CHECK(r.trials[0].error.has_value());
  CHECK_FALSE(r.trials[0].aggregate.has_value());
  CHECK(r.best == std::optional<std::size_t>(1));

  g.parameters = {{"max_iterations", {"1", "2"}}, {"tolerance", {"0.000000000001"}}};
  try {
    grid_search(g, corpus, unigrams(), o);
    FAIL("no error");
  } catch (const SearchFailed& e) {
    CHECK(e.code() == ErrorCode::SearchFailed);
    CHECK(e.result().trials.size() == 2);
    CHECK_FALSE(e.result().best.has_value());
  }
}

TEST_CASE("report serialisation") {
  CvOptions o;
  o.k = 3;
  const auto r = cross_validate(family(ml::Family::ComplementNB), synthetic(5), unigrams(), o);
  const auto j = to_json(r);
  CHECK(j["k"] == 3);
  CHECK(j["folds"].size() == 3);
  CHECK(j["spec"]["family"] == "ComplementNB");
  CHECK(j["aggregate"]["f_measure"].get<double>() == r.aggregate.f_measure);
  const auto table = format_table(r);
  CHECK(table.find("ComplementNB (weighted)") != std::string::npos);
  CHECK(table.find("Quality") != std::string::npos);
}
