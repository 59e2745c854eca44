#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "traitpipe/evaluation.hpp"
#include "traitpipe/rng.hpp"

using namespace traitpipe;
using namespace traitpipe::eval;
using psych::LabelValue;
using psych::Scheme;
using psych::TraitLabel;

namespace {

std::vector<TraitLabel> two_level(const std::vector<int>& highs) {
  std::vector<TraitLabel> labels;
  for (const int h : highs) {
    labels.push_back({Scheme::kTwo, h != 0 ? LabelValue::kHigh : LabelValue::kLow});
  }
  return labels;
}

// Pair-counting oracle for the rank statistic, ties worth one half.
double auc_pair_oracle(const std::vector<double>& scores, const std::vector<int>& pos) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (pos[i] == 0) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (pos[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

// Independently coded two-level metric formulas.
struct MetricOracle {
  double accuracy, precision, recall, f1;
};

MetricOracle metric_oracle(double tp, double fp, double fn, double tn) {
  MetricOracle m{};
  m.accuracy = (tp + tn) / (tp + fp + fn + tn);
  m.precision = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
  m.recall = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

}  // namespace

TEST_CASE("split_train_test") {
  SUBCASE("80/20 on ten rows gives 8 and 2") {
    const auto split = split_train_test(10, 0.8, 1);
    CHECK(split.train.size() == 8);
    CHECK(split.test.size() == 2);
  }

  SUBCASE("five rows floor to 4/1") {
    const auto split = split_train_test(5, 0.8, 1);
    CHECK(split.train.size() == 4);
    CHECK(split.test.size() == 1);
  }

  SUBCASE("same seed gives the same partition, different seeds differ") {
    const auto a = split_train_test(50, 0.8, 7);
    const auto b = split_train_test(50, 0.8, 7);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    const auto c = split_train_test(50, 0.8, 8);
    CHECK(a.train != c.train);
  }

  SUBCASE("partitions are disjoint and covering") {
    Rng rng(4);
    for (int rep = 0; rep < 20; ++rep) {
      const std::size_t n = 5 + rng.next_below(100);
      const auto split = split_train_test(n, 0.8, rng.next_u64());
      std::set<std::size_t> seen;
      for (const auto i : split.train) CHECK(seen.insert(i).second);
      for (const auto i : split.test) CHECK(seen.insert(i).second);
      CHECK(seen.size() == n);
      CHECK(*seen.rbegin() == n - 1);
    }
  }

  SUBCASE("fewer than five rows is an error") {
    CHECK_THROWS_AS((void)split_train_test(4, 0.8, 1), InsufficientDataError);
  }

  SUBCASE("stratified split balances class shares") {
    std::vector<int> highs(100, 0);
    for (int i = 0; i < 20; ++i) highs[static_cast<std::size_t>(i)] = 1;
    const auto labels = two_level(highs);
    const auto split = split_train_test_stratified(labels, 0.8, 3);
    std::size_t train_high = 0;
    for (const auto i : split.train) train_high += highs[i];
    CHECK(train_high == 16);  // floor(0.8 * 20)
    CHECK(split.train.size() + split.test.size() == 100);
  }
}

TEST_CASE("metrics_two_level") {
  SUBCASE("worked example: accuracy 0.7, precision 0.6, recall 0.75") {
    const auto cm = ConfusionMatrix::from_counts_two_level(3, 2, 1, 4);
    CHECK(cm.tp() == 3);
    CHECK(cm.fp() == 2);
    CHECK(cm.fn() == 1);
    CHECK(cm.tn() == 4);
    const auto m = metrics_two_level(cm);
    CHECK(m.accuracy == doctest::Approx(0.7));
    CHECK(m.precision == doctest::Approx(0.6));
    CHECK(m.recall == doctest::Approx(0.75));
  }

  SUBCASE("equal precision and recall is the F1 fixed point") {
    const auto cm = ConfusionMatrix::from_counts_two_level(3, 1, 1, 5);
    const auto m = metrics_two_level(cm);
    CHECK(m.precision == doctest::Approx(m.recall));
    CHECK(m.f1 == doctest::Approx(m.precision));
  }

  SUBCASE("zero denominators report 0 with the flag cleared") {
    const auto cm = ConfusionMatrix::from_counts_two_level(0, 0, 2, 5);
    const auto m = metrics_two_level(cm);
    CHECK(m.precision == 0.0);
    CHECK_FALSE(m.precision_defined);
    CHECK(m.recall == 0.0);
    CHECK(m.f1 == 0.0);
    CHECK_FALSE(m.f1_defined);
  }

  SUBCASE("empty matrix is an error") {
    const auto cm = ConfusionMatrix::from_counts_two_level(0, 0, 0, 0);
    CHECK_THROWS_AS((void)metrics_two_level(cm), ValidationError);
  }

  SUBCASE("exhaustive agreement with the formula oracle for counts 0..5") {
    for (int tp = 0; tp <= 5; ++tp) {
      for (int fp = 0; fp <= 5; ++fp) {
        for (int fn = 0; fn <= 5; ++fn) {
          for (int tn = 0; tn <= 5; ++tn) {
            if (tp + fp + fn + tn == 0) continue;
            const auto cm = ConfusionMatrix::from_counts_two_level(tp, fp, fn, tn);
            const auto m = metrics_two_level(cm);
            const auto oracle = metric_oracle(tp, fp, fn, tn);
            CHECK(m.accuracy == oracle.accuracy);
            CHECK(m.precision == oracle.precision);
            CHECK(m.recall == oracle.recall);
            CHECK(m.f1 == oracle.f1);
          }
        }
      }
    }
  }

  SUBCASE("two-level accuracy equals trace over total") {
    Rng rng(5);
    for (int rep = 0; rep < 30; ++rep) {
      ConfusionMatrix cm = ConfusionMatrix::from_counts_two_level(
          static_cast<double>(rng.next_below(9)), static_cast<double>(rng.next_below(9)),
          static_cast<double>(rng.next_below(9)), static_cast<double>(rng.next_below(9)));
      if (cm.total() == 0.0) continue;
      CHECK(metrics_two_level(cm).accuracy ==
            doctest::Approx(cm.trace() / cm.total()).epsilon(1e-12));
    }
  }

  SUBCASE("three-level cell totals behave") {
    Rng rng(15);
    ConfusionMatrix cm;
    cm.classes = {LabelValue::kLow, LabelValue::kMedium, LabelValue::kHigh};
    cm.counts.resize(9);
    for (auto& c : cm.counts) c = static_cast<double>(rng.next_below(9));
    CHECK(cm.trace() <= cm.total());
    // One-vs-rest High counts partition the grid.
    CHECK(cm.tp() + cm.fp() + cm.fn() + cm.tn() == doctest::Approx(cm.total()));
  }
}

TEST_CASE("weighted_f1") {
  SUBCASE("single class is the identity") {
    const std::vector<double> f1 = {0.62}, sizes = {17.0};
    CHECK(weighted_f1(f1, sizes) == doctest::Approx(0.62));
  }

  SUBCASE("hand formula: (3*0.8 + 1*0.4) / 4 = 0.7") {
    const std::vector<double> f1 = {0.8, 0.4}, sizes = {3.0, 1.0};
    CHECK(weighted_f1(f1, sizes) == doctest::Approx(0.7));
  }

  SUBCASE("equal sizes give the arithmetic mean") {
    const std::vector<double> f1 = {0.9, 0.5, 0.1}, sizes = {4.0, 4.0, 4.0};
    CHECK(weighted_f1(f1, sizes) == doctest::Approx(0.5));
  }

  SUBCASE("always between the extreme per-class values") {
    Rng rng(6);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> f1(3), sizes(3);
      for (auto& v : f1) v = rng.next_double();
      for (auto& v : sizes) v = static_cast<double>(1 + rng.next_below(50));
      const double w = weighted_f1(f1, sizes);
      CHECK(w >= *std::min_element(f1.begin(), f1.end()) - 1e-12);
      CHECK(w <= *std::max_element(f1.begin(), f1.end()) + 1e-12);
    }
  }

  SUBCASE("zero total size is an error") {
    const std::vector<double> f1 = {0.5}, sizes = {0.0};
    CHECK_THROWS_AS((void)weighted_f1(f1, sizes), ValidationError);
    const std::vector<double> mismatched = {0.5, 0.1};
    CHECK_THROWS_AS((void)weighted_f1(mismatched, sizes), ValidationError);
  }
}

TEST_CASE("roc_auc") {
  SUBCASE("perfect ranking scores 1") {
    const std::vector<double> scores = {0.1, 0.2, 0.8, 0.9};
    const std::vector<int> pos = {0, 0, 1, 1};
    CHECK(roc_auc(scores, pos) == doctest::Approx(1.0));
  }

  SUBCASE("all-equal scores give one half") {
    const std::vector<double> scores = {0.5, 0.5, 0.5, 0.5};
    const std::vector<int> pos = {0, 1, 0, 1};
    CHECK(roc_auc(scores, pos) == doctest::Approx(0.5));
  }

  SUBCASE("worked example lands on 0.75") {
    const std::vector<double> scores = {0.1, 0.4, 0.35, 0.8};
    const std::vector<int> pos = {0, 0, 1, 1};
    CHECK(roc_auc(scores, pos) == doctest::Approx(0.75));
    CHECK(auc_pair_oracle(scores, pos) == doctest::Approx(0.75));
  }

  SUBCASE("one class absent is undefined") {
    const std::vector<double> scores = {0.1, 0.2};
    const std::vector<int> pos = {1, 1};
    CHECK_THROWS_AS((void)roc_auc(scores, pos), UndefinedStatError);
  }

  SUBCASE("agrees with the pair oracle, holds its symmetries") {
    Rng rng(7);
    for (int rep = 0; rep < 200; ++rep) {
      const std::size_t n = 4 + rng.next_below(40);
      std::vector<double> scores(n);
      std::vector<int> pos(n);
      bool has_pos = false, has_neg = false;
      for (std::size_t i = 0; i < n; ++i) {
        // Coarse grid forces ties.
        scores[i] = std::round(rng.next_double() * 8.0) / 8.0;
        pos[i] = rng.next_bernoulli(0.4) ? 1 : 0;
        (pos[i] != 0 ? has_pos : has_neg) = true;
      }
      if (!has_pos || !has_neg) continue;
      const double auc = roc_auc(scores, pos);
      CHECK(auc == doctest::Approx(auc_pair_oracle(scores, pos)).epsilon(1e-12));

      // Invariance under a strictly increasing transform (tie structure kept).
      std::vector<double> transformed(n);
      for (std::size_t i = 0; i < n; ++i) transformed[i] = std::exp(3.0 * scores[i]);
      CHECK(roc_auc(transformed, pos) == auc);

      // Complement symmetry under label flip.
      std::vector<int> flipped(n);
      for (std::size_t i = 0; i < n; ++i) flipped[i] = 1 - pos[i];
      CHECK(roc_auc(scores, flipped) == doctest::Approx(1.0 - auc).epsilon(1e-12));
    }
  }
}

TEST_CASE("render_report") {
  EvaluationReport report;
  auto add_cell = [&](const std::string& trait, const std::string& family,
                      double accuracy, double auc, double precision) {
    EvalCell cell;
    cell.trait = trait;
    cell.family = family;
    cell.scheme = Scheme::kTwo;
    cell.accuracy = accuracy;
    cell.auc = auc;
    cell.precision = precision;
    cell.n_test = 80;
    report.cells.push_back(cell);
  };
  // One row where a single family dominates all three metrics.
  add_cell("extraversion", "glm", 0.68, 0.746, 0.68);
  add_cell("extraversion", "mlp", 0.74, 0.802, 0.74);
  add_cell("extraversion", "rf", 0.56, 0.731, 0.55);

  const std::vector<std::string> order = {"glm", "mlp", "rf"};
  const auto rendered = render_report(report, Scheme::kTwo, order);

  SUBCASE("the dominating family is flagged best on every metric") {
    const auto j = nlohmann::json::parse(rendered.json);
    for (const auto& row : j.at("rows")) {
      CHECK(row.at("families").at("mlp").at("best").get<bool>() == true);
      CHECK(row.at("families").at("glm").at("best").get<bool>() == false);
      CHECK(row.at("families").at("rf").at("best").get<bool>() == false);
    }
    CHECK(rendered.csv.find("mlp_best") != std::string::npos);
  }

  SUBCASE("a single-family report flags everything best") {
    EvaluationReport solo;
    solo.cells.push_back(report.cells[0]);
    const std::vector<std::string> solo_order = {"glm"};
    const auto r = render_report(solo, Scheme::kTwo, solo_order);
    const auto j = nlohmann::json::parse(r.json);
    for (const auto& row : j.at("rows")) {
      CHECK(row.at("families").at("glm").at("best").get<bool>() == true);
    }
  }

  SUBCASE("families with no cells are omitted") {
    const std::vector<std::string> wide_order = {"dt", "glm", "mlp", "rf"};
    const auto r = render_report(report, Scheme::kTwo, wide_order);
    CHECK(r.csv.find("dt") == std::string::npos);
  }
}

TEST_CASE("evaluation report JSON round-trip") {
  EvaluationReport report;
  EvalCell cell;
  cell.trait = "energy";
  cell.family = "rf";
  cell.scheme = Scheme::kThree;
  cell.accuracy = 0.61;
  cell.weighted_f1 = 0.50;
  cell.class_f1 = {0.4, 0.6, 0.3};
  cell.class_sizes = {10, 50, 20};
  cell.n_test = 80;
  cell.split_seed = 99;
  cell.notes = {"note"};
  report.cells.push_back(cell);
  const auto back = report_from_json(report_to_json(report));
  REQUIRE(back.cells.size() == 1);
  CHECK(back.cells[0].trait == "energy");
  CHECK(back.cells[0].weighted_f1 == doctest::Approx(0.50));
  CHECK_FALSE(back.cells[0].auc.has_value());
  CHECK(back.cells[0].class_f1 == cell.class_f1);
  CHECK(back.cells[0].split_seed == 99);
}
