#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "traitpipe/learners.hpp"
#include "traitpipe/rng.hpp"
#include "traitpipe/selection.hpp"

using namespace traitpipe;
using namespace traitpipe::select;
using psych::LabelValue;
using psych::Scheme;
using psych::TraitLabel;

namespace {

// Oracle: direct covariance / variance evaluation.
double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  return cov / std::sqrt(vx * vy);
}

// Oracle: two-sided t tail probability by Simpson integration of the
// density (independent of the incomplete-beta route).
double t_pvalue_oracle(double t, double df) {
  const double a = std::fabs(t);
  if (a == 0.0) return 1.0;
  const double log_norm = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) -
                          0.5 * std::log(df * M_PI);
  auto pdf = [&](double x) {
    return std::exp(log_norm - (df + 1.0) / 2.0 * std::log1p(x * x / df));
  };
  const int steps = 40000;  // Simpson over [0, a]
  const double h = a / steps;
  double sum = pdf(0.0) + pdf(a);
  for (int i = 1; i < steps; ++i) {
    sum += pdf(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  const double integral = sum * h / 3.0;
  return std::max(0.0, 1.0 - 2.0 * integral);
}

features::FeatureMatrix make_matrix(const std::vector<std::string>& names,
                                    const std::vector<std::vector<Cell>>& columns) {
  features::FeatureMatrix m;
  const std::size_t rows = columns.front().size();
  for (const auto& name : names) {
    m.columns.add(name, features::FeatureCategory::kPostProfile);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    m.row_ids.push_back("p" + std::to_string(r));
    for (std::size_t c = 0; c < names.size(); ++c) m.cells.push_back(columns[c][r]);
  }
  return m;
}

std::vector<TraitLabel> two_level(const std::vector<int>& highs) {
  std::vector<TraitLabel> labels;
  for (const int h : highs) {
    labels.push_back({Scheme::kTwo, h != 0 ? LabelValue::kHigh : LabelValue::kLow});
  }
  return labels;
}

}  // namespace

TEST_CASE("pearson") {
  SUBCASE("perfect linear relation") {
    const std::vector<double> x = {1, 2, 3}, y = {2, 4, 6};
    CHECK(pearson(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("sign reversal") {
    const std::vector<double> x = {1, 2, 3}, y = {-1, -2, -3};
    CHECK(pearson(x, y) == doctest::Approx(-1.0).epsilon(1e-12));
  }

  SUBCASE("hand-computed 0.8 case") {
    const std::vector<double> x = {1, 2, 3, 4}, y = {1, 3, 2, 4};
    CHECK(pearson(x, y) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(pearson_oracle(x, y) == doctest::Approx(0.8).epsilon(1e-12));
  }

  SUBCASE("errors") {
    const std::vector<double> constant = {2, 2, 2, 2};
    const std::vector<double> varying = {1, 2, 3, 4};
    CHECK_THROWS_AS((void)pearson(constant, varying), UndefinedStatError);
    const std::vector<double> tiny_a = {1, 2}, tiny_b = {2, 3};
    CHECK_THROWS_AS((void)pearson(tiny_a, tiny_b), InsufficientDataError);
  }

  SUBCASE("pairwise deletion over missing cells") {
    const std::vector<Cell> x = {1.0, std::nullopt, 2.0, 3.0, 4.0};
    const std::vector<Cell> y = {1.0, 100.0, 3.0, 2.0, 4.0};
    CHECK(pearson(x, y) == doctest::Approx(0.8).epsilon(1e-12));
  }

  SUBCASE("matches the direct-formula oracle on random vectors") {
    Rng rng(2718);
    for (int rep = 0; rep < 200; ++rep) {
      const std::size_t n = 3 + rng.next_below(40);
      std::vector<double> x(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.next_normal();
        y[i] = 0.4 * x[i] + rng.next_normal();
      }
      CHECK(pearson(x, y) == doctest::Approx(pearson_oracle(x, y)).epsilon(1e-10));
    }
  }

  SUBCASE("affine invariance up to sign and symmetry") {
    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
      const std::size_t n = 5 + rng.next_below(20);
      std::vector<double> x(n), y(n), ax(n);
      double a = 0.0;
      while (a == 0.0) a = rng.next_normal();
      const double b = rng.next_normal();
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.next_normal();
        y[i] = rng.next_normal();
        ax[i] = a * x[i] + b;
      }
      const double r = pearson(std::span<const double>(x), std::span<const double>(y));
      CHECK(pearson(std::span<const double>(ax), std::span<const double>(y)) ==
            doctest::Approx((a > 0 ? 1.0 : -1.0) * r).epsilon(1e-9));
      CHECK(pearson(std::span<const double>(y), std::span<const double>(x)) ==
            doctest::Approx(r).epsilon(1e-12));
    }
  }

  SUBCASE("binary features reduce to the point-biserial coefficient") {
    Rng rng(11);
    for (int rep = 0; rep < 30; ++rep) {
      const std::size_t n = 30 + rng.next_below(50);
      std::vector<double> f(n), y(n);
      std::size_t n1 = 0;
      for (std::size_t i = 0; i < n; ++i) {
        f[i] = rng.next_bernoulli(0.4) ? 1.0 : 0.0;
        y[i] = f[i] * 0.8 + rng.next_normal();
        n1 += static_cast<std::size_t>(f[i]);
      }
      if (n1 == 0 || n1 == n) continue;
      const double n0 = static_cast<double>(n - n1);
      double m1 = 0.0, m0 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        (f[i] > 0.5 ? m1 : m0) += y[i];
      }
      m1 /= static_cast<double>(n1);
      m0 /= n0;
      double ss = 0.0, mean = 0.0;
      for (const double v : y) mean += v;
      mean /= static_cast<double>(n);
      for (const double v : y) ss += (v - mean) * (v - mean);
      const double sdn = std::sqrt(ss / static_cast<double>(n));
      const double point_biserial =
          (m1 - m0) / sdn *
          std::sqrt(static_cast<double>(n1) * n0 / static_cast<double>(n * n));
      CHECK(pearson(std::span<const double>(f), std::span<const double>(y)) ==
            doctest::Approx(point_biserial).epsilon(1e-9));
    }
  }
}

TEST_CASE("pearson_pvalue") {
  SUBCASE("null and degenerate anchors") {
    CHECK(pearson_pvalue(0.0, 10) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson_pvalue(1.0, 10) == 0.0);
    CHECK(pearson_pvalue(-1.0, 5) == 0.0);
  }

  SUBCASE("r = 0.8 at n = 5 lands near 0.104") {
    CHECK(pearson_pvalue(0.8, 5) == doctest::Approx(0.104).epsilon(0.005));
  }

  SUBCASE("matches the integration oracle across n in {5, 30, 400}") {
    for (const std::size_t n : {std::size_t{5}, std::size_t{30}, std::size_t{400}}) {
      for (double r = -0.95; r < 0.96; r += 0.19) {
        const double df = static_cast<double>(n - 2);
        const double t = r * std::sqrt(df / (1.0 - r * r));
        CHECK(pearson_pvalue(r, n) ==
              doctest::Approx(t_pvalue_oracle(t, df)).epsilon(1e-6));
      }
    }
  }

  SUBCASE("p decreases in |r| for fixed n") {
    double previous = 1.1;
    for (double r = 0.0; r < 0.999; r += 0.05) {
      const double p = pearson_pvalue(r, 30);
      CHECK(p <= previous + 1e-15);
      previous = p;
    }
  }
}

TEST_CASE("target_indicator") {
  SUBCASE("modal class wins") {
    const auto labels = two_level({1, 1, 1, 0});
    const auto target = target_indicator(labels);
    CHECK(target.target_class == LabelValue::kHigh);
    CHECK(target.values == std::vector<double>{1, 1, 1, 0});
  }

  SUBCASE("medium modal in three-level") {
    std::vector<TraitLabel> labels = {{Scheme::kThree, LabelValue::kMedium},
                                      {Scheme::kThree, LabelValue::kMedium},
                                      {Scheme::kThree, LabelValue::kLow},
                                      {Scheme::kThree, LabelValue::kHigh}};
    const auto target = target_indicator(labels);
    CHECK(target.target_class == LabelValue::kMedium);
    CHECK(target.values == std::vector<double>{1, 1, 0, 0});
  }

  SUBCASE("exact tie breaks toward the higher-ordered class") {
    const auto labels = two_level({1, 1, 0, 0});
    CHECK(target_indicator(labels).target_class == LabelValue::kHigh);
  }

  SUBCASE("single class is a degenerate target") {
    const auto labels = two_level({1, 1, 1});
    CHECK_THROWS_AS((void)target_indicator(labels), UndefinedStatError);
  }
}

TEST_CASE("select_features") {
  SUBCASE("a feature equal to the indicator is selected first with r = 1") {
    Rng rng(5);
    std::vector<int> highs(40);
    for (auto& h : highs) h = rng.next_bernoulli(0.5) ? 1 : 0;
    highs[0] = 1;
    highs[1] = 0;
    const auto labels = two_level(highs);
    const auto target = target_indicator(labels);
    std::vector<Cell> self, noise;
    for (std::size_t i = 0; i < highs.size(); ++i) {
      self.emplace_back(target.values[i]);
      noise.emplace_back(rng.next_normal());
    }
    const auto matrix = make_matrix({"noise", "self"}, {noise, self});
    const auto selected = select_features(matrix, labels, "energy");
    REQUIRE_FALSE(selected.feature_names.empty());
    CHECK(selected.feature_names.front() == "self");
    CHECK(selected.feature_r.front() == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("constant features are skipped with a note") {
    const auto labels = two_level({1, 0, 1, 0, 1, 0});
    std::vector<Cell> constant(6, Cell(3.0));
    std::vector<Cell> useful = {1.0, 0.0, 1.0, 0.0, 1.0, 0.0};
    const auto matrix = make_matrix({"flat", "useful"}, {constant, useful});
    const auto selected = select_features(matrix, labels, "energy");
    CHECK(selected.feature_names == std::vector<std::string>{"useful"});
    REQUIRE(selected.notes.size() == 1);
    CHECK(selected.notes.front().find("flat") != std::string::npos);
  }

  SUBCASE("row permutation does not change the result") {
    Rng rng(17);
    const std::size_t n = 60;
    std::vector<int> highs(n);
    std::vector<Cell> f1(n), f2(n), f3(n);
    for (std::size_t i = 0; i < n; ++i) {
      highs[i] = rng.next_bernoulli(0.5) ? 1 : 0;
      f1[i] = highs[i] + 0.5 * rng.next_normal();
      f2[i] = rng.next_normal();
      f3[i] = -0.7 * highs[i] + 0.5 * rng.next_normal();
    }
    const auto labels = two_level(highs);
    const auto matrix = make_matrix({"a", "b", "c"}, {f1, f2, f3});
    const auto base = select_features(matrix, labels, "energy");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    features::FeatureMatrix shuffled = matrix.select_rows(order);
    std::vector<TraitLabel> shuffled_labels;
    for (const auto i : order) shuffled_labels.push_back(labels[i]);
    const auto permuted = select_features(shuffled, shuffled_labels, "energy");
    CHECK(permuted.feature_names == base.feature_names);
  }

  SUBCASE("tightening p_max only shrinks the set") {
    Rng rng(23);
    const std::size_t n = 80;
    std::vector<int> highs(n);
    std::vector<std::vector<Cell>> cols(6, std::vector<Cell>(n));
    for (std::size_t i = 0; i < n; ++i) {
      highs[i] = rng.next_bernoulli(0.5) ? 1 : 0;
      for (std::size_t c = 0; c < cols.size(); ++c) {
        cols[c][i] = 0.25 * static_cast<double>(c) * highs[i] + rng.next_normal();
      }
    }
    const auto labels = two_level(highs);
    const auto matrix =
        make_matrix({"f0", "f1", "f2", "f3", "f4", "f5"}, cols);
    SelectionParams loose{0.01, 0.2};
    SelectionParams tight{0.01, 0.02};
    const auto wide = select_features(matrix, labels, "energy", loose);
    const auto narrow = select_features(matrix, labels, "energy", tight);
    CHECK(narrow.feature_names.size() <= wide.feature_names.size());
    for (const auto& name : narrow.feature_names) {
      CHECK(std::find(wide.feature_names.begin(), wide.feature_names.end(), name) !=
            wide.feature_names.end());
    }
  }

  SUBCASE("pure-noise features pass at roughly the significance level") {
    // Signed selection keeps only the positive tail, so the hit rate sits
    // between one and two quantiles of p_max.
    const std::size_t n = 400, n_features = 150;
    std::size_t selected_count = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Rng rng(seed);
      std::vector<int> highs(n);
      for (auto& h : highs) h = rng.next_bernoulli(0.5) ? 1 : 0;
      std::vector<std::vector<Cell>> cols(n_features, std::vector<Cell>(n));
      std::vector<std::string> names;
      for (std::size_t c = 0; c < n_features; ++c) {
        names.push_back("n" + std::to_string(c));
        for (std::size_t i = 0; i < n; ++i) cols[c][i] = rng.next_normal();
      }
      const auto labels = two_level(highs);
      const auto matrix = make_matrix(names, cols);
      selected_count += select_features(matrix, labels, "energy").feature_names.size();
    }
    const double rate =
        static_cast<double>(selected_count) / static_cast<double>(10 * n_features);
    CHECK(rate <= 0.10);   // within 2x of p_max
    CHECK(rate >= 0.005);  // and not degenerately strict
  }
}

namespace {

// Validation-accuracy scorer backed by the regularized logit trainer.
double lr_scorer(const features::FeatureMatrix& train,
                 std::span<const TraitLabel> train_labels,
                 const features::FeatureMatrix& validation,
                 std::span<const TraitLabel> validation_labels, std::uint64_t seed) {
  learn::ModelSpec spec;
  spec.family = learn::ModelFamily::kLogisticRegression;
  spec.scheme = Scheme::kTwo;
  spec.seed = seed;
  const auto model = learn::fit_model(train, train_labels, spec);
  std::size_t correct = 0;
  std::vector<Cell> row(validation.n_cols());
  for (std::size_t r = 0; r < validation.n_rows(); ++r) {
    for (std::size_t c = 0; c < validation.n_cols(); ++c) row[c] = validation.at(r, c);
    if (learn::predict_ordered(model, row).label == validation_labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(validation.n_rows());
}

}  // namespace

TEST_CASE("refine_features") {
  SUBCASE("a duplicated copy of a selected feature is dropped") {
    Rng rng(31);
    const std::size_t n = 200;
    std::vector<int> highs(n);
    std::vector<Cell> signal(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double z = rng.next_normal();
      signal[i] = z;
      // Biased threshold keeps High the modal class.
      highs[i] = z + 0.3 * rng.next_normal() > -0.4 ? 1 : 0;
    }
    const auto labels = two_level(highs);
    const auto matrix = make_matrix({"x", "x_copy"}, {signal, signal});
    const auto initial = select_features(matrix, labels, "energy");
    REQUIRE(initial.feature_names.size() == 2);
    const auto refined = refine_features(matrix, labels, initial, lr_scorer, 7);
    CHECK(refined.feature_names.size() == 1);
  }

  SUBCASE("single-feature candidate list returns that feature") {
    Rng rng(37);
    const std::size_t n = 60;
    std::vector<int> highs(n);
    std::vector<Cell> signal(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double z = rng.next_normal();
      signal[i] = z;
      highs[i] = z > -0.4 ? 1 : 0;
    }
    const auto labels = two_level(highs);
    const auto matrix = make_matrix({"only"}, {signal});
    const auto initial = select_features(matrix, labels, "energy");
    REQUIRE(initial.feature_names.size() == 1);
    const auto refined = refine_features(matrix, labels, initial, lr_scorer, 7);
    CHECK(refined.feature_names == std::vector<std::string>{"only"});
  }

  SUBCASE("planted independent signals survive refinement") {
    std::size_t kept_planted = 0, total_planted = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Rng rng(seed * 101);
      const std::size_t n = 400;
      std::vector<int> highs(n);
      std::vector<std::vector<Cell>> cols;
      std::vector<std::string> names = {"p0", "p1", "p2"};
      cols.resize(3, std::vector<Cell>(n));
      for (std::size_t c = 0; c < 12; ++c) {
        names.push_back("noise" + std::to_string(c));
        cols.emplace_back(n);
      }
      for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
          const double v = rng.next_normal();
          cols[c][i] = v;
          sum += v;
        }
        for (std::size_t c = 3; c < cols.size(); ++c) cols[c][i] = rng.next_normal();
        highs[i] = sum + 0.6 * rng.next_normal() > -0.6 ? 1 : 0;
      }
      const auto labels = two_level(highs);
      const auto matrix = make_matrix(names, cols);
      const auto initial = select_features(matrix, labels, "energy");
      if (initial.feature_names.empty()) continue;
      const auto refined = refine_features(matrix, labels, initial, lr_scorer, seed);
      for (const auto& planted : {"p0", "p1", "p2"}) {
        const bool initially_selected =
            std::find(initial.feature_names.begin(), initial.feature_names.end(),
                      planted) != initial.feature_names.end();
        if (!initially_selected) continue;
        ++total_planted;
        if (std::find(refined.feature_names.begin(), refined.feature_names.end(),
                      planted) != refined.feature_names.end()) {
          ++kept_planted;
        }
      }
    }
    REQUIRE(total_planted > 0);
    CHECK(static_cast<double>(kept_planted) / static_cast<double>(total_planted) >= 0.8);
  }
}

TEST_CASE("selected set JSON round-trip") {
  SelectedFeatureSet set;
  set.trait = "energy";
  set.scheme = Scheme::kTwo;
  set.target_class = LabelValue::kHigh;
  set.params = {0.01, 0.05};
  set.feature_names = {"a", "b"};
  set.feature_r = {0.5, 0.25};
  set.notes = {"c: constant, skipped"};
  const auto back = selected_set_from_json(selected_set_to_json(set));
  CHECK(back.trait == set.trait);
  CHECK(back.feature_names == set.feature_names);
  CHECK(back.feature_r == set.feature_r);
  CHECK(back.params.p_max == set.params.p_max);
  CHECK(back.notes == set.notes);
}
