#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sclab/errors.hpp"
#include "sclab/rng.hpp"
#include "sclab/scoring.hpp"

using namespace sclab;

namespace {

// Spearman-style correlation between two orders (by rank position).
double rank_correlation(const std::vector<std::size_t>& a,
                        const std::vector<std::size_t>& b) {
  const std::size_t n = a.size();
  std::vector<double> ra(n), rb(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    ra[a[pos]] = static_cast<double>(pos);
    rb[b[pos]] = static_cast<double>(pos);
  }
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

TeacherEmbedding two_cluster_embedding(std::size_t per_class, double gap,
                                       std::uint64_t seed) {
  TeacherEmbedding e;
  e.num_classes = 2;
  CounterRng rng(seed, 0);
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    int label = static_cast<int>(i % 2);
    double center = label == 0 ? -gap : gap;
    e.activations.push_back({center + rng.gaussian(), rng.gaussian()});
    e.labels.push_back(label);
  }
  return e;
}

}  // namespace

TEST_CASE("ranking from scores: permutation and tie-break") {
  DifficultyRanking r =
      DifficultyRanking::from_scores({0.0, -4.0, -1.0}, Provenance::Ideal);
  CHECK(r.order == std::vector<std::size_t>{0, 2, 1});

  DifficultyRanking ties =
      DifficultyRanking::from_scores({1.0, 1.0, 1.0}, Provenance::Ideal);
  CHECK(ties.order == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("ideal_ranking orders by loss under the optimum") {
  Hypothesis optimum({1.0, 0.0});
  std::vector<RegressionPoint> points = {
      RegressionPoint({1.0, 1.0}, 1.0),    // loss 0
      RegressionPoint({1.0, 1.0}, -1.0),   // loss 4
      RegressionPoint({1.0, 1.0}, 2.0),    // loss 1
  };
  DifficultyRanking r = ideal_ranking(points, optimum);
  CHECK(r.order == std::vector<std::size_t>{0, 2, 1});
  CHECK(r.provenance == Provenance::Ideal);

  // all points on the optimum: identity order by tie-break
  std::vector<RegressionPoint> exact = {RegressionPoint({1.0, 0.0}, 1.0),
                                        RegressionPoint({2.0, 0.0}, 2.0),
                                        RegressionPoint({0.5, 0.0}, 0.5)};
  DifficultyRanking e = ideal_ranking(exact, optimum);
  CHECK(e.order == std::vector<std::size_t>{0, 1, 2});

  // smaller label noise ranks easier
  CounterRng rng(31, 0);
  std::vector<RegressionPoint> noisy;
  std::vector<double> noise;
  for (int i = 0; i < 100; ++i) {
    Vec x{rng.gaussian(), 1.0};
    double eps = rng.gaussian();
    noise.push_back(std::abs(eps));
    noisy.push_back(RegressionPoint(x, dot(x, optimum.weights) + eps));
  }
  DifficultyRanking nr = ideal_ranking(noisy, optimum);
  // first quartile of the order should have below-median noise on average
  double med;
  {
    std::vector<double> s = noise;
    std::sort(s.begin(), s.end());
    med = s[s.size() / 2];
  }
  int easy_below = 0;
  for (std::size_t pos = 0; pos < 25; ++pos)
    if (noise[nr.order[pos]] <= med) ++easy_below;
  CHECK(easy_below >= 20);
}

TEST_CASE("margin classifier trains to separate separable clusters") {
  TeacherEmbedding e = two_cluster_embedding(60, 4.0, 11);
  MarginTrainReport rep = train_margin_classifier(e, 1e-3, 50, 3);
  CHECK_FALSE(rep.degenerate_embedding);
  CHECK(rep.train_accuracy == doctest::Approx(1.0));

  // determinism
  MarginTrainReport rep2 = train_margin_classifier(e, 1e-3, 50, 3);
  CHECK(rep.classifier.class_weights == rep2.classifier.class_weights);

  // extreme l2 drives the weights toward zero
  MarginTrainReport shrunk = train_margin_classifier(e, 1e6, 5, 3);
  for (const auto& w : shrunk.classifier.class_weights)
    for (std::size_t j = 0; j + 1 < w.size(); ++j)
      CHECK(std::abs(w[j]) <= 0.2);

  // degenerate embedding is flagged but still trains
  TeacherEmbedding flat;
  flat.num_classes = 2;
  for (int i = 0; i < 8; ++i) {
    flat.activations.push_back({1.0, 1.0});
    flat.labels.push_back(i % 2);
  }
  CHECK(train_margin_classifier(flat, 0.0, 2, 1).degenerate_embedding);

  CHECK_THROWS_AS(train_margin_classifier(e, -1.0, 1, 0), contract_error);
  CHECK_THROWS_AS(train_margin_classifier(e, 0.0, 0, 0), contract_error);
}

TEST_CASE("margin_confidence: symmetry, depth ordering, label range") {
  MarginClassifier c;
  c.class_weights = {{1.0, 0.0, 0.0}, {-1.0, 0.0, 0.0}};   // scorers +/- x0
  CHECK(margin_confidence(c, {0.0, 5.0}, 0) == doctest::Approx(0.0));
  double deep = margin_confidence(c, {3.0, 0.0}, 0);
  double boundary = margin_confidence(c, {0.1, 0.0}, 0);
  CHECK(deep > boundary);
  CHECK_THROWS_AS(margin_confidence(c, {0.0, 0.0}, 2), contract_error);
}

TEST_CASE("margin ordering correlates with the ideal ordering") {
  int positive = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TeacherEmbedding e = two_cluster_embedding(50, 2.5, 100 + seed);
    DifficultyRanking transfer = transfer_ranking(e, 1e-3, 50, seed);

    // ideal stand-in: signed distance to the true class center
    std::vector<double> ideal_scores(e.activations.size());
    for (std::size_t i = 0; i < e.activations.size(); ++i) {
      double center = e.labels[i] == 0 ? -2.5 : 2.5;
      double toward = e.labels[i] == 0 ? -(e.activations[i][0] - center)
                                       : (e.activations[i][0] - center);
      ideal_scores[i] = toward;
    }
    DifficultyRanking ideal =
        DifficultyRanking::from_scores(ideal_scores, Provenance::Ideal);
    if (rank_correlation(transfer.order, ideal.order) > 0.0) ++positive;
  }
  CHECK(positive == 20);
}

TEST_CASE("transfer_ranking: ties, mislabeled twin, reproducibility") {
  // perfect one-hot embedding: within-class ties keep index order
  TeacherEmbedding onehot;
  onehot.num_classes = 2;
  for (int i = 0; i < 6; ++i) {
    onehot.activations.push_back(i % 2 == 0 ? Vec{1.0, 0.0} : Vec{0.0, 1.0});
    onehot.labels.push_back(i % 2);
  }
  DifficultyRanking r = transfer_ranking(onehot, 1e-3, 30, 1);
  std::vector<std::size_t> sorted = r.order;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  for (std::size_t pos = 1; pos < r.order.size(); ++pos)
    if (r.scores[r.order[pos - 1]] == r.scores[r.order[pos]])
      CHECK(r.order[pos - 1] < r.order[pos]);

  // a mislabeled twin scores strictly harder than its correct copy
  TeacherEmbedding e = two_cluster_embedding(40, 4.0, 7);
  e.activations.push_back({-4.0, 0.0});
  e.labels.push_back(0);                       // correct
  e.activations.push_back({-4.0, 0.0});
  e.labels.push_back(1);                       // mislabeled twin
  DifficultyRanking tr = transfer_ranking(e, 1e-3, 50, 7);
  CHECK(tr.scores[e.activations.size() - 2] > tr.scores[e.activations.size() - 1]);
  CHECK(tr.provenance == Provenance::Transfer);

  DifficultyRanking tr2 = transfer_ranking(e, 1e-3, 50, 7);
  CHECK(tr.order == tr2.order);
  CHECK(tr.scores == tr2.scores);

  // positive rescaling of all classifier weights preserves the order
  MarginTrainReport rep = train_margin_classifier(e, 1e-3, 50, 7);
  MarginClassifier scaled = rep.classifier;
  for (auto& w : scaled.class_weights)
    for (double& v : w) v *= 3.5;
  std::vector<double> s1(e.activations.size()), s2(e.activations.size());
  for (std::size_t i = 0; i < e.activations.size(); ++i) {
    s1[i] = margin_confidence(rep.classifier, e.activations[i], e.labels[i]);
    s2[i] = margin_confidence(scaled, e.activations[i], e.labels[i]);
  }
  CHECK(DifficultyRanking::from_scores(s1, Provenance::Transfer).order ==
        DifficultyRanking::from_scores(s2, Provenance::Transfer).order);
}

TEST_CASE("control transforms") {
  DifficultyRanking base =
      DifficultyRanking::from_scores({5.0, 1.0, 3.0, 4.0, 2.0}, Provenance::Ideal);

  DifficultyRanking rev = control_transform(base, ControlMode::Reversed);
  CHECK(rev.provenance == Provenance::Reversed);
  std::vector<std::size_t> expect(base.order.rbegin(), base.order.rend());
  CHECK(rev.order == expect);
  CHECK(control_transform(rev, ControlMode::Reversed).order == base.order);

  DifficultyRanking rnd = control_transform(base, ControlMode::Random, 42);
  std::vector<std::size_t> sorted = rnd.order;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(rnd.provenance == Provenance::Random);
  CHECK(control_transform(base, ControlMode::Random, 42).order == rnd.order);

  // near-zero mean rank correlation across seeds
  std::vector<double> big(101);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = static_cast<double>(i);
  DifficultyRanking wide = DifficultyRanking::from_scores(big, Provenance::Ideal);
  double mean = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s)
    mean += rank_correlation(wide.order,
                             control_transform(wide, ControlMode::Random, s).order);
  mean /= 100.0;
  CHECK(std::abs(mean) < 0.1);
}

TEST_CASE("ranking CSV round trip") {
  DifficultyRanking base =
      DifficultyRanking::from_scores({0.5, -1.25, 3.0}, Provenance::Transfer);
  std::string csv = ranking_to_csv(base);
  CHECK(csv.rfind("index,score,rank,provenance\n", 0) == 0);
  DifficultyRanking back = ranking_from_csv(csv);
  CHECK(back.scores == base.scores);
  CHECK(back.order == base.order);
  CHECK(back.provenance == base.provenance);

  CHECK_THROWS_AS(ranking_from_csv("nope\n1,2,3,ideal\n"), contract_error);
  CHECK_THROWS_AS(ranking_from_csv("index,score,rank,provenance\nbad row\n"),
                  contract_error);
}

TEST_CASE("provenance names round trip") {
  for (auto p : {Provenance::Ideal, Provenance::Transfer, Provenance::Random,
                 Provenance::Reversed})
    CHECK(provenance_from_name(provenance_name(p)) == p);
  CHECK_THROWS_AS(provenance_from_name("bogus"), contract_error);
}
