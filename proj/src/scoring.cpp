#include "sclab/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "sclab/errors.hpp"
#include "sclab/rng.hpp"

namespace sclab {

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Ideal: return "ideal";
    case Provenance::Transfer: return "transfer";
    case Provenance::Random: return "random";
    case Provenance::Reversed: return "reversed";
  }
  return "?";
}

Provenance provenance_from_name(const std::string& name) {
  if (name == "ideal") return Provenance::Ideal;
  if (name == "transfer") return Provenance::Transfer;
  if (name == "random") return Provenance::Random;
  if (name == "reversed") return Provenance::Reversed;
  throw contract_error("unknown provenance: " + name);
}

DifficultyRanking DifficultyRanking::from_scores(std::vector<double> scores,
                                                 Provenance provenance) {
  DifficultyRanking r;
  r.order.resize(scores.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  // Stable sort keeps ties in ascending-index order.
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  r.scores = std::move(scores);
  r.provenance = provenance;
  return r;
}

DifficultyRanking ideal_ranking(const std::vector<RegressionPoint>& points,
                                const Hypothesis& optimum) {
  std::vector<double> scores(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    scores[i] = -difficulty_score(points[i], optimum);
  return DifficultyRanking::from_scores(std::move(scores), Provenance::Ideal);
}

double MarginClassifier::score(const Vec& example, int cls) const {
  const Vec& w = class_weights.at(static_cast<std::size_t>(cls));
  if (w.size() != example.size() + 1)
    throw contract_error("MarginClassifier: embedding width mismatch");
  double s = w.back();
  for (std::size_t i = 0; i < example.size(); ++i) s += w[i] * example[i];
  return s;
}

MarginTrainReport train_margin_classifier(const TeacherEmbedding& embedding,
                                          double l2, int epochs,
                                          std::uint64_t seed) {
  const std::size_t n = embedding.activations.size();
  if (n == 0) throw contract_error("train_margin_classifier: empty embedding");
  if (epochs < 1) throw contract_error("train_margin_classifier: epochs must be >= 1");
  if (l2 < 0.0) throw contract_error("train_margin_classifier: l2 must be nonnegative");
  int k = embedding.num_classes;
  if (k <= 0)
    k = *std::max_element(embedding.labels.begin(), embedding.labels.end()) + 1;
  if (n < static_cast<std::size_t>(k))
    throw contract_error("train_margin_classifier: fewer examples than classes");
  const std::size_t m = embedding.activations[0].size();

  MarginTrainReport rep;
  rep.classifier.class_weights.assign(k, Vec(m + 1, 0.0));

  // Zero-variance embeddings still train (to the biases), but get flagged.
  bool any_varies = false;
  for (std::size_t j = 0; j < m && !any_varies; ++j)
    for (std::size_t i = 1; i < n; ++i)
      if (embedding.activations[i][j] != embedding.activations[0][j]) {
        any_varies = true;
        break;
      }
  rep.degenerate_embedding = !any_varies;

  CounterRng rng(seed, 0x5C0);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i)
      std::swap(idx[i - 1], idx[rng.below(i)]);
    for (std::size_t i : idx) {
      ++t;
      double eta = 0.1 / std::sqrt(static_cast<double>(t));
      const Vec& x = embedding.activations[i];
      for (int c = 0; c < k; ++c) {
        Vec& w = rep.classifier.class_weights[static_cast<std::size_t>(c)];
        double target = embedding.labels[i] == c ? 1.0 : -1.0;
        double s = w.back();
        for (std::size_t j = 0; j < m; ++j) s += w[j] * x[j];
        double shrink = 1.0 - 2.0 * eta * l2;
        if (shrink < 0.0) shrink = 0.0;
        for (double& wj : w) wj *= shrink;
        if (target * s < 1.0) {
          for (std::size_t j = 0; j < m; ++j) w[j] += eta * target * x[j];
          w.back() += eta * target;
        }
      }
    }
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    double best_s = rep.classifier.score(embedding.activations[i], 0);
    for (int c = 1; c < k; ++c) {
      double s = rep.classifier.score(embedding.activations[i], c);
      if (s > best_s) {
        best_s = s;
        best = c;
      }
    }
    if (best == embedding.labels[i]) ++correct;
  }
  rep.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return rep;
}

double margin_confidence(const MarginClassifier& classifier, const Vec& example,
                         int true_label) {
  int k = static_cast<int>(classifier.class_weights.size());
  if (true_label < 0 || true_label >= k)
    throw contract_error("margin_confidence: label out of range");
  double own = classifier.score(example, true_label);
  double best_other = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < k; ++c) {
    if (c == true_label) continue;
    best_other = std::max(best_other, classifier.score(example, c));
  }
  return own - best_other;
}

DifficultyRanking transfer_ranking(const TeacherEmbedding& embedding, double l2,
                                   int epochs, std::uint64_t seed) {
  MarginTrainReport rep = train_margin_classifier(embedding, l2, epochs, seed);
  std::vector<double> scores(embedding.activations.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    scores[i] = margin_confidence(rep.classifier, embedding.activations[i],
                                  embedding.labels[i]);
  return DifficultyRanking::from_scores(std::move(scores), Provenance::Transfer);
}

DifficultyRanking control_transform(const DifficultyRanking& ranking,
                                    ControlMode mode, std::uint64_t seed) {
  DifficultyRanking out;
  out.order = ranking.order;
  if (mode == ControlMode::Reversed) {
    std::reverse(out.order.begin(), out.order.end());
    out.provenance = Provenance::Reversed;
  } else {
    CounterRng rng(seed, 0xC731);
    for (std::size_t i = out.order.size(); i > 1; --i)
      std::swap(out.order[i - 1], out.order[rng.below(i)]);
    out.provenance = Provenance::Random;
  }
  // Synthetic rank-position scores keep order/scores consistent.
  out.scores.assign(out.order.size(), 0.0);
  for (std::size_t pos = 0; pos < out.order.size(); ++pos)
    out.scores[out.order[pos]] = static_cast<double>(out.order.size() - pos);
  return out;
}

std::string ranking_to_csv(const DifficultyRanking& ranking) {
  std::vector<std::size_t> rank_of(ranking.order.size());
  for (std::size_t pos = 0; pos < ranking.order.size(); ++pos)
    rank_of[ranking.order[pos]] = pos;
  std::string out = "index,score,rank,provenance\n";
  char buf[160];
  for (std::size_t i = 0; i < ranking.scores.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%zu,%s\n", i, ranking.scores[i],
                  rank_of[i], provenance_name(ranking.provenance));
    out += buf;
  }
  return out;
}

DifficultyRanking ranking_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line.rfind("index,score,rank,provenance", 0) != 0)
    throw contract_error("ranking_from_csv: bad header");
  DifficultyRanking r;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t index, rank;
    double score;
    char prov[32] = {0};
    if (std::sscanf(line.c_str(), "%zu,%lg,%zu,%31s", &index, &score, &rank, prov) != 4)
      throw contract_error("ranking_from_csv: bad row: " + line);
    std::size_t needed = std::max(index, rank) + 1;
    if (needed > r.scores.size()) {
      r.scores.resize(needed, 0.0);
      r.order.resize(needed, 0);
    }
    r.scores[index] = score;
    r.order[rank] = index;
    r.provenance = provenance_from_name(prov);
  }
  return r;
}

}  // namespace sclab
