#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sclab/regress.hpp"
#include "sclab/vec.hpp"

namespace sclab {

enum class Provenance { Ideal, Transfer, Random, Reversed };

const char* provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);

// Per-example difficulty scores (higher = easier) and the easiest-first
// order. Ties break by ascending index.
struct DifficultyRanking {
  std::vector<double> scores;
  std::vector<std::size_t> order;
  Provenance provenance = Provenance::Ideal;

  static DifficultyRanking from_scores(std::vector<double> scores,
                                       Provenance provenance);
};

// Penultimate-layer activations of the teacher, one row per training example.
struct TeacherEmbedding {
  std::vector<Vec> activations;
  std::vector<int> labels;
  int num_classes = 0;
};

// One affine scorer per class, trained one-vs-rest on hinge loss.
struct MarginClassifier {
  std::vector<Vec> class_weights;   // k rows of m+1 (bias last)

  double score(const Vec& example, int cls) const;
};

struct MarginTrainReport {
  MarginClassifier classifier;
  bool degenerate_embedding = false;
  double train_accuracy = 0.0;
};

DifficultyRanking ideal_ranking(const std::vector<RegressionPoint>& points,
                                const Hypothesis& optimum);

MarginTrainReport train_margin_classifier(const TeacherEmbedding& embedding,
                                          double l2, int epochs,
                                          std::uint64_t seed);

// True-class score minus the best competing score; larger = easier.
double margin_confidence(const MarginClassifier& classifier, const Vec& example,
                         int true_label);

DifficultyRanking transfer_ranking(const TeacherEmbedding& embedding, double l2,
                                   int epochs, std::uint64_t seed);

enum class ControlMode { Random, Reversed };

DifficultyRanking control_transform(const DifficultyRanking& ranking,
                                    ControlMode mode, std::uint64_t seed = 0);

// CSV import/export (columns: index,score,rank,provenance).
std::string ranking_to_csv(const DifficultyRanking& ranking);
DifficultyRanking ranking_from_csv(const std::string& csv);

}  // namespace sclab
