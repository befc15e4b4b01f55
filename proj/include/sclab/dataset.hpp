#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sclab/vec.hpp"

namespace sclab {

struct Dataset {
  int feature_dim = 0;
  int num_classes = 0;
  std::vector<Vec> train_x;
  std::vector<int> train_y;
  std::vector<Vec> test_x;
  std::vector<int> test_y;
};

// k gaussian clusters with unit within-class covariance; class means are
// random unit directions scaled by sigma_gap. Labels cycle round-robin.
Dataset generate_synthetic(int classes, int dimension, double sigma_gap,
                           std::size_t n, std::uint64_t seed,
                           std::size_t test_n = 0);

// Record layout: 1 coarse byte, 1 fine byte, 3072 pixels (row-major R,G,B
// planes of a 32x32 image).
constexpr std::size_t kCifarRecordBytes = 3074;

struct CifarSelector {
  int coarse_label = -1;           // -1: unused
  std::vector<int> fine_labels;    // empty: unused
};

struct CifarSubset {
  std::vector<Vec> x;              // pooled, contrast-normalized pixels
  std::vector<int> y;              // remapped to 0..k-1 (sorted fine labels)
  std::vector<int> label_map;      // remapped index -> original fine label
  int feature_dim = 0;
  bool empty_result = false;
};

CifarSubset load_cifar_subset(const std::vector<std::string>& paths,
                              const CifarSelector& selector, int downsample);

// Same decoding applied to an in-memory byte buffer (used by tests and by
// the file loader).
CifarSubset decode_cifar_records(const std::vector<unsigned char>& bytes,
                                 const CifarSelector& selector, int downsample);

}  // namespace sclab
