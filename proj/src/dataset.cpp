#include "sclab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sclab/errors.hpp"
#include "sclab/rng.hpp"

namespace sclab {

Dataset generate_synthetic(int classes, int dimension, double sigma_gap,
                           std::size_t n, std::uint64_t seed,
                           std::size_t test_n) {
  if (classes < 2) throw contract_error("generate_synthetic: need k >= 2");
  if (n < 10 * static_cast<std::size_t>(classes))
    throw contract_error("generate_synthetic: need n >= 10k");
  if (sigma_gap < 0.0) throw contract_error("generate_synthetic: sigma_gap >= 0");
  if (test_n == 0) test_n = n / 4;

  CounterRng mean_rng(seed, 0x37A);
  std::vector<Vec> means(classes, Vec(dimension, 0.0));
  for (int c = 0; c < classes; ++c) {
    double len = 0.0;
    while (len <= 1e-12) {
      for (auto& v : means[c]) v = mean_rng.gaussian();
      len = norm(means[c]);
    }
    for (auto& v : means[c]) v *= sigma_gap / len;
  }

  Dataset d;
  d.feature_dim = dimension;
  d.num_classes = classes;
  CounterRng rng(seed, 0x37B);
  auto emit = [&](std::vector<Vec>& xs, std::vector<int>& ys, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      int y = static_cast<int>(i % classes);
      Vec x = means[y];
      for (auto& v : x) v += rng.gaussian();
      xs.push_back(std::move(x));
      ys.push_back(y);
    }
  };
  emit(d.train_x, d.train_y, n);
  emit(d.test_x, d.test_y, test_n);
  return d;
}

namespace {

// Average-pools one 32x32 channel by `factor` and appends to `out`.
void pool_channel(const unsigned char* plane, int factor, Vec& out) {
  int side = 32 / factor;
  for (int by = 0; by < side; ++by)
    for (int bx = 0; bx < side; ++bx) {
      double sum = 0.0;
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx)
          sum += plane[(by * factor + dy) * 32 + bx * factor + dx];
      out.push_back(sum / (factor * factor));
    }
}

void contrast_normalize(Vec& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  double sd = std::sqrt(var / static_cast<double>(x.size()));
  double denom = std::max(sd, 1e-8);
  for (double& v : x) v = (v - mean) / denom;
}

}  // namespace

CifarSubset decode_cifar_records(const std::vector<unsigned char>& bytes,
                                 const CifarSelector& selector, int downsample) {
  if (downsample < 1 || 32 % downsample != 0)
    throw contract_error("decode_cifar_records: downsample must divide 32");
  if (bytes.size() % kCifarRecordBytes != 0)
    throw format_error("truncated CIFAR record",
                       bytes.size() - bytes.size() % kCifarRecordBytes);
  if (selector.coarse_label > 19)
    throw contract_error("decode_cifar_records: coarse label out of range");
  for (int f : selector.fine_labels)
    if (f < 0 || f > 99)
      throw contract_error("decode_cifar_records: fine label out of range");

  CifarSubset out;
  int side = 32 / downsample;
  out.feature_dim = 3 * side * side;

  std::vector<int> selected_fine;
  std::size_t records = bytes.size() / kCifarRecordBytes;
  std::vector<std::size_t> keep;
  for (std::size_t rec = 0; rec < records; ++rec) {
    const unsigned char* p = bytes.data() + rec * kCifarRecordBytes;
    int coarse = p[0], fine = p[1];
    if (coarse > 19) throw format_error("coarse label out of range", rec * kCifarRecordBytes);
    bool match = false;
    if (selector.coarse_label >= 0 && coarse == selector.coarse_label) match = true;
    if (!selector.fine_labels.empty() &&
        std::find(selector.fine_labels.begin(), selector.fine_labels.end(), fine) !=
            selector.fine_labels.end())
      match = true;
    if (selector.coarse_label < 0 && selector.fine_labels.empty()) match = true;
    if (!match) continue;
    keep.push_back(rec);
    selected_fine.push_back(fine);
  }

  std::vector<int> labels = selected_fine;
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  out.label_map = labels;

  for (std::size_t i = 0; i < keep.size(); ++i) {
    const unsigned char* p = bytes.data() + keep[i] * kCifarRecordBytes;
    Vec x;
    x.reserve(out.feature_dim);
    for (int ch = 0; ch < 3; ++ch) pool_channel(p + 2 + ch * 1024, downsample, x);
    contrast_normalize(x);
    out.x.push_back(std::move(x));
    int fine = selected_fine[i];
    out.y.push_back(static_cast<int>(
        std::lower_bound(labels.begin(), labels.end(), fine) - labels.begin()));
  }
  out.empty_result = out.x.empty();
  return out;
}

CifarSubset load_cifar_subset(const std::vector<std::string>& paths,
                              const CifarSelector& selector, int downsample) {
  std::vector<unsigned char> all;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw contract_error("load_cifar_subset: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() % kCifarRecordBytes != 0)
      throw format_error("truncated CIFAR record in " + path,
                         bytes.size() - bytes.size() % kCifarRecordBytes);
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  return decode_cifar_records(all, selector, downsample);
}

}  // namespace sclab
