#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "sclab/errors.hpp"
#include "sclab/nnet.hpp"
#include "sclab/rng.hpp"

using namespace sclab;

namespace {

DenseNetwork small_net(Activation act, std::uint64_t seed) {
  return DenseNetwork::create({2, 8, 3}, act, seed);
}

Dataset tiny_two_class(std::uint64_t seed, double gap = 6.0, std::size_t n = 80) {
  return generate_synthetic(2, 3, gap, n, seed, 40);
}

DifficultyRanking trivial_ranking(std::size_t n) {
  return DifficultyRanking::from_scores(std::vector<double>(n, 0.0),
                                        Provenance::Ideal);
}

}  // namespace

TEST_CASE("parameter_count and creation") {
  DenseNetwork net = DenseNetwork::create({4, 5, 3}, Activation::Relu, 1);
  CHECK(net.parameter_count() == (4 * 5 + 5) + (5 * 3 + 3));
  CHECK(net.input_width() == 4);
  CHECK(net.num_classes() == 3);
  CHECK(net.parameters_finite());
  for (const Vec& b : net.biases)
    for (double v : b) CHECK(v == 0.0);

  DenseNetwork again = DenseNetwork::create({4, 5, 3}, Activation::Relu, 1);
  CHECK(net.weights == again.weights);
  DenseNetwork other = DenseNetwork::create({4, 5, 3}, Activation::Relu, 2);
  CHECK(net.weights != other.weights);

  CHECK_THROWS_AS(DenseNetwork::create({4}, Activation::Elu, 1), contract_error);
  CHECK_THROWS_AS(DenseNetwork::create({4, 0, 3}, Activation::Elu, 1),
                  contract_error);
}

TEST_CASE("forward: probabilities, uniformity, shift invariance") {
  DenseNetwork net = small_net(Activation::Elu, 3);
  Vec p = forward(net, {0.5, -1.0});
  CHECK(p.size() == 3);
  double sum = 0.0;
  for (double v : p) {
    CHECK(v > 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  // zero output layer: exactly uniform
  DenseNetwork zero = small_net(Activation::Elu, 3);
  std::fill(zero.weights.back().begin(), zero.weights.back().end(), 0.0);
  Vec u = forward(zero, {1.0, 2.0});
  for (double v : u) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // adding a constant to every output bias leaves the softmax unchanged
  DenseNetwork shifted = net;
  for (double& b : shifted.biases.back()) b += 37.5;
  Vec q = forward(shifted, {0.5, -1.0});
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(q[i] == doctest::Approx(p[i]).epsilon(1e-9));

  CHECK_THROWS_AS(forward(net, Vec{1.0}), contract_error);
}

TEST_CASE("loss_and_gradient: uniform baseline and finite differences") {
  DenseNetwork zero = small_net(Activation::Elu, 5);
  std::fill(zero.weights.back().begin(), zero.weights.back().end(), 0.0);
  std::vector<Vec> xs = {{0.3, 1.0}, {-2.0, 0.5}};
  std::vector<int> ys = {0, 2};
  double loss = loss_and_gradient(zero, xs, ys, 0.0, nullptr);
  CHECK(loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  for (Activation act : {Activation::Elu, Activation::Relu}) {
    DenseNetwork net = DenseNetwork::create({2, 8, 3}, act, 7);
    CounterRng rng(19, 0);
    std::vector<Vec> bx;
    std::vector<int> by;
    for (int i = 0; i < 6; ++i) {
      bx.push_back({rng.gaussian(), rng.gaussian()});
      by.push_back(static_cast<int>(rng.below(3)));
    }
    const double l2 = 1e-3;
    ParamBlock g = ParamBlock::zeros_like(net);
    loss_and_gradient(net, bx, by, l2, &g);

    const double h = 1e-5;
    auto fd_check = [&](double& param, double analytic) {
      double saved = param;
      param = saved + h;
      double up = loss_and_gradient(net, bx, by, l2, nullptr);
      param = saved - h;
      double dn = loss_and_gradient(net, bx, by, l2, nullptr);
      param = saved;
      double fd = (up - dn) / (2.0 * h);
      double scale = std::max({std::abs(fd), std::abs(analytic), 1e-6});
      CHECK(std::abs(fd - analytic) / scale < 1e-4);
    };
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      for (std::size_t j = 0; j < net.weights[l].size(); j += 7)
        fd_check(net.weights[l][j], g.weights[l][j]);
      for (std::size_t j = 0; j < net.biases[l].size(); ++j)
        fd_check(net.biases[l][j], g.biases[l][j]);
    }
  }

  CHECK_THROWS_AS(loss_and_gradient(zero, xs, {0}, 0.0, nullptr), contract_error);
  CHECK_THROWS_AS(loss_and_gradient(zero, std::vector<Vec>{}, std::vector<int>{},
                                    0.0, nullptr),
                  contract_error);
}

TEST_CASE("optimizer_step variants") {
  DenseNetwork net = small_net(Activation::Elu, 5);
  DenseNetwork before = net;

  // zero gradient: sgd leaves parameters unchanged
  OptimizerState sgd = OptimizerState::sgd(0.1);
  optimizer_step(sgd, net, ParamBlock::zeros_like(net));
  CHECK(net.weights == before.weights);
  CHECK(net.biases == before.biases);

  // repeated steps on a fixed batch reduce the loss
  std::vector<Vec> xs = {{1.0, 0.0}, {-1.0, 0.0}};
  std::vector<int> ys = {0, 1};
  for (auto opt : {OptimizerState::sgd(0.05),
                   OptimizerState::sgd_momentum(0.05, 0.9),
                   OptimizerState::adam(0.01)}) {
    DenseNetwork n = small_net(Activation::Elu, 6);
    double first = loss_and_gradient(n, xs, ys, 0.0, nullptr);
    for (int i = 0; i < 40; ++i) {
      ParamBlock g = ParamBlock::zeros_like(n);
      loss_and_gradient(n, xs, ys, 0.0, &g);
      optimizer_step(opt, n, g);
    }
    double last = loss_and_gradient(n, xs, ys, 0.0, nullptr);
    CHECK(last < first);
  }

  // adam with beta1 = beta2 = 0 reduces to eta * g / (|g| + eps)
  DenseNetwork n = small_net(Activation::Elu, 8);
  DenseNetwork copy = n;
  ParamBlock g = ParamBlock::zeros_like(n);
  loss_and_gradient(n, xs, ys, 0.0, &g);
  OptimizerState adam = OptimizerState::adam(0.01, 0.0, 0.0, 1e-8);
  optimizer_step(adam, n, g);
  for (std::size_t l = 0; l < n.weights.size(); ++l)
    for (std::size_t j = 0; j < n.weights[l].size(); ++j) {
      double expected = copy.weights[l][j] -
                        0.01 * g.weights[l][j] /
                            (std::abs(g.weights[l][j]) + 1e-8);
      CHECK(n.weights[l][j] == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("train_with_curriculum: determinism, records, all conditions learn") {
  Dataset data = tiny_two_class(21);
  DifficultyRanking base = trivial_ranking(data.train_x.size());

  auto run_once = [&](const std::string& condition) {
    DenseNetwork net = DenseNetwork::create({3, 8, 2}, Activation::Elu, 4);
    OptimizerState opt = OptimizerState::sgd_momentum(0.05, 0.9);
    TrainOptions options;
    options.steps = 400;
    options.seed = 13;
    options.eval_every = 100;
    options.batch_size = 16;
    options.condition = condition;
    PacingSchedule schedule = condition == "none"
                                  ? PacingSchedule{PacingSchedule::Mode::Fixed,
                                                   {{1.0, 0}},
                                                   {}}
                                  : PacingSchedule::default_fixed(options.steps);
    return train_with_curriculum(net, data, base, schedule, opt, options);
  };

  for (const char* condition :
       {"curriculum", "anti-curriculum", "random-curriculum", "none"}) {
    TrainResult r = run_once(condition);
    CHECK(r.run.condition == condition);
    CHECK(r.run.final_train_accuracy >= 0.9);
    CHECK(r.run.parameters_stayed_finite);
    // one record per step, evaluations at the configured cadence
    CHECK(r.run.records.size() == 400);
    std::size_t evaluated = 0;
    for (std::size_t i = 0; i < r.run.records.size(); ++i) {
      const StepRecord& rec = r.run.records[i];
      CHECK(rec.step == i);
      CHECK(rec.evaluated == ((rec.step + 1) % 100 == 0));
      if (rec.evaluated) ++evaluated;
      CHECK(rec.fraction > 0.0);
      CHECK(rec.fraction <= 1.0);
    }
    CHECK(evaluated == 4);
  }

  // bit-identical reruns
  TrainResult a = run_once("curriculum");
  TrainResult b = run_once("curriculum");
  CHECK(a.run.final_test_accuracy == b.run.final_test_accuracy);
  for (std::size_t i = 0; i < a.run.records.size(); ++i)
    CHECK(a.run.records[i].batch_loss == b.run.records[i].batch_loss);

  // snapshots come back at the requested steps
  DenseNetwork net = DenseNetwork::create({3, 8, 2}, Activation::Elu, 4);
  OptimizerState opt = OptimizerState::sgd(0.05);
  TrainOptions options;
  options.steps = 100;
  options.seed = 1;
  options.eval_every = 50;
  options.batch_size = 8;
  options.snapshot_steps = {0, 50, 100};
  TrainResult snap = train_with_curriculum(
      net, data, base, PacingSchedule::default_fixed(100), opt, options);
  CHECK(snap.snapshots.size() == 3);
  CHECK(snap.snapshots[0].weights != snap.snapshots[2].weights);

  // ranking must cover the dataset
  DenseNetwork net2 = DenseNetwork::create({3, 8, 2}, Activation::Elu, 4);
  OptimizerState opt2 = OptimizerState::sgd(0.05);
  CHECK_THROWS_AS(train_with_curriculum(net2, data, trivial_ranking(3),
                                        PacingSchedule::default_fixed(100), opt2,
                                        options),
                  contract_error);
}

TEST_CASE("full_gradient: batch equivalence and duplication invariance") {
  DenseNetwork net = small_net(Activation::Relu, 9);
  std::vector<Vec> xs = {{1.0, 2.0}, {-0.5, 0.3}, {0.0, -1.0}};
  std::vector<int> ys = {0, 1, 2};

  ParamBlock g = full_gradient(net, xs, ys, 1e-3);
  ParamBlock direct = ParamBlock::zeros_like(net);
  loss_and_gradient(net, xs, ys, 1e-3, &direct);
  CHECK(g.flatten() == direct.flatten());

  // duplicating the whole set leaves the mean gradient unchanged
  std::vector<Vec> xs2 = xs;
  std::vector<int> ys2 = ys;
  xs2.insert(xs2.end(), xs.begin(), xs.end());
  ys2.insert(ys2.end(), ys.begin(), ys.end());
  Vec f1 = full_gradient(net, xs, ys, 0.0).flatten();
  Vec f2 = full_gradient(net, xs2, ys2, 0.0).flatten();
  for (std::size_t i = 0; i < f1.size(); ++i)
    CHECK(f2[i] == doctest::Approx(f1[i]).epsilon(1e-12));
}

TEST_CASE("gradient_angle") {
  DenseNetwork net = small_net(Activation::Elu, 2);
  ParamBlock g = ParamBlock::zeros_like(net);
  g.weights[0][0] = 1.0;
  ParamBlock g2 = ParamBlock::zeros_like(net);
  g2.weights[0][0] = 2.5;
  CHECK(gradient_angle(g, g2) == doctest::Approx(0.0));

  g2.weights[0][0] = -1.0;
  CHECK(gradient_angle(g, g2) == doctest::Approx(180.0));

  g2.weights[0][0] = 0.0;
  g2.weights[0][1] = 3.0;
  CHECK(gradient_angle(g, g2) == doctest::Approx(90.0));

  ParamBlock zero = ParamBlock::zeros_like(net);
  CHECK_THROWS_AS(gradient_angle(g, zero), undefined_statistic_error);
}

TEST_CASE("alignment_experiment") {
  Dataset data = generate_synthetic(2, 3, 3.0, 200, 31, 40);
  std::vector<DenseNetwork> snaps = {
      DenseNetwork::create({3, 8, 2}, Activation::Elu, 5),
      DenseNetwork::create({3, 8, 2}, Activation::Elu, 6)};

  CounterRng rng(77, 0);
  std::vector<double> scores(data.train_x.size());
  for (double& s : scores) s = rng.gaussian();
  DifficultyRanking ranking =
      DifficultyRanking::from_scores(scores, Provenance::Ideal);

  auto reports = alignment_experiment(snaps, data, ranking, 20, 40, 3);
  CHECK(reports.size() == 2);
  for (const auto& rep : reports) {
    CHECK(rep.easy.mean_angle > 0.0);
    CHECK(rep.hard.mean_angle > 0.0);
    CHECK(rep.easy.standard_error > 0.0);
    CHECK(rep.combined_se() ==
          doctest::Approx(std::sqrt(rep.easy.standard_error * rep.easy.standard_error +
                                    rep.hard.standard_error * rep.hard.standard_error)));
  }

  // deterministic in the seed
  auto again = alignment_experiment(snaps, data, ranking, 20, 40, 3);
  CHECK(again[0].easy.mean_angle == reports[0].easy.mean_angle);
  CHECK(again[1].hard.mean_angle == reports[1].hard.mean_angle);

  // a dataset smaller than 4 batches is rejected
  Dataset small = generate_synthetic(2, 3, 3.0, 20, 1, 8);
  CHECK_THROWS_AS(alignment_experiment(snaps, small, trivial_ranking(20), 10, 5, 1),
                  contract_error);
}

TEST_CASE("checkpoint round trip and corruption handling") {
  DenseNetwork net = DenseNetwork::create({3, 6, 4}, Activation::Relu, 12);
  const std::string path = "ckpt_test.bin";
  save_checkpoint(net, path);
  DenseNetwork back = load_checkpoint(path);
  CHECK(back.widths == net.widths);
  CHECK(back.activation == net.activation);
  CHECK(back.weights == net.weights);
  CHECK(back.biases == net.biases);

  // corrupt the magic
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.put('\0');
  }
  CHECK_THROWS_AS(load_checkpoint(path), format_error);

  // truncate
  save_checkpoint(net, path);
  {
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
  }
  CHECK_THROWS_AS(load_checkpoint(path), format_error);

  std::remove(path.c_str());
  CHECK_THROWS_AS(load_checkpoint(path), contract_error);
}
