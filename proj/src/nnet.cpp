#include "sclab/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "sclab/errors.hpp"
#include "sclab/rng.hpp"

namespace sclab {

const char* activation_name(Activation a) {
  return a == Activation::Elu ? "elu" : "relu";
}

Activation activation_from_name(const std::string& name) {
  if (name == "elu") return Activation::Elu;
  if (name == "relu") return Activation::Relu;
  throw contract_error("unknown activation: " + name);
}

DenseNetwork DenseNetwork::create(std::vector<int> widths, Activation activation,
                                  std::uint64_t seed) {
  if (widths.size() < 2) throw contract_error("DenseNetwork: need >= 2 layers");
  for (int w : widths)
    if (w < 1) throw contract_error("DenseNetwork: widths must be positive");
  DenseNetwork net;
  net.widths = std::move(widths);
  net.activation = activation;
  for (std::size_t l = 0; l + 1 < net.widths.size(); ++l) {
    int fan_in = net.widths[l], fan_out = net.widths[l + 1];
    CounterRng rng(seed, l + 1);
    double scale = std::sqrt(2.0 / fan_in);
    std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
    for (auto& v : w) v = scale * rng.gaussian();
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
  }
  return net;
}

std::size_t DenseNetwork::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += weights[l].size() + biases[l].size();
  return n;
}

bool DenseNetwork::parameters_finite() const {
  for (const auto& w : weights)
    for (double v : w)
      if (!std::isfinite(v)) return false;
  for (const auto& b : biases)
    if (!all_finite(b)) return false;
  return true;
}

ParamBlock ParamBlock::zeros_like(const DenseNetwork& net) {
  ParamBlock g;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights.emplace_back(net.weights[l].size(), 0.0);
    g.biases.emplace_back(net.biases[l].size(), 0.0);
  }
  return g;
}

Vec ParamBlock::flatten() const {
  Vec out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.insert(out.end(), weights[l].begin(), weights[l].end());
    out.insert(out.end(), biases[l].begin(), biases[l].end());
  }
  return out;
}

namespace {

double act(Activation a, double z) {
  if (a == Activation::Relu) return z > 0.0 ? z : 0.0;
  return z > 0.0 ? z : std::expm1(z);
}

double act_derivative(Activation a, double z) {
  if (a == Activation::Relu) return z > 0.0 ? 1.0 : 0.0;
  return z > 0.0 ? 1.0 : std::exp(z);
}

// Affine layer: out = W in + b.
void affine(const std::vector<double>& w, const Vec& b, const Vec& in, Vec& out) {
  int rows = static_cast<int>(b.size());
  int cols = static_cast<int>(in.size());
  out.resize(rows);
  for (int i = 0; i < rows; ++i) {
    double s = b[i];
    const double* row = w.data() + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) s += row[j] * in[j];
    out[i] = s;
  }
}

void softmax_in_place(Vec& logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : logits) v /= sum;
}

struct Trace {
  std::vector<Vec> pre;    // pre-activations per layer
  std::vector<Vec> post;   // post-activations; post.back() = probabilities
};

void forward_trace(const DenseNetwork& net, const Vec& input, Trace& t) {
  if (static_cast<int>(input.size()) != net.input_width())
    throw contract_error("forward: input width mismatch");
  if (!all_finite(input)) throw contract_error("forward: non-finite input");
  std::size_t layers = net.weights.size();
  t.pre.resize(layers);
  t.post.resize(layers);
  const Vec* cur = &input;
  for (std::size_t l = 0; l < layers; ++l) {
    affine(net.weights[l], net.biases[l], *cur, t.pre[l]);
    t.post[l] = t.pre[l];
    if (l + 1 < layers) {
      for (double& v : t.post[l]) v = act(net.activation, v);
    } else {
      softmax_in_place(t.post[l]);
    }
    cur = &t.post[l];
  }
}

}  // namespace

Vec forward(const DenseNetwork& net, const Vec& input) {
  Trace t;
  forward_trace(net, input, t);
  return t.post.back();
}

Vec penultimate_activation(const DenseNetwork& net, const Vec& input) {
  Trace t;
  forward_trace(net, input, t);
  if (t.post.size() < 2) return input;
  return t.post[t.post.size() - 2];
}

double loss_and_gradient(const DenseNetwork& net,
                         const std::vector<const Vec*>& inputs,
                         const std::vector<int>& labels, double l2,
                         ParamBlock* gradient) {
  if (inputs.empty() || inputs.size() != labels.size())
    throw contract_error("loss_and_gradient: bad batch");
  const int k = net.num_classes();
  const std::size_t layers = net.weights.size();
  if (gradient) *gradient = ParamBlock::zeros_like(net);

  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(inputs.size());
  Trace t;
  std::vector<Vec> delta(layers);
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    int label = labels[b];
    if (label < 0 || label >= k) throw contract_error("loss_and_gradient: bad label");
    forward_trace(net, *inputs[b], t);
    double p = std::max(t.post.back()[label], 1e-300);
    loss -= std::log(p) * inv_b;
    if (!gradient) continue;

    delta[layers - 1] = t.post.back();
    delta[layers - 1][label] -= 1.0;
    for (double& v : delta[layers - 1]) v *= inv_b;
    for (std::size_t l = layers; l-- > 0;) {
      const Vec& below = l == 0 ? *inputs[b] : t.post[l - 1];
      int rows = net.widths[l + 1], cols = net.widths[l];
      auto& gw = gradient->weights[l];
      auto& gb = gradient->biases[l];
      for (int i = 0; i < rows; ++i) {
        double di = delta[l][i];
        gb[i] += di;
        double* grow = gw.data() + static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) grow[j] += di * below[j];
      }
      if (l == 0) break;
      delta[l - 1].assign(cols, 0.0);
      const auto& w = net.weights[l];
      for (int i = 0; i < rows; ++i) {
        double di = delta[l][i];
        const double* row = w.data() + static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) delta[l - 1][j] += di * row[j];
      }
      for (int j = 0; j < cols; ++j)
        delta[l - 1][j] *= act_derivative(net.activation, t.pre[l - 1][j]);
    }
  }

  if (l2 != 0.0) {
    for (std::size_t l = 0; l < layers; ++l) {
      for (std::size_t i = 0; i < net.weights[l].size(); ++i) {
        double w = net.weights[l][i];
        loss += l2 * w * w;
        if (gradient) gradient->weights[l][i] += 2.0 * l2 * w;
      }
    }
  }
  return loss;
}

double loss_and_gradient(const DenseNetwork& net, const std::vector<Vec>& inputs,
                         const std::vector<int>& labels, double l2,
                         ParamBlock* gradient) {
  std::vector<const Vec*> ptrs(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) ptrs[i] = &inputs[i];
  return loss_and_gradient(net, ptrs, labels, l2, gradient);
}

OptimizerState OptimizerState::sgd(double step_size, double l2) {
  OptimizerState s;
  s.kind = Kind::Sgd;
  s.step_size = step_size;
  s.l2 = l2;
  return s;
}

OptimizerState OptimizerState::sgd_momentum(double step_size, double mu, double l2) {
  OptimizerState s;
  s.kind = Kind::Momentum;
  s.step_size = step_size;
  s.momentum = mu;
  s.l2 = l2;
  return s;
}

OptimizerState OptimizerState::adam(double step_size, double beta1, double beta2,
                                    double epsilon, double l2) {
  OptimizerState s;
  s.kind = Kind::Adam;
  s.step_size = step_size;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  s.l2 = l2;
  return s;
}

void optimizer_step(OptimizerState& state, DenseNetwork& net,
                    const ParamBlock& gradient) {
  if (gradient.weights.size() != net.weights.size())
    throw contract_error("optimizer_step: shape mismatch");
  if (state.kind != OptimizerState::Kind::Sgd && state.first_moment.weights.empty())
    state.first_moment = ParamBlock::zeros_like(net);
  if (state.kind == OptimizerState::Kind::Adam && state.second_moment.weights.empty())
    state.second_moment = ParamBlock::zeros_like(net);
  ++state.step_count;

  auto update = [&](double& w, double g, double& m, double& v) {
    switch (state.kind) {
      case OptimizerState::Kind::Sgd:
        w -= state.step_size * g;
        break;
      case OptimizerState::Kind::Momentum:
        m = state.momentum * m + g;
        w -= state.step_size * m;
        break;
      case OptimizerState::Kind::Adam: {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
        double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
        w -= state.step_size * (m / bc1) / (std::sqrt(v / bc2) + state.epsilon);
        break;
      }
    }
  };

  double dummy_m = 0.0, dummy_v = 0.0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (std::size_t i = 0; i < net.weights[l].size(); ++i) {
      double& m = state.first_moment.weights.empty() ? dummy_m
                                                     : state.first_moment.weights[l][i];
      double& v = state.second_moment.weights.empty() ? dummy_v
                                                      : state.second_moment.weights[l][i];
      update(net.weights[l][i], gradient.weights[l][i], m, v);
    }
    for (std::size_t i = 0; i < net.biases[l].size(); ++i) {
      double& m = state.first_moment.biases.empty() ? dummy_m
                                                    : state.first_moment.biases[l][i];
      double& v = state.second_moment.biases.empty() ? dummy_v
                                                     : state.second_moment.biases[l][i];
      update(net.biases[l][i], gradient.biases[l][i], m, v);
    }
  }
}

double accuracy(const DenseNetwork& net, const std::vector<Vec>& inputs,
                const std::vector<int>& labels) {
  if (inputs.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Vec p = forward(net, inputs[i]);
    std::size_t best = static_cast<std::size_t>(
        std::max_element(p.begin(), p.end()) - p.begin());
    if (static_cast<int>(best) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(inputs.size());
}

TrainResult train_with_curriculum(DenseNetwork& net, const Dataset& data,
                                  const DifficultyRanking& ranking,
                                  const PacingSchedule& schedule,
                                  OptimizerState& optimizer,
                                  const TrainOptions& options) {
  if (ranking.order.size() != data.train_x.size())
    throw contract_error("train_with_curriculum: ranking does not cover the dataset");
  schedule.validate();

  TrainResult result;
  result.run.condition = options.condition;
  result.run.seed = options.seed;

  AdaptiveController adaptive_fallback(schedule.mode == PacingSchedule::Mode::Adaptive
                                           ? schedule
                                           : PacingSchedule::default_adaptive());
  double fraction = schedule.mode == PacingSchedule::Mode::Fixed
                        ? advance_fixed(schedule, 0)
                        : adaptive_fallback.fraction();
  SamplingDistribution dist = distribution_for_phase(ranking, fraction);

  std::vector<const Vec*> batch_x;
  std::vector<int> batch_y;
  ParamBlock grad;
  auto snapshot_due = [&](std::uint64_t step) {
    return std::find(options.snapshot_steps.begin(), options.snapshot_steps.end(),
                     step) != options.snapshot_steps.end();
  };

  for (std::uint64_t step = 0; step < options.steps; ++step) {
    if (snapshot_due(step)) result.snapshots.push_back(net);
    double next_fraction = schedule.mode == PacingSchedule::Mode::Fixed
                               ? advance_fixed(schedule, step)
                               : adaptive_fallback.fraction();
    if (next_fraction != fraction) {
      fraction = next_fraction;
      dist = distribution_for_phase(ranking, fraction);
    }
    std::vector<std::size_t> idx =
        sample_batch(dist, options.batch_size, options.seed, step);
    batch_x.clear();
    batch_y.clear();
    for (std::size_t i : idx) {
      batch_x.push_back(&data.train_x[i]);
      batch_y.push_back(data.train_y[i]);
    }
    double loss = loss_and_gradient(net, batch_x, batch_y, optimizer.l2, &grad);
    optimizer_step(optimizer, net, grad);
    if (schedule.mode == PacingSchedule::Mode::Adaptive)
      adaptive_fallback.observe(loss);

    StepRecord rec;
    rec.step = step;
    rec.fraction = fraction;
    rec.batch_loss = loss;
    if ((step + 1) % options.eval_every == 0 || step + 1 == options.steps) {
      rec.evaluated = true;
      rec.train_accuracy = accuracy(net, data.train_x, data.train_y);
      rec.test_accuracy = accuracy(net, data.test_x, data.test_y);
      if (!net.parameters_finite()) result.run.parameters_stayed_finite = false;
    }
    result.run.records.push_back(rec);
  }
  if (snapshot_due(options.steps)) result.snapshots.push_back(net);

  result.run.final_train_accuracy = accuracy(net, data.train_x, data.train_y);
  result.run.final_test_accuracy = accuracy(net, data.test_x, data.test_y);
  return result;
}

ParamBlock full_gradient(const DenseNetwork& net, const std::vector<Vec>& inputs,
                         const std::vector<int>& labels, double l2) {
  ParamBlock g;
  loss_and_gradient(net, inputs, labels, l2, &g);
  return g;
}

double gradient_angle(const ParamBlock& g1, const ParamBlock& g2) {
  Vec a = g1.flatten(), b = g2.flatten();
  double na = norm(a), nb = norm(b);
  if (na <= 0.0 || nb <= 0.0)
    throw undefined_statistic_error("gradient_angle: zero gradient");
  double c = std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
  return std::acos(c) * (180.0 / 3.141592653589793);
}

double AlignmentCheckpointReport::combined_se() const {
  return std::sqrt(easy.standard_error * easy.standard_error +
                   hard.standard_error * hard.standard_error);
}

std::vector<AlignmentCheckpointReport> alignment_experiment(
    const std::vector<DenseNetwork>& snapshots, const Dataset& data,
    const DifficultyRanking& ranking, std::size_t batch_size,
    std::size_t repetitions, std::uint64_t seed) {
  const std::size_t n = data.train_x.size();
  if (n < 4 * batch_size)
    throw contract_error("alignment_experiment: dataset smaller than 4x batch");
  if (ranking.order.size() != n)
    throw contract_error("alignment_experiment: ranking does not cover the dataset");

  std::size_t quartile = n / 4;
  std::vector<std::size_t> easy(ranking.order.begin(), ranking.order.begin() + quartile);
  std::vector<std::size_t> hard(ranking.order.end() - quartile, ranking.order.end());

  std::vector<AlignmentCheckpointReport> out;
  for (std::size_t s = 0; s < snapshots.size(); ++s) {
    ParamBlock reference = full_gradient(snapshots[s], data.train_x, data.train_y, 0.0);
    auto run_group = [&](const std::vector<std::size_t>& pool,
                         std::uint64_t stream) {
      double sum = 0.0, sumsq = 0.0;
      for (std::size_t rep = 0; rep < repetitions; ++rep) {
        CounterRng rng(CounterRng::mix(seed, s * 1000 + rep), stream);
        std::vector<const Vec*> xs;
        std::vector<int> ys;
        for (std::size_t i = 0; i < batch_size; ++i) {
          std::size_t pick = pool[rng.below(pool.size())];
          xs.push_back(&data.train_x[pick]);
          ys.push_back(data.train_y[pick]);
        }
        ParamBlock g;
        loss_and_gradient(snapshots[s], xs, ys, 0.0, &g);
        double angle = gradient_angle(g, reference);
        sum += angle;
        sumsq += angle * angle;
      }
      AlignmentGroup group;
      double r = static_cast<double>(repetitions);
      group.mean_angle = sum / r;
      double var = (sumsq - r * group.mean_angle * group.mean_angle) / (r - 1.0);
      group.standard_error = std::sqrt(std::max(var, 0.0) / r);
      return group;
    };
    AlignmentCheckpointReport rep;
    rep.easy = run_group(easy, 0xEA51);
    rep.hard = run_group(hard, 0xAD);
    out.push_back(rep);
  }
  return out;
}

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x4E4C4353;  // "SCLN"
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw format_error("checkpoint truncated", pos);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

double get_f64(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw format_error("checkpoint truncated", pos);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 8;
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace

void save_checkpoint(const DenseNetwork& net, const std::string& path) {
  std::string out;
  put_u32(out, kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, net.activation == Activation::Elu ? 0 : 1);
  put_u32(out, static_cast<std::uint32_t>(net.widths.size()));
  for (int w : net.widths) put_u32(out, static_cast<std::uint32_t>(w));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (double v : net.weights[l]) put_f64(out, v);
    for (double v : net.biases[l]) put_f64(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw contract_error("save_checkpoint: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

DenseNetwork load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw contract_error("load_checkpoint: cannot open " + path);
  std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  if (get_u32(in, pos) != kCheckpointMagic) throw format_error("bad checkpoint magic", 0);
  if (get_u32(in, pos) != kCheckpointVersion)
    throw format_error("unsupported checkpoint version", 4);
  std::uint32_t act = get_u32(in, pos);
  std::uint32_t layers = get_u32(in, pos);
  if (layers < 2 || layers > 64) throw format_error("bad layer count", 12);
  std::vector<int> widths(layers);
  for (auto& w : widths) w = static_cast<int>(get_u32(in, pos));
  DenseNetwork net = DenseNetwork::create(widths, act == 0 ? Activation::Elu
                                                           : Activation::Relu, 0);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (auto& v : net.weights[l]) v = get_f64(in, pos);
    for (auto& v : net.biases[l]) v = get_f64(in, pos);
  }
  if (pos != in.size()) throw format_error("trailing bytes in checkpoint", pos);
  return net;
}

}  // namespace sclab
