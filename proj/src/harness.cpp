#include "sclab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "sclab/errors.hpp"
#include "sclab/rng.hpp"

namespace sclab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

NetworkSpec parse_network(const json& j, const NetworkSpec& fallback) {
  NetworkSpec s = fallback;
  if (j.contains("hidden")) s.hidden = j.at("hidden").get<std::vector<int>>();
  s.activation = j.value("activation", s.activation);
  activation_from_name(s.activation);   // validate early
  return s;
}

json network_json(const NetworkSpec& s) {
  return json{{"hidden", s.hidden}, {"activation", s.activation}};
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  if (j.contains("task")) {
    const json& t = j.at("task");
    std::string type = t.value("type", "synthetic");
    if (type == "synthetic") {
      c.use_cifar = false;
      c.synthetic.classes = t.value("classes", c.synthetic.classes);
      c.synthetic.dimension = t.value("dimension", c.synthetic.dimension);
      c.synthetic.sigma_gap = t.value("sigma_gap", c.synthetic.sigma_gap);
      c.synthetic.n = t.value("n", c.synthetic.n);
      c.synthetic.test_n = t.value("test_n", c.synthetic.test_n);
    } else if (type == "cifar-subset") {
      c.use_cifar = true;
      c.cifar.paths = t.at("paths").get<std::vector<std::string>>();
      c.cifar.selector.coarse_label = t.value("coarse_label", -1);
      if (t.contains("fine_labels"))
        c.cifar.selector.fine_labels = t.at("fine_labels").get<std::vector<int>>();
      c.cifar.downsample = t.value("downsample", c.cifar.downsample);
      c.cifar.test_fraction = t.value("test_fraction", c.cifar.test_fraction);
      for (const auto& p : c.cifar.paths)
        if (!fs::exists(p))
          throw contract_error("config: missing data file " + p);
    } else {
      throw contract_error("config: unknown task type " + type);
    }
  }
  if (j.contains("conditions"))
    c.conditions = j.at("conditions").get<std::vector<std::string>>();
  for (const auto& cond : c.conditions)
    if (cond != "curriculum" && cond != "anti-curriculum" &&
        cond != "random-curriculum" && cond != "none")
      throw contract_error("config: unknown condition " + cond);
  if (j.contains("student")) c.student = parse_network(j.at("student"), c.student);
  if (j.contains("teacher")) {
    c.teacher = parse_network(j.at("teacher"), c.teacher);
  } else {
    c.teacher.hidden.clear();
    c.teacher.activation = c.student.activation;
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    c.optimizer.kind = o.value("kind", c.optimizer.kind);
    if (c.optimizer.kind != "sgd" && c.optimizer.kind != "momentum" &&
        c.optimizer.kind != "adam")
      throw contract_error("config: unknown optimizer " + c.optimizer.kind);
    c.optimizer.step_size = o.value("step_size", c.optimizer.step_size);
    c.optimizer.momentum = o.value("momentum", c.optimizer.momentum);
    c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
    c.optimizer.epsilon = o.value("epsilon", c.optimizer.epsilon);
  }
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    c.schedule.mode = s.value("mode", c.schedule.mode);
    if (c.schedule.mode != "fixed" && c.schedule.mode != "adaptive")
      throw contract_error("config: unknown schedule mode " + c.schedule.mode);
    if (s.contains("fractions"))
      c.schedule.fractions = s.at("fractions").get<std::vector<double>>();
    c.schedule.adaptive.loss_window =
        s.value("loss_window", c.schedule.adaptive.loss_window);
    c.schedule.adaptive.improvement_threshold =
        s.value("improvement_threshold", c.schedule.adaptive.improvement_threshold);
    c.schedule.adaptive.patience = s.value("patience", c.schedule.adaptive.patience);
  }
  if (j.contains("l2_sweep"))
    c.l2_sweep = j.at("l2_sweep").get<std::vector<double>>();
  if (c.l2_sweep.empty()) throw contract_error("config: empty l2 sweep");
  if (j.contains("seeds"))
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (c.seeds.empty()) throw contract_error("config: seeds must be non-empty");
  c.steps = j.value("steps", c.steps);
  c.eval_every = j.value("eval_every", c.eval_every);
  if (c.steps < c.eval_every)
    throw contract_error("config: step budget below eval cadence");
  c.batch_size = j.value("batch_size", c.batch_size);
  c.transfer_l2 = j.value("transfer_l2", c.transfer_l2);
  c.transfer_epochs = j.value("transfer_epochs", c.transfer_epochs);
  c.teacher_step_multiple = j.value("teacher_step_multiple", c.teacher_step_multiple);
  c.teacher_width_multiple =
      j.value("teacher_width_multiple", c.teacher_width_multiple);

  // Canonical form: every field written back explicitly, so the digest does
  // not depend on which defaults the source file spelled out.
  json task;
  if (c.use_cifar) {
    task = {{"type", "cifar-subset"},
            {"paths", c.cifar.paths},
            {"coarse_label", c.cifar.selector.coarse_label},
            {"fine_labels", c.cifar.selector.fine_labels},
            {"downsample", c.cifar.downsample},
            {"test_fraction", c.cifar.test_fraction}};
  } else {
    task = {{"type", "synthetic"},
            {"classes", c.synthetic.classes},
            {"dimension", c.synthetic.dimension},
            {"sigma_gap", c.synthetic.sigma_gap},
            {"n", c.synthetic.n},
            {"test_n", c.synthetic.test_n}};
  }
  c.canonical = json{
      {"task", task},
      {"conditions", c.conditions},
      {"student", network_json(c.student)},
      {"teacher", network_json(c.teacher)},
      {"optimizer",
       {{"kind", c.optimizer.kind},
        {"step_size", c.optimizer.step_size},
        {"momentum", c.optimizer.momentum},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"epsilon", c.optimizer.epsilon}}},
      {"schedule",
       {{"mode", c.schedule.mode},
        {"fractions", c.schedule.fractions},
        {"loss_window", c.schedule.adaptive.loss_window},
        {"improvement_threshold", c.schedule.adaptive.improvement_threshold},
        {"patience", c.schedule.adaptive.patience}}},
      {"l2_sweep", c.l2_sweep},
      {"seeds", c.seeds},
      {"steps", c.steps},
      {"eval_every", c.eval_every},
      {"batch_size", c.batch_size},
      {"transfer_l2", c.transfer_l2},
      {"transfer_epochs", c.transfer_epochs},
      {"teacher_step_multiple", c.teacher_step_multiple},
      {"teacher_width_multiple", c.teacher_width_multiple}};
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw contract_error("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw contract_error("config: parse failure in " + path + ": " + e.what());
  }
  return parse_config(j);
}

std::string config_digest(const ExperimentConfig& config) {
  std::string dump = config.canonical.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string learning_curve_csv(const TrainingRun& run) {
  std::string s = "step,fraction,batch_loss,train_accuracy,test_accuracy\n";
  for (const auto& r : run.records) {
    if (!r.evaluated) continue;
    s += std::to_string(r.step) + "," + fmt(r.fraction) + "," +
         fmt(r.batch_loss) + "," + fmt(r.train_accuracy) + "," +
         fmt(r.test_accuracy) + "\n";
  }
  return s;
}

Dataset build_dataset(const ExperimentConfig& config, std::uint64_t seed) {
  if (!config.use_cifar)
    return generate_synthetic(config.synthetic.classes, config.synthetic.dimension,
                              config.synthetic.sigma_gap, config.synthetic.n, seed,
                              config.synthetic.test_n);

  CifarSubset subset = load_cifar_subset(config.cifar.paths,
                                         config.cifar.selector,
                                         config.cifar.downsample);
  if (subset.empty_result) throw contract_error("cifar: selector matched nothing");
  Dataset d;
  d.feature_dim = subset.feature_dim;
  d.num_classes = static_cast<int>(subset.label_map.size());
  // Deterministic split: every k-th example (by position) goes to test.
  std::size_t stride = config.cifar.test_fraction > 0.0
      ? std::max<std::size_t>(2, static_cast<std::size_t>(
            std::llround(1.0 / config.cifar.test_fraction)))
      : 0;
  for (std::size_t i = 0; i < subset.x.size(); ++i) {
    if (stride != 0 && i % stride == stride - 1) {
      d.test_x.push_back(subset.x[i]);
      d.test_y.push_back(subset.y[i]);
    } else {
      d.train_x.push_back(subset.x[i]);
      d.train_y.push_back(subset.y[i]);
    }
  }
  if (d.train_x.empty()) throw contract_error("cifar: empty training split");
  return d;
}

namespace {

OptimizerState make_optimizer(const OptimizerSpec& spec, double l2) {
  if (spec.kind == "momentum")
    return OptimizerState::sgd_momentum(spec.step_size, spec.momentum, l2);
  if (spec.kind == "adam")
    return OptimizerState::adam(spec.step_size, spec.beta1, spec.beta2,
                                spec.epsilon, l2);
  return OptimizerState::sgd(spec.step_size, l2);
}

PacingSchedule make_schedule(const ScheduleSpec& spec, std::uint64_t steps) {
  if (spec.mode == "adaptive") {
    PacingSchedule s = PacingSchedule::default_adaptive();
    s.adaptive = spec.adaptive;
    if (!spec.fractions.empty()) {
      s.phases.clear();
      for (double f : spec.fractions) s.phases.push_back({f, 0});
    }
    s.validate();
    return s;
  }
  if (spec.fractions.empty()) return PacingSchedule::default_fixed(steps);
  PacingSchedule s;
  s.mode = PacingSchedule::Mode::Fixed;
  std::uint64_t per = steps / spec.fractions.size();
  for (std::size_t i = 0; i < spec.fractions.size(); ++i)
    s.phases.push_back({spec.fractions[i],
                        i + 1 == spec.fractions.size() ? 0 : per});
  s.validate();
  return s;
}

PacingSchedule uniform_schedule() {
  PacingSchedule s;
  s.mode = PacingSchedule::Mode::Fixed;
  s.phases = {{1.0, 0}};
  return s;
}

std::vector<int> teacher_widths(const ExperimentConfig& c, const Dataset& data) {
  std::vector<int> w;
  w.push_back(data.feature_dim);
  if (!c.teacher.hidden.empty()) {
    for (int h : c.teacher.hidden) w.push_back(h);
  } else {
    for (int h : c.student.hidden) w.push_back(h * c.teacher_width_multiple);
  }
  w.push_back(data.num_classes);
  return w;
}

std::string l2_tag(double l2) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", l2);
  return buf;
}

}  // namespace

DifficultyRanking teacher_transfer_ranking(const ExperimentConfig& config,
                                           const Dataset& data,
                                           std::uint64_t seed) {
  Activation act = activation_from_name(config.teacher.hidden.empty()
                                            ? config.student.activation
                                            : config.teacher.activation);
  DenseNetwork teacher = DenseNetwork::create(teacher_widths(config, data), act,
                                              CounterRng::mix(seed, 0x7EAC));
  OptimizerState opt = make_optimizer(config.optimizer, 0.0);
  TrainOptions options;
  options.steps = config.steps * config.teacher_step_multiple;
  options.seed = CounterRng::mix(seed, 0x7EAD);
  options.eval_every = options.steps;   // final eval only
  options.batch_size = config.batch_size;
  options.condition = "none";
  DifficultyRanking trivial = DifficultyRanking::from_scores(
      std::vector<double>(data.train_x.size(), 0.0), Provenance::Ideal);
  train_with_curriculum(teacher, data, trivial, uniform_schedule(), opt, options);

  TeacherEmbedding emb;
  emb.num_classes = data.num_classes;
  emb.labels = data.train_y;
  emb.activations.reserve(data.train_x.size());
  for (const auto& x : data.train_x)
    emb.activations.push_back(penultimate_activation(teacher, x));
  return transfer_ranking(emb, config.transfer_l2, config.transfer_epochs,
                          CounterRng::mix(seed, 0x7EAE));
}

DifficultyRanking ranking_for_condition(const DifficultyRanking& base,
                                        const std::string& condition,
                                        std::uint64_t seed) {
  if (condition == "anti-curriculum")
    return control_transform(base, ControlMode::Reversed);
  if (condition == "random-curriculum")
    return control_transform(base, ControlMode::Random, seed);
  return base;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config,
                                      const std::string& out_dir) {
  std::vector<RunRecord> records;
  const std::string digest = config_digest(config);
  std::string run_dir;
  if (!out_dir.empty()) {
    run_dir = (fs::path(out_dir) / digest).string();
    ensure_directory(run_dir);
  }

  for (std::uint64_t seed : config.seeds) {
    Dataset data = build_dataset(config, seed);
    DifficultyRanking base = teacher_transfer_ranking(config, data, seed);
    for (const std::string& condition : config.conditions) {
      DifficultyRanking ranking = ranking_for_condition(base, condition, seed);
      for (double l2 : config.l2_sweep) {
        RunRecord rec;
        rec.digest = digest;
        rec.condition = condition;
        rec.seed = seed;
        rec.l2 = l2;
        auto t0 = std::chrono::steady_clock::now();
        try {
          DenseNetwork student = DenseNetwork::create(
              [&] {
                std::vector<int> w{data.feature_dim};
                for (int h : config.student.hidden) w.push_back(h);
                w.push_back(data.num_classes);
                return w;
              }(),
              activation_from_name(config.student.activation),
              CounterRng::mix(seed, 0x57D1));
          OptimizerState opt = make_optimizer(config.optimizer, l2);
          PacingSchedule schedule = condition == "none"
                                        ? uniform_schedule()
                                        : make_schedule(config.schedule, config.steps);
          TrainOptions options;
          options.steps = config.steps;
          options.seed = CounterRng::mix(seed, 0x57D2);
          options.eval_every = config.eval_every;
          options.batch_size = config.batch_size;
          options.condition = condition;
          rec.run = train_with_curriculum(student, data, ranking, schedule, opt,
                                          options).run;
        } catch (const std::exception& e) {
          rec.error = e.what();
        }
        rec.wall_time_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        if (!run_dir.empty() && rec.error.empty()) {
          std::string name = condition + "_s" + std::to_string(seed) + "_l2" +
                             l2_tag(l2) + ".csv";
          write_text_file((fs::path(run_dir) / name).string(),
                          learning_curve_csv(rec.run));
        }
        records.push_back(std::move(rec));
      }
    }
  }

  if (!run_dir.empty()) {
    std::string index =
        "condition,seed,l2,final_train_accuracy,final_test_accuracy,status\n";
    for (const auto& r : records) {
      std::string status = r.error.empty() ? "ok" : r.error;
      std::replace(status.begin(), status.end(), ',', ';');
      std::replace(status.begin(), status.end(), '\n', ' ');
      index += r.condition + "," + std::to_string(r.seed) + "," + l2_tag(r.l2) +
               "," + fmt(r.run.final_train_accuracy) + "," +
               fmt(r.run.final_test_accuracy) + "," + status + "\n";
    }
    write_text_file((fs::path(run_dir) / "records.csv").string(), index);
    write_text_file((fs::path(run_dir) / "config.json").string(),
                    config.canonical.dump(2) + "\n");
  }
  return records;
}

std::string report(const std::vector<RunRecord>& records) {
  if (records.empty()) throw contract_error("report: no records");

  // Union grid of evaluated steps across all successful runs.
  std::vector<std::uint64_t> grid;
  for (const auto& rec : records) {
    if (!rec.error.empty()) continue;
    for (const auto& r : rec.run.records)
      if (r.evaluated) grid.push_back(r.step);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.empty()) throw contract_error("report: no evaluated checkpoints");

  std::string out = "condition,step,mean_test_accuracy,se,count,resampled\n";
  std::vector<std::string> conditions;
  for (const auto& rec : records)
    if (std::find(conditions.begin(), conditions.end(), rec.condition) ==
        conditions.end())
      conditions.push_back(rec.condition);

  for (const auto& condition : conditions) {
    for (std::uint64_t step : grid) {
      std::vector<double> vals;
      bool resampled = false;
      for (const auto& rec : records) {
        if (rec.condition != condition || !rec.error.empty()) continue;
        // nearest evaluated checkpoint; ties resolve to the earlier one
        const StepRecord* best = nullptr;
        std::uint64_t best_dist = 0;
        for (const auto& r : rec.run.records) {
          if (!r.evaluated) continue;
          std::uint64_t dist = r.step > step ? r.step - step : step - r.step;
          if (!best || dist < best_dist) {
            best = &r;
            best_dist = dist;
          }
        }
        if (!best) continue;
        if (best->step != step) resampled = true;
        vals.push_back(best->test_accuracy);
      }
      if (vals.empty()) continue;
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      double se = vals.size() > 1
          ? std::sqrt(var / (static_cast<double>(vals.size()) *
                             (static_cast<double>(vals.size()) - 1.0)))
          : 0.0;
      out += condition + "," + std::to_string(step) + "," + fmt(mean) + "," +
             fmt(se) + "," + std::to_string(vals.size()) + "," +
             (resampled ? "1" : "0") + "\n";
    }
  }
  return out;
}

std::vector<AlignmentCheckpointReport> run_alignment(
    const ExperimentConfig& config, const std::vector<int>& epochs,
    std::size_t repetitions, std::vector<std::uint64_t>* steps_out) {
  std::uint64_t seed = config.seeds.front();
  Dataset data = build_dataset(config, seed);
  DifficultyRanking ranking = teacher_transfer_ranking(config, data, seed);

  std::uint64_t steps_per_epoch =
      std::max<std::uint64_t>(1, data.train_x.size() / config.batch_size);
  std::vector<std::uint64_t> snapshot_steps;
  std::uint64_t max_step = 0;
  for (int e : epochs) {
    if (e < 0) throw contract_error("run_alignment: negative epoch");
    std::uint64_t s = static_cast<std::uint64_t>(e) * steps_per_epoch;
    snapshot_steps.push_back(s);
    max_step = std::max(max_step, s);
  }
  if (steps_out) *steps_out = snapshot_steps;

  DenseNetwork student = DenseNetwork::create(
      [&] {
        std::vector<int> w{data.feature_dim};
        for (int h : config.student.hidden) w.push_back(h);
        w.push_back(data.num_classes);
        return w;
      }(),
      activation_from_name(config.student.activation),
      CounterRng::mix(seed, 0x57D1));
  OptimizerState opt = make_optimizer(config.optimizer, 0.0);
  TrainOptions options;
  options.steps = std::max<std::uint64_t>(max_step, 1);
  options.seed = CounterRng::mix(seed, 0x57D2);
  options.eval_every = options.steps;
  options.batch_size = config.batch_size;
  options.condition = "none";
  options.snapshot_steps = snapshot_steps;
  DifficultyRanking trivial = DifficultyRanking::from_scores(
      std::vector<double>(data.train_x.size(), 0.0), Provenance::Ideal);
  TrainResult result = train_with_curriculum(student, data, trivial,
                                             uniform_schedule(), opt, options);

  return alignment_experiment(result.snapshots, data, ranking,
                              config.batch_size, repetitions,
                              CounterRng::mix(seed, 0xF162));
}

std::string alignment_csv(const std::vector<std::uint64_t>& steps,
                          const std::vector<AlignmentCheckpointReport>& reports) {
  if (steps.size() != reports.size())
    throw contract_error("alignment_csv: size mismatch");
  std::string s = "step,easy_mean_angle,easy_se,hard_mean_angle,hard_se,gap\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    s += std::to_string(steps[i]) + "," + fmt(r.easy.mean_angle) + "," +
         fmt(r.easy.standard_error) + "," + fmt(r.hard.mean_angle) + "," +
         fmt(r.hard.standard_error) + "," + fmt(r.gap()) + "\n";
  }
  return s;
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw contract_error("cannot create directory " + path);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw contract_error("cannot write " + tmp);
    out << content;
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw contract_error("cannot move " + tmp + " into place");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw contract_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace sclab
