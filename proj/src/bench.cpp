#include "beacon/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace beacon {

namespace {

// stream tags for deriving independent per-seed rngs
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kInitStream = 2;
constexpr std::uint64_t kTrainStream = 3;

std::vector<double> rotate_rows(const std::vector<double>& w, int output_dim, int input_dim,
                                double angle) {
  std::vector<double> out = w;
  if (angle == 0.0 || input_dim < 2) return out;
  const double c = std::cos(angle), s = std::sin(angle);
  for (int r = 0; r < output_dim; ++r) {
    double& a = out[static_cast<std::size_t>(r * input_dim)];
    double& b = out[static_cast<std::size_t>(r * input_dim + 1)];
    const double a0 = a, b0 = b;
    a = c * a0 - s * b0;
    b = s * a0 + c * b0;
  }
  return out;
}

LabeledSample draw_sample(const std::vector<double>& weights, const std::vector<double>& offset,
                          const ShiftSpec& spec, int domain, RngState& rng) {
  LabeledSample sample;
  sample.domain = domain;
  sample.x.resize(static_cast<std::size_t>(spec.input_dim));
  for (int c = 0; c < spec.input_dim; ++c)
    sample.x[static_cast<std::size_t>(c)] =
        rng.normal() + (offset.empty() ? 0.0 : offset[static_cast<std::size_t>(c)]);
  sample.y.resize(static_cast<std::size_t>(spec.output_dim));
  for (int r = 0; r < spec.output_dim; ++r) {
    double acc = 0.0;
    for (int c = 0; c < spec.input_dim; ++c)
      acc += weights[static_cast<std::size_t>(r * spec.input_dim + c)] *
             sample.x[static_cast<std::size_t>(c)];
    sample.y[static_cast<std::size_t>(r)] = acc + rng.normal(0.0, spec.label_noise_sigma);
  }
  return sample;
}

void corrupt_sample(LabeledSample& sample, const ShiftSpec& spec) {
  sample.corrupt = true;
  if (spec.corruption == Corruption::kLabelFlip) {
    for (auto& v : sample.y) v = -v;
  } else {
    for (auto& v : sample.y) v += spec.corruption_offset;
  }
}

LearnerOptions learner_options(const Config& cfg) {
  LearnerOptions opts;
  opts.input_dim = cfg.benchmark.input_dim;
  opts.output_dim = cfg.benchmark.output_dim;
  opts.embed_dim = cfg.benchmark.embed_dim;
  opts.loss = cfg.benchmark.loss;
  opts.clip_loss = cfg.benchmark.clip_loss;
  opts.freeze_encoder = cfg.hyper.freeze_encoder;
  opts.update_rule = cfg.hyper.update_rule;
  return opts;
}

}  // namespace

GeneratedTask gen_shifted_task(const ShiftSpec& spec, RngState& rng) {
  if (spec.n_target < 2) throw std::invalid_argument("gen_shifted_task: n_target must be >= 2");

  const auto wdim = static_cast<std::size_t>(spec.output_dim * spec.input_dim);
  std::vector<double> w_star(wdim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.input_dim));
  for (auto& v : w_star) v = rng.normal() * scale;

  GeneratedTask task;
  task.train.num_domains = spec.num_domains;
  for (int k = 0; k < spec.num_domains; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const std::vector<double> wk =
        rotate_rows(w_star, spec.output_dim, spec.input_dim, spec.concept_shift[ku]);
    const std::size_t first = task.train.samples.size();
    for (int i = 0; i < spec.m_per_source; ++i)
      task.train.samples.push_back(draw_sample(wk, spec.covariate_shift[ku], spec, k, rng));
    // corrupt an exact-count random subset of this domain
    const auto n_corrupt = static_cast<std::size_t>(
        std::llround(spec.corrupt_fraction[ku] * static_cast<double>(spec.m_per_source)));
    std::vector<std::size_t> pick(static_cast<std::size_t>(spec.m_per_source));
    for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = first + i;
    rng.shuffle(pick);
    for (std::size_t i = 0; i < n_corrupt; ++i) corrupt_sample(task.train.samples[pick[i]], spec);
  }
  task.train.m = task.train.samples.size();

  const std::vector<double> no_offset;
  for (int j = 0; j < spec.n_target; ++j)
    task.train.samples.push_back(draw_sample(w_star, no_offset, spec, kTargetDomain, rng));
  task.train.n = static_cast<std::size_t>(spec.n_target);

  task.heldout.num_domains = 0;
  for (int j = 0; j < spec.n_target; ++j)
    task.heldout.samples.push_back(draw_sample(w_star, no_offset, spec, kTargetDomain, rng));
  task.heldout.n = static_cast<std::size_t>(spec.n_target);

  task.train.validate();
  task.heldout.validate();
  task.fingerprint = dataset_fingerprint(task.train);
  return task;
}

TrainReport run_method(const std::string& method, const GeneratedTask& task, const Config& cfg,
                       const LearnerState& init, std::uint64_t seed, bool log_full_q) {
  RngState rng = seed_rng(mix_seed(seed, kTrainStream));
  TrainContext ctx;
  ctx.heldout = &task.heldout;
  ctx.init = &init;
  ctx.log_full_q = log_full_q;
  const LearnerOptions opts = learner_options(cfg);
  if (method == "beacon") return train_beacon_single(task.train, cfg.hyper, opts, rng, ctx);
  if (method == "ms_beacon") return train_beacon_multi(task.train, cfg.hyper, opts, rng, ctx);
  if (method == "target_only") return train_target_only(task.train, cfg.hyper, opts, rng, ctx);
  if (method == "cotrain_fixed")
    return train_cotrain_fixed(task.train, cfg.hyper, opts, cfg.run.mix_ratio, rng, ctx);
  throw ConfigError("unknown method '" + method + "'");
}

BenchReport run_experiment(const Config& cfg, const std::vector<std::string>& methods,
                           const std::vector<std::uint64_t>& seeds) {
  BenchReport report;
  const bool full_q = cfg.run.log_weights == WeightLogMode::kFull;
  for (const std::uint64_t seed : seeds) {
    RngState data_rng = seed_rng(mix_seed(seed, kDataStream));
    const GeneratedTask task = gen_shifted_task(cfg.benchmark, data_rng);
    RngState init_rng = seed_rng(mix_seed(seed, kInitStream));
    const LearnerState init = make_learner(learner_options(cfg), init_rng);
    for (const auto& method : methods) {
      const auto start = std::chrono::steady_clock::now();
      BenchCell cell;
      cell.method = method;
      cell.seed = seed;
      cell.dataset_fingerprint = task.fingerprint;
      cell.report = run_method(method, task, cfg, init, seed, full_q);
      cell.final_risk = evaluate(cell.report.learner, task.heldout);
      if (!cell.report.epochs.empty()) cell.final_q = cell.report.epochs.back().q;
      cell.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

namespace {

using FieldSetter = std::function<void(HyperParams&, double)>;
using FieldGetter = std::function<double(const HyperParams&)>;

struct FieldAccess {
  FieldSetter set;
  FieldGetter get;
};

const std::map<std::string, FieldAccess>& field_registry() {
  static const std::map<std::string, FieldAccess> reg = {
      {"lambda_1", {[](HyperParams& h, double v) { h.lambda1 = v; },
                    [](const HyperParams& h) { return h.lambda1; }}},
      {"lambda_2", {[](HyperParams& h, double v) { h.lambda2 = v; },
                    [](const HyperParams& h) { return h.lambda2; }}},
      {"lambda_d", {[](HyperParams& h, double v) { h.lambda_d = v; },
                    [](const HyperParams& h) { return h.lambda_d; }}},
      {"gamma", {[](HyperParams& h, double v) { h.gamma = v; },
                 [](const HyperParams& h) { return h.gamma; }}},
      {"rho_1", {[](HyperParams& h, double v) { h.rho1 = v; },
                 [](const HyperParams& h) { return h.rho1; }}},
      {"rho_2", {[](HyperParams& h, double v) { h.rho2 = v; },
                 [](const HyperParams& h) { return h.rho2; }}},
      {"alpha", {[](HyperParams& h, double v) { h.alpha = v; },
                 [](const HyperParams& h) { return h.alpha; }}},
      {"q_max", {[](HyperParams& h, double v) { h.q_max = v; },
                 [](const HyperParams& h) { return h.q_max; }}},
      {"q_t_min", {[](HyperParams& h, double v) { h.q_t_min = v; },
                   [](const HyperParams& h) { return h.q_t_min; }}},
      {"eta_q", {[](HyperParams& h, double v) { h.eta_q = v; },
                 [](const HyperParams& h) { return h.eta_q; }}},
      {"eta_theta", {[](HyperParams& h, double v) { h.eta_theta = v; },
                     [](const HyperParams& h) { return h.eta_theta; }}},
      {"eta_w", {[](HyperParams& h, double v) { h.eta_w = v; },
                 [](const HyperParams& h) { return h.eta_w; }}},
      {"eta_t", {[](HyperParams& h, double v) { h.eta_t = v; },
                 [](const HyperParams& h) { return h.eta_t; }}},
      {"k", {[](HyperParams& h, double v) { h.k = static_cast<int>(std::llround(v)); },
             [](const HyperParams& h) { return static_cast<double>(h.k); }}},
      {"k_q", {[](HyperParams& h, double v) { h.k_q = static_cast<int>(std::llround(v)); },
               [](const HyperParams& h) { return static_cast<double>(h.k_q); }}},
      {"s_h", {[](HyperParams& h, double v) { h.s_h = static_cast<int>(std::llround(v)); },
               [](const HyperParams& h) { return static_cast<double>(h.s_h); }}},
      {"e", {[](HyperParams& h, double v) { h.epochs = static_cast<int>(std::llround(v)); },
             [](const HyperParams& h) { return static_cast<double>(h.epochs); }}},
      {"batch_size",
       {[](HyperParams& h, double v) { h.batch_size = static_cast<int>(std::llround(v)); },
        [](const HyperParams& h) { return static_cast<double>(h.batch_size); }}},
  };
  return reg;
}

}  // namespace

std::vector<std::string> sweepable_fields() {
  std::vector<std::string> out;
  for (const auto& [name, access] : field_registry()) out.push_back(name);
  return out;
}

SweepReport run_sweep(const Config& cfg, const std::vector<std::string>& field_order,
                      const std::map<std::string, std::vector<double>>& grids,
                      const std::vector<std::uint64_t>& seeds) {
  const auto& registry = field_registry();
  for (const auto& field : field_order)
    if (!registry.count(field)) throw ConfigError("run_sweep: unknown field '" + field + "'");

  const std::string method = cfg.run.methods.empty() ? "beacon" : cfg.run.methods.front();
  const HyperParams defaults;

  SweepReport report;
  Config current = cfg;
  for (const auto& field : field_order) {
    const auto git = grids.find(field);
    if (git == grids.end() || git->second.empty())
      throw ConfigError("run_sweep: no grid for field '" + field + "'");
    const FieldAccess& access = registry.at(field);

    SweepFieldResult fr;
    fr.field = field;
    for (const double value : git->second) {
      Config trial = current;
      access.set(trial.hyper, value);
      const BenchReport br = run_experiment(trial, {method}, seeds);
      double acc = 0.0;
      for (const auto& cell : br.cells) acc += cell.final_risk;
      fr.values.push_back(value);
      fr.mean_risks.push_back(acc / static_cast<double>(br.cells.size()));
    }

    double best_risk = fr.mean_risks.front();
    for (const double r : fr.mean_risks) best_risk = std::min(best_risk, r);
    // exact ties: prefer the default value, then the smaller one
    const double default_value = access.get(defaults);
    double chosen = 0.0;
    bool have = false;
    for (std::size_t i = 0; i < fr.values.size(); ++i) {
      if (fr.mean_risks[i] != best_risk) continue;
      if (!have) {
        chosen = fr.values[i];
        have = true;
        continue;
      }
      if (chosen == default_value) continue;
      if (fr.values[i] == default_value || fr.values[i] < chosen) chosen = fr.values[i];
    }
    fr.chosen = chosen;
    access.set(current.hyper, chosen);
    report.fields.push_back(std::move(fr));
  }
  report.tuned = current.hyper;
  return report;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

nlohmann::json stats_json(const QStats& s) {
  nlohmann::json j;
  j["mean_q_source"] = s.mean_source;
  j["std_q_source"] = s.std_source;
  j["mean_q_target"] = s.mean_target;
  j["std_q_target"] = s.std_target;
  j["mean_q_clean"] = s.mean_clean;
  j["std_q_clean"] = s.std_clean;
  j["mean_q_corrupt"] = s.mean_corrupt;
  j["std_q_corrupt"] = s.std_corrupt;
  return j;
}

}  // namespace

void export_metrics(const BenchReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    std::ofstream csv(fs::path(dir) / "metrics.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("export_metrics: cannot write metrics.csv");
    csv << "method,seed,epoch,target_risk,mean_q_source,mean_q_target,mean_q_clean,mean_q_corrupt\n";
    for (const auto& cell : report.cells) {
      int epoch = 1;
      for (const auto& em : cell.report.epochs) {
        csv << cell.method << ',' << cell.seed << ',' << epoch << ','
            << format_double(em.target_risk) << ',' << format_double(em.q.mean_source) << ','
            << format_double(em.q.mean_target) << ',' << format_double(em.q.mean_clean) << ','
            << format_double(em.q.mean_corrupt) << '\n';
        ++epoch;
      }
    }
  }

  {
    std::ofstream jsonl(fs::path(dir) / "weights.jsonl", std::ios::binary);
    if (!jsonl) throw std::runtime_error("export_metrics: cannot write weights.jsonl");
    for (const auto& cell : report.cells) {
      for (const auto& rl : cell.report.refreshes) {
        nlohmann::json j = stats_json(rl.q);
        j["method"] = cell.method;
        j["seed"] = cell.seed;
        j["epoch"] = rl.epoch;
        j["d_mean"] = rl.d_mean;
        if (rl.d_aux) j["d_aux"] = *rl.d_aux;
        if (!rl.w.empty()) j["w"] = rl.w;
        if (rl.q_full) j["q"] = *rl.q_full;
        jsonl << j.dump() << '\n';
      }
    }
  }

  {
    nlohmann::json summary;
    std::map<std::string, std::vector<double>> risks;
    std::map<std::string, double> wall;
    for (const auto& cell : report.cells) {
      risks[cell.method].push_back(cell.final_risk);
      wall[cell.method] += cell.wall_seconds;
    }
    for (const auto& [method, values] : risks) {
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      const double sd = std::sqrt(var / static_cast<double>(values.size()));
      summary["methods"][method] = {{"mean_risk", mean},
                                    {"std_risk", sd},
                                    {"seeds", values.size()},
                                    {"wall_seconds", wall[method]}};
    }
    // per-seed winner counts
    std::map<std::uint64_t, std::pair<std::string, double>> best;
    for (const auto& cell : report.cells) {
      auto it = best.find(cell.seed);
      if (it == best.end() || cell.final_risk < it->second.second)
        best[cell.seed] = {cell.method, cell.final_risk};
    }
    std::map<std::string, int> wins;
    for (const auto& [seed, pick] : best) wins[pick.first] += 1;
    summary["win_counts"] = wins;
    std::vector<std::string> fingerprints;
    for (const auto& cell : report.cells) {
      std::ostringstream ss;
      ss << std::hex << cell.dataset_fingerprint;
      fingerprints.push_back(ss.str());
    }
    summary["dataset_fingerprints"] = fingerprints;
    std::ofstream out(fs::path(dir) / "summary.json", std::ios::binary);
    if (!out) throw std::runtime_error("export_metrics: cannot write summary.json");
    out << summary.dump(2) << '\n';
  }
}

void export_sweep(const SweepReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json j;
  for (const auto& fr : report.fields) {
    nlohmann::json field;
    field["field"] = fr.field;
    field["values"] = fr.values;
    field["mean_risks"] = fr.mean_risks;
    field["chosen"] = fr.chosen;
    j["fields"].push_back(field);
  }
  nlohmann::json tuned;
  for (const auto& name : sweepable_fields())
    tuned[name] = field_registry().at(name).get(report.tuned);
  j["tuned"] = tuned;
  std::ofstream out(fs::path(dir) / "sweep.json", std::ios::binary);
  if (!out) throw std::runtime_error("export_sweep: cannot write sweep.json");
  out << j.dump(2) << '\n';
}

std::vector<std::vector<double>> read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header row
      }
      throw std::runtime_error("csv parse error in " + path + ": " + line);
    }
    first = false;
    if (!rows.empty() && rows.front().size() != row.size())
      throw std::runtime_error("csv rows have inconsistent width in " + path);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace beacon
