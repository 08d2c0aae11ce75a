#include "beacon/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace beacon {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

void check_known_keys(const json& j, const std::string& section, const std::set<std::string>& known) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("unknown config key '" + section + it.key() + "'");
  }
}

double get_num(const json& j, const std::string& section, const std::string& key, double def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number()) fail(section + key, "expected a number");
  const double v = j[key].get<double>();
  if (!std::isfinite(v)) fail(section + key, "must be finite");
  return v;
}

int get_int(const json& j, const std::string& section, const std::string& key, int def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number_integer()) fail(section + key, "expected an integer");
  return j[key].get<int>();
}

bool get_bool(const json& j, const std::string& section, const std::string& key, bool def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_boolean()) fail(section + key, "expected a boolean");
  return j[key].get<bool>();
}

std::string get_str(const json& j, const std::string& section, const std::string& key, const std::string& def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_string()) fail(section + key, "expected a string");
  return j[key].get<std::string>();
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) fail(field, what);
}

Estimator parse_estimator(const std::string& s) {
  if (s == "knn") return Estimator::kKnn;
  if (s == "classifier") return Estimator::kClassifier;
  if (s == "localized") return Estimator::kLocalized;
  fail("hyper.estimator", "must be one of knn|classifier|localized");
}

QUpdate parse_q_update(const std::string& s) {
  if (s == "stochastic") return QUpdate::kStochastic;
  if (s == "convex_solve") return QUpdate::kConvexSolve;
  fail("hyper.q_update", "must be one of stochastic|convex_solve");
}

UpdateRule parse_update_rule(const std::string& s) {
  if (s == "adam") return UpdateRule::kAdam;
  if (s == "gd") return UpdateRule::kGd;
  fail("hyper.update_rule", "must be one of adam|gd");
}

LossKind parse_loss(const std::string& s) {
  if (s == "squared") return LossKind::kSquared;
  if (s == "logistic") return LossKind::kLogistic;
  fail("benchmark.loss", "must be one of squared|logistic");
}

Corruption parse_corruption(const std::string& s) {
  if (s == "label_flip") return Corruption::kLabelFlip;
  if (s == "label_offset") return Corruption::kLabelOffset;
  fail("benchmark.corruption", "must be one of label_flip|label_offset");
}

WeightLogMode parse_log_mode(const std::string& s) {
  if (s == "summary") return WeightLogMode::kSummary;
  if (s == "full") return WeightLogMode::kFull;
  fail("run.log_weights", "must be one of summary|full");
}

LocalizedSpec parse_localized(const json& j, bool required_radius) {
  check_known_keys(j, "hyper.localized.",
                   {"radius", "beta", "steps", "eval_period", "noise_draws", "step_size", "ref_epochs"});
  LocalizedSpec out;
  out.radius = get_num(j, "hyper.localized.", "radius", out.radius);
  out.beta = get_num(j, "hyper.localized.", "beta", out.beta);
  out.steps = get_int(j, "hyper.localized.", "steps", out.steps);
  out.eval_period = get_int(j, "hyper.localized.", "eval_period", out.eval_period);
  out.noise_draws = get_int(j, "hyper.localized.", "noise_draws", out.noise_draws);
  out.step_size = get_num(j, "hyper.localized.", "step_size", out.step_size);
  out.ref_epochs = get_int(j, "hyper.localized.", "ref_epochs", out.ref_epochs);
  if (required_radius) require(out.radius >= 0.0, "hyper.localized.radius", "required (>= 0) for the localized estimator");
  if (out.radius >= 0.0 || required_radius) {
    require(out.beta >= 0.0, "hyper.localized.beta", "must be >= 0");
    require(out.steps >= 1, "hyper.localized.steps", "must be >= 1");
    require(out.eval_period >= 1 && out.eval_period <= out.steps, "hyper.localized.eval_period",
            "must be in [1, steps]");
    require(out.noise_draws >= 1, "hyper.localized.noise_draws", "must be >= 1");
    require(out.step_size > 0.0, "hyper.localized.step_size", "must be > 0");
    require(out.ref_epochs >= 0, "hyper.localized.ref_epochs", "must be >= 0");
  }
  return out;
}

HyperParams parse_hyper(const json& j) {
  static const std::set<std::string> known = {
      "lambda_1", "lambda_2", "lambda_d", "gamma", "rho_1", "rho_2", "alpha",
      "q_max", "q_t_min", "eta_q", "eta_theta", "eta_w", "eta_t",
      "k_q", "s_h", "e", "k", "batch_size",
      "estimator", "q_update", "update_rule", "freeze_encoder", "localized"};
  check_known_keys(j, "hyper.", known);
  HyperParams hp;
  hp.lambda1 = get_num(j, "hyper.", "lambda_1", hp.lambda1);
  hp.lambda2 = get_num(j, "hyper.", "lambda_2", hp.lambda2);
  hp.lambda_d = get_num(j, "hyper.", "lambda_d", hp.lambda_d);
  hp.gamma = get_num(j, "hyper.", "gamma", hp.gamma);
  hp.rho1 = get_num(j, "hyper.", "rho_1", hp.rho1);
  hp.rho2 = get_num(j, "hyper.", "rho_2", hp.rho2);
  hp.alpha = get_num(j, "hyper.", "alpha", hp.alpha);
  hp.q_max = get_num(j, "hyper.", "q_max", hp.q_max);
  hp.q_t_min = get_num(j, "hyper.", "q_t_min", hp.q_t_min);
  hp.eta_q = get_num(j, "hyper.", "eta_q", hp.eta_q);
  hp.eta_theta = get_num(j, "hyper.", "eta_theta", hp.eta_theta);
  hp.eta_w = get_num(j, "hyper.", "eta_w", hp.eta_w);
  hp.eta_t = get_num(j, "hyper.", "eta_t", hp.eta_t);
  hp.k_q = get_int(j, "hyper.", "k_q", hp.k_q);
  hp.s_h = get_int(j, "hyper.", "s_h", hp.s_h);
  hp.epochs = get_int(j, "hyper.", "e", hp.epochs);
  hp.k = get_int(j, "hyper.", "k", hp.k);
  hp.batch_size = get_int(j, "hyper.", "batch_size", hp.batch_size);
  if (j.contains("estimator")) hp.estimator = parse_estimator(get_str(j, "hyper.", "estimator", ""));
  if (j.contains("q_update")) hp.q_update = parse_q_update(get_str(j, "hyper.", "q_update", ""));
  if (j.contains("update_rule")) hp.update_rule = parse_update_rule(get_str(j, "hyper.", "update_rule", ""));
  hp.freeze_encoder = get_bool(j, "hyper.", "freeze_encoder", hp.freeze_encoder);
  if (j.contains("localized") || hp.estimator == Estimator::kLocalized)
    hp.localized = parse_localized(j.value("localized", json::object()),
                                   hp.estimator == Estimator::kLocalized);

  require(hp.lambda1 >= 0.0, "hyper.lambda_1", "must be >= 0");
  require(hp.lambda2 >= 0.0, "hyper.lambda_2", "must be >= 0");
  require(hp.lambda_d >= 0.0, "hyper.lambda_d", "must be >= 0");
  require(hp.gamma >= 0.0, "hyper.gamma", "must be >= 0");
  require(hp.rho1 >= 0.0, "hyper.rho_1", "must be >= 0");
  require(hp.rho2 >= 0.0, "hyper.rho_2", "must be >= 0");
  require(hp.alpha > 0.0 && hp.alpha <= 1.0, "hyper.alpha", "must be in (0, 1]");
  require(hp.q_max >= 1.0, "hyper.q_max", "must be >= 1");
  require(hp.q_t_min >= 0.0, "hyper.q_t_min", "must be >= 0");
  require(hp.q_t_min < hp.q_max, "hyper.q_t_min", "must be < q_max");
  require(hp.eta_q > 0.0, "hyper.eta_q", "must be > 0");
  require(hp.eta_theta > 0.0, "hyper.eta_theta", "must be > 0");
  require(hp.eta_w > 0.0, "hyper.eta_w", "must be > 0");
  require(hp.eta_t > 0.0, "hyper.eta_t", "must be > 0");
  require(hp.k_q >= 1, "hyper.k_q", "must be >= 1");
  require(hp.s_h >= 1, "hyper.s_h", "must be >= 1");
  require(hp.epochs >= 0, "hyper.e", "must be >= 0");
  require(hp.k >= 1, "hyper.k", "must be >= 1");
  require(hp.batch_size >= 1, "hyper.batch_size", "must be >= 1");
  return hp;
}

std::vector<double> parse_shift_vector(const json& v, int input_dim, const std::string& field) {
  std::vector<double> out(static_cast<std::size_t>(input_dim), 0.0);
  if (v.is_number()) {
    // scalar shorthand: offset along the first coordinate
    out[0] = v.get<double>();
    return out;
  }
  if (!v.is_array()) fail(field, "expected a number or an array");
  if (v.size() != out.size()) fail(field, "length must equal input_dim");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!v[i].is_number()) fail(field, "entries must be numbers");
    out[i] = v[i].get<double>();
    if (!std::isfinite(out[i])) fail(field, "entries must be finite");
  }
  return out;
}

ShiftSpec parse_benchmark(const json& j) {
  static const std::set<std::string> known = {
      "input_dim", "output_dim", "n_target", "m_per_source", "k",
      "covariate_shift", "concept_shift", "corrupt_fraction",
      "label_noise_sigma", "corruption", "corruption_offset",
      "embed_dim", "loss", "clip_loss"};
  check_known_keys(j, "benchmark.", known);
  ShiftSpec bs;
  bs.input_dim = get_int(j, "benchmark.", "input_dim", bs.input_dim);
  bs.output_dim = get_int(j, "benchmark.", "output_dim", bs.output_dim);
  bs.n_target = get_int(j, "benchmark.", "n_target", bs.n_target);
  bs.m_per_source = get_int(j, "benchmark.", "m_per_source", bs.m_per_source);
  bs.num_domains = get_int(j, "benchmark.", "k", bs.num_domains);
  bs.label_noise_sigma = get_num(j, "benchmark.", "label_noise_sigma", bs.label_noise_sigma);
  if (j.contains("corruption")) bs.corruption = parse_corruption(get_str(j, "benchmark.", "corruption", ""));
  bs.corruption_offset = get_num(j, "benchmark.", "corruption_offset", bs.corruption_offset);
  bs.embed_dim = get_int(j, "benchmark.", "embed_dim", bs.embed_dim);
  if (j.contains("loss")) bs.loss = parse_loss(get_str(j, "benchmark.", "loss", ""));
  bs.clip_loss = get_bool(j, "benchmark.", "clip_loss", bs.clip_loss);

  require(bs.input_dim >= 1, "benchmark.input_dim", "must be >= 1");
  require(bs.output_dim >= 1, "benchmark.output_dim", "must be >= 1");
  require(bs.n_target >= 2, "benchmark.n_target", "must be >= 2");
  require(bs.m_per_source >= 0, "benchmark.m_per_source", "must be >= 0");
  require(bs.num_domains >= 1, "benchmark.k", "must be >= 1");
  require(bs.label_noise_sigma >= 0.0, "benchmark.label_noise_sigma", "must be >= 0");
  require(bs.embed_dim >= 1, "benchmark.embed_dim", "must be >= 1");

  const auto K = static_cast<std::size_t>(bs.num_domains);
  bs.covariate_shift.assign(K, std::vector<double>(static_cast<std::size_t>(bs.input_dim), 0.0));
  if (j.contains("covariate_shift")) {
    const auto& cs = j["covariate_shift"];
    if (!cs.is_array() || cs.size() != K) fail("benchmark.covariate_shift", "expected one entry per domain");
    for (std::size_t d = 0; d < K; ++d)
      bs.covariate_shift[d] = parse_shift_vector(cs[d], bs.input_dim, "benchmark.covariate_shift");
  }
  bs.concept_shift.assign(K, 0.0);
  if (j.contains("concept_shift")) {
    const auto& cs = j["concept_shift"];
    if (!cs.is_array() || cs.size() != K) fail("benchmark.concept_shift", "expected one angle per domain");
    for (std::size_t d = 0; d < K; ++d) {
      if (!cs[d].is_number()) fail("benchmark.concept_shift", "entries must be numbers");
      bs.concept_shift[d] = cs[d].get<double>();
      if (bs.concept_shift[d] != 0.0)
        require(bs.input_dim >= 2, "benchmark.concept_shift", "rotation needs input_dim >= 2");
    }
  }
  bs.corrupt_fraction.assign(K, 0.0);
  if (j.contains("corrupt_fraction")) {
    const auto& cf = j["corrupt_fraction"];
    if (!cf.is_array() || cf.size() != K) fail("benchmark.corrupt_fraction", "expected one fraction per domain");
    for (std::size_t d = 0; d < K; ++d) {
      if (!cf[d].is_number()) fail("benchmark.corrupt_fraction", "entries must be numbers");
      bs.corrupt_fraction[d] = cf[d].get<double>();
      require(bs.corrupt_fraction[d] >= 0.0 && bs.corrupt_fraction[d] <= 1.0,
              "benchmark.corrupt_fraction", "entries must be in [0, 1]");
    }
  }
  return bs;
}

RunSpec parse_run(const json& j) {
  static const std::set<std::string> known = {"seed", "out_dir", "methods", "mix_ratio", "log_weights", "seeds"};
  check_known_keys(j, "run.", known);
  RunSpec rs;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) fail("run.seed", "expected an integer");
    rs.seed = j["seed"].get<std::uint64_t>();
  }
  rs.out_dir = get_str(j, "run.", "out_dir", rs.out_dir);
  if (j.contains("methods")) {
    const auto& ms = j["methods"];
    if (!ms.is_array()) fail("run.methods", "expected an array of method names");
    rs.methods.clear();
    for (const auto& e : ms) {
      if (!e.is_string()) fail("run.methods", "entries must be strings");
      const std::string name = e.get<std::string>();
      if (name != "beacon" && name != "ms_beacon" && name != "target_only" && name != "cotrain_fixed")
        fail("run.methods", "unknown method '" + name + "'");
      rs.methods.push_back(name);
    }
  }
  rs.mix_ratio = get_num(j, "run.", "mix_ratio", rs.mix_ratio);
  require(rs.mix_ratio > 0.0 && rs.mix_ratio < 1.0, "run.mix_ratio", "must be in (0, 1)");
  if (j.contains("log_weights")) rs.log_weights = parse_log_mode(get_str(j, "run.", "log_weights", ""));
  rs.seeds = get_int(j, "run.", "seeds", rs.seeds);
  require(rs.seeds >= 1, "run.seeds", "must be >= 1");
  return rs;
}

json dump_hyper(const HyperParams& hp) {
  json j;
  j["lambda_1"] = hp.lambda1;
  j["lambda_2"] = hp.lambda2;
  j["lambda_d"] = hp.lambda_d;
  j["gamma"] = hp.gamma;
  j["rho_1"] = hp.rho1;
  j["rho_2"] = hp.rho2;
  j["alpha"] = hp.alpha;
  j["q_max"] = hp.q_max;
  j["q_t_min"] = hp.q_t_min;
  j["eta_q"] = hp.eta_q;
  j["eta_theta"] = hp.eta_theta;
  j["eta_w"] = hp.eta_w;
  j["eta_t"] = hp.eta_t;
  j["k_q"] = hp.k_q;
  j["s_h"] = hp.s_h;
  j["e"] = hp.epochs;
  j["k"] = hp.k;
  j["batch_size"] = hp.batch_size;
  j["estimator"] = to_string(hp.estimator);
  j["q_update"] = to_string(hp.q_update);
  j["update_rule"] = to_string(hp.update_rule);
  j["freeze_encoder"] = hp.freeze_encoder;
  j["localized"] = {{"radius", hp.localized.radius},
                    {"beta", hp.localized.beta},
                    {"steps", hp.localized.steps},
                    {"eval_period", hp.localized.eval_period},
                    {"noise_draws", hp.localized.noise_draws},
                    {"step_size", hp.localized.step_size},
                    {"ref_epochs", hp.localized.ref_epochs}};
  return j;
}

json dump_benchmark(const ShiftSpec& bs) {
  json j;
  j["input_dim"] = bs.input_dim;
  j["output_dim"] = bs.output_dim;
  j["n_target"] = bs.n_target;
  j["m_per_source"] = bs.m_per_source;
  j["k"] = bs.num_domains;
  j["covariate_shift"] = bs.covariate_shift;
  j["concept_shift"] = bs.concept_shift;
  j["corrupt_fraction"] = bs.corrupt_fraction;
  j["label_noise_sigma"] = bs.label_noise_sigma;
  j["corruption"] = to_string(bs.corruption);
  j["corruption_offset"] = bs.corruption_offset;
  j["embed_dim"] = bs.embed_dim;
  j["loss"] = to_string(bs.loss);
  j["clip_loss"] = bs.clip_loss;
  return j;
}

json dump_run(const RunSpec& rs) {
  json j;
  j["seed"] = rs.seed;
  j["out_dir"] = rs.out_dir;
  j["methods"] = rs.methods;
  j["mix_ratio"] = rs.mix_ratio;
  j["log_weights"] = to_string(rs.log_weights);
  j["seeds"] = rs.seeds;
  return j;
}

}  // namespace

Config parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be an object");
  check_known_keys(j, "", {"hyper", "benchmark", "run"});
  Config cfg;
  cfg.hyper = parse_hyper(j.value("hyper", json::object()));
  cfg.benchmark = parse_benchmark(j.value("benchmark", json::object()));
  cfg.run = parse_run(j.value("run", json::object()));
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const Config& cfg) {
  json j;
  j["hyper"] = dump_hyper(cfg.hyper);
  j["benchmark"] = dump_benchmark(cfg.benchmark);
  j["run"] = dump_run(cfg.run);
  return j.dump(2);
}

void save_config(const Config& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path);
  out << dump_config(cfg) << "\n";
}

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::kKnn: return "knn";
    case Estimator::kClassifier: return "classifier";
    case Estimator::kLocalized: return "localized";
  }
  return "knn";
}

std::string to_string(QUpdate q) {
  return q == QUpdate::kStochastic ? "stochastic" : "convex_solve";
}

std::string to_string(UpdateRule u) { return u == UpdateRule::kAdam ? "adam" : "gd"; }

std::string to_string(LossKind l) { return l == LossKind::kSquared ? "squared" : "logistic"; }

std::string to_string(Corruption c) {
  return c == Corruption::kLabelFlip ? "label_flip" : "label_offset";
}

std::string to_string(WeightLogMode m) {
  return m == WeightLogMode::kSummary ? "summary" : "full";
}

}  // namespace beacon
