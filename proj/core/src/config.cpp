#include "barfiq/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "barfiq/csv.hpp"
#include "barfiq/errors.hpp"

namespace barfiq {

void DataConfig::validate() const {
  if (window_len < 2) throw ConfigError("data.window_len must be >= 2");
  if (!(train_frac > 0.0) || !(val_frac > 0.0) || !(train_frac + val_frac < 1.0))
    throw ConfigError("data.train_frac and data.val_frac must be positive and sum below 1");
}

void SweepConfig::validate() const {
  if (windows.empty()) throw ConfigError("sweep.windows must not be empty");
  if (variants.empty()) throw ConfigError("sweep.variants must not be empty");
  fusion::FusionConfig probe;
  for (const auto& v : variants) probe.set_variant(v);
  if (jobs == 0) throw ConfigError("sweep.jobs must be >= 1");
}

void ExperimentConfig::validate() const {
  gen.validate();
  if (fringe.min_points < 3) throw ConfigError("fringe.min_points must be >= 3");
  if (!(fringe.eps_amp >= 0.0)) throw ConfigError("fringe.eps_amp must be >= 0");
  data.validate();
  network.validate(data.window_len);
  loss.validate();
  train.validate();
  sweep.validate();
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(std::string_view key, std::string_view v) {
  try {
    return csv::parse_double(trim(v), 0);
  } catch (const DataError&) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
}

std::size_t to_size(std::string_view key, std::string_view v) {
  std::int64_t x = 0;
  try {
    x = csv::parse_int(trim(v), 0);
  } catch (const DataError&) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
  }
  if (x < 0) throw ConfigError(std::string(key) + ": must be non-negative");
  return static_cast<std::size_t>(x);
}

std::vector<std::string> to_list(std::string_view v) {
  std::vector<std::string> out;
  for (const auto& f : csv::split(v)) {
    std::string t = trim(f);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::size_t> to_size_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  for (const auto& f : to_list(v)) out.push_back(to_size(key, f));
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_same_v<T, std::string>) s += xs[i];
    else s += std::to_string(xs[i]);
  }
  return s;
}

struct Field {
  std::string key;
  std::function<void(std::string_view)> set;
  std::function<std::string()> get;
};

Field num(std::string key, double& ref) {
  return {key, [&ref, key](std::string_view v) { ref = to_double(key, v); }, [&ref] { return csv::format_double(ref); }};
}

Field count(std::string key, std::size_t& ref) {
  return {key, [&ref, key](std::string_view v) { ref = to_size(key, v); }, [&ref] { return std::to_string(ref); }};
}

Field seed(std::string key, std::uint64_t& ref) {
  return {key, [&ref, key](std::string_view v) { ref = to_size(key, v); }, [&ref] { return std::to_string(ref); }};
}

// Bound to a specific config object; rebuilt on every call.
std::vector<Field> fields(ExperimentConfig& c) {
  auto& g = c.gen;
  auto& m = c.network.model;
  auto& f = c.network.fusion;
  auto& q = c.network.qfm;
  auto& h = c.network.head;
  auto& t = c.train;
  return {
      count("gen.n_shots", g.n_shots),
      num("gen.p0", g.p0_true),
      num("gen.contrast", g.c_true),
      num("gen.theta_step", g.theta_step),
      num("gen.drift_amp", g.drift_amp),
      num("gen.drift_period", g.drift_period),
      num("gen.ar_coeff", g.ar_coeff),
      num("gen.noise_sigma", g.noise_sigma),
      num("gen.delta_offset", g.delta_offset),
      num("gen.rt_ramp", g.rt_ramp),
      num("gen.rt_offset", g.rt_offset),
      seed("gen.seed", g.seed),
      count("fringe.window_half_width", c.fringe.window_half_width),
      count("fringe.min_points", c.fringe.min_points),
      num("fringe.eps_amp", c.fringe.eps_amp),
      count("data.window_len", c.data.window_len),
      num("data.train_frac", c.data.train_frac),
      num("data.val_frac", c.data.val_frac),
      count("model.d_model", m.d_model),
      count("model.patch_len", m.patch_len),
      count("model.patch_stride", m.patch_stride),
      count("model.blocks_branch1", m.blocks_branch1),
      count("model.blocks_branch2", m.blocks_branch2),
      count("model.n_experts", m.n_experts),
      count("model.top_k", m.top_k),
      count("model.d_r", m.d_r),
      count("model.expert_hidden", m.expert_hidden),
      num("model.gamma_q", m.gamma_q),
      num("model.gamma_k", m.gamma_k),
      num("model.rope_base", m.rope_base),
      num("model.eps", m.eps),
      num("model.router_eps", m.router_eps),
      num("model.dropout", m.dropout),
      count("fusion.d_out", f.d_out),
      {"fusion.kernel_sizes", [&f](std::string_view v) { f.kernel_sizes = to_size_list("fusion.kernel_sizes", v); },
       [&f] { return join(f.kernel_sizes); }},
      count("fusion.reduction", f.reduction),
      {"fusion.variant", [&f](std::string_view v) { f.set_variant(trim(v)); }, [&f] { return f.variant(); }},
      count("qfm.n_qubits", q.n_qubits),
      count("qfm.depth", q.depth),
      count("qfm.n_heads", q.n_heads),
      count("qfm.d_q", q.d_q),
      count("qfm.post_hidden", q.post_hidden),
      num("qfm.norm_eps", q.norm_eps),
      num("qfm.norm_momentum", q.norm_momentum),
      {"qfm.norm_eval", [&q](std::string_view v) { q.norm_eval = qfm::norm_eval_from_string(trim(v)); },
       [&q] { return qfm::to_string(q.norm_eval); }},
      count("head.hidden", h.hidden),
      num("head.ln_eps", h.ln_eps),
      num("head.circle_eps", h.circle_eps),
      num("loss.lambda", c.loss.lambda),
      num("loss.eps", c.loss.eps),
      num("train.lr", t.lr),
      count("train.batch_size", t.batch_size),
      count("train.max_epochs", t.max_epochs),
      count("train.patience", t.patience),
      num("train.clip_norm", t.clip_norm),
      num("train.weight_decay", t.weight_decay),
      num("train.beta1", t.beta1),
      num("train.beta2", t.beta2),
      num("train.adam_eps", t.adam_eps),
      seed("train.seed", t.seed),
      {"sweep.windows", [&c](std::string_view v) { c.sweep.windows = to_size_list("sweep.windows", v); },
       [&c] { return join(c.sweep.windows); }},
      {"sweep.variants", [&c](std::string_view v) { c.sweep.variants = to_list(v); },
       [&c] { return join(c.sweep.variants); }},
      count("sweep.jobs", c.sweep.jobs),
  };
}

}  // namespace

void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  const std::string k = trim(key);
  for (auto& f : fields(cfg)) {
    if (f.key == k) {
      f.set(value);
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + k + "'");
}

void apply_override(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override must look like key=value, got '" + std::string(assignment) + "'");
  apply_setting(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

void parse_config(ExperimentConfig& cfg, std::istream& in) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(n) + ": expected key = value");
    try {
      apply_setting(cfg, std::string_view(t).substr(0, eq), std::string_view(t).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(n) + ": " + e.what());
    }
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  ExperimentConfig cfg;
  parse_config(cfg, in);
  return cfg;
}

std::string dump_config(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  std::ostringstream out;
  for (auto& f : fields(copy)) out << f.key << " = " << f.get() << "\n";
  return out.str();
}

std::vector<std::string> config_keys() {
  ExperimentConfig c;
  std::vector<std::string> keys;
  for (auto& f : fields(c)) keys.push_back(f.key);
  return keys;
}

}  // namespace barfiq
