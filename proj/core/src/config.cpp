#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "l2gd/errors.hpp"
#include "l2gd/harness.hpp"

namespace l2gd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\"'");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\"'");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ConfigError("invalid number for " + key + ": '" + text + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    // Allow scientific notation for large integers, e.g. 1e6.
    const double d = to_double(key, t);
    if (d < 0 || d != std::floor(d) || d > 1.8e19) throw ConfigError("invalid integer for " + key + ": '" + text + "'");
    return static_cast<std::uint64_t>(d);
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string t = lower(trim(text));
  if (t == "true" || t == "on" || t == "yes" || t == "1") return true;
  if (t == "false" || t == "off" || t == "no" || t == "0") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + text + "'");
}

std::vector<double> to_grid(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::string cur;
  const auto flush = [&] {
    const std::string t = trim(cur);
    if (!t.empty()) out.push_back(to_double(key, t));
    cur.clear();
  };
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '[' || c == ']' || c == ';') {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_grid(const std::vector<double>& g) {
  std::string out;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (k) out += ",";
    out += fmt_double(g[k]);
  }
  return out;
}

const std::vector<std::pair<std::string, std::vector<std::string>>>& known_keys() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> keys = {
      {"data", {"dataset", "devices", "split", "ridge", "smoothness", "quadratic_dim"}},
      {"solver",
       {"variant", "lambda", "p", "alpha", "max_iters", "seed", "jacobian_rule", "participation", "minibatch",
        "lsvrg_rho"}},
      {"experiment",
       {"target_rel_subopt", "record_every", "reference_tol", "reference", "cache_dir", "p_grid", "lambda_grid",
        "run_to_budget"}},
  };
  return keys;
}

}  // namespace

void set_config_value(ExperimentConfig& c, const std::string& section_in, const std::string& key_in,
                      const std::string& value) {
  const std::string key = lower(trim(key_in));
  std::string section = lower(trim(section_in));
  if (section.empty()) {
    for (const auto& [s, names] : known_keys()) {
      if (std::find(names.begin(), names.end(), key) != names.end()) section = s;
    }
  }
  const std::string full = section + "." + key;
  const std::string v = trim(value);
  if (full == "data.dataset") {
    c.dataset = v;
  } else if (full == "data.devices") {
    c.devices = static_cast<Index>(to_u64(full, v));
  } else if (full == "data.split") {
    c.split = parse_split_mode(v);
  } else if (full == "data.ridge") {
    c.ridge = to_double(full, v);
  } else if (full == "data.smoothness") {
    c.smoothness = to_double(full, v);
  } else if (full == "data.quadratic_dim") {
    c.quadratic_dim = static_cast<Index>(to_u64(full, v));
  } else if (full == "solver.variant") {
    c.variant = parse_variant(v);
  } else if (full == "solver.lambda") {
    c.lambda = to_double(full, v);
  } else if (full == "solver.p") {
    c.p = to_double(full, v);
  } else if (full == "solver.alpha") {
    if (lower(v) == "theory" || v.empty()) {
      c.alpha.reset();
    } else {
      c.alpha = to_double(full, v);
    }
  } else if (full == "solver.max_iters") {
    c.max_iters = to_u64(full, v);
  } else if (full == "solver.seed") {
    if (lower(v) == "none" || v.empty()) {
      c.seed.reset();
    } else {
      c.seed = to_u64(full, v);
    }
  } else if (full == "solver.jacobian_rule") {
    c.jacobian_rule = parse_jacobian_rule(v);
  } else if (full == "solver.participation") {
    c.participation = to_double(full, v);
  } else if (full == "solver.minibatch") {
    c.minibatch = static_cast<std::size_t>(to_u64(full, v));
  } else if (full == "solver.lsvrg_rho") {
    if (lower(v) == "auto" || v.empty()) {
      c.lsvrg_rho.reset();
    } else {
      c.lsvrg_rho = to_double(full, v);
    }
  } else if (full == "experiment.target_rel_subopt") {
    c.target_rel_subopt = to_double(full, v);
  } else if (full == "experiment.record_every") {
    c.record_every = to_u64(full, v);
  } else if (full == "experiment.reference_tol") {
    c.reference_tol = to_double(full, v);
  } else if (full == "experiment.reference") {
    c.reference = to_bool(full, v);
  } else if (full == "experiment.cache_dir") {
    c.cache_dir = v;
  } else if (full == "experiment.p_grid") {
    c.p_grid = to_grid(full, value);
  } else if (full == "experiment.lambda_grid") {
    c.lambda_grid = to_grid(full, value);
  } else if (full == "experiment.run_to_budget") {
    c.run_to_budget = to_bool(full, v);
  } else {
    throw ConfigError("unknown configuration key '" + (section_in.empty() ? key_in : section_in + "." + key_in) + "'");
  }
}

ExperimentConfig parse_experiment_config(std::istream& in) {
  ExperimentConfig c;
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (item.parents.size() > 1) throw ConfigError("nested sections are not supported: " + item.fullname());
    std::string value;
    for (std::size_t k = 0; k < item.inputs.size(); ++k) {
      if (k) value += ",";
      value += item.inputs[k];
    }
    set_config_value(c, item.parents.empty() ? std::string() : item.parents.front(), item.name, value);
  }
  validate_experiment_config(c);
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file " + path.string());
  return parse_experiment_config(in);
}

void validate_experiment_config(const ExperimentConfig& c) {
  if (c.dataset.empty()) throw ConfigError("data.dataset is empty");
  if (c.devices < 1) throw ConfigError("data.devices must be at least 1");
  if (!(c.ridge >= 0.0)) throw ConfigError("data.ridge must be non-negative");
  if (!(c.smoothness > 0.0)) throw ConfigError("data.smoothness must be positive");
  if (c.quadratic_dim < 1) throw ConfigError("data.quadratic_dim must be at least 1");
  if (!(c.lambda >= 0.0)) throw ConfigError("solver.lambda must be non-negative");
  if (!(c.p > 0.0 && c.p < 1.0)) throw ConfigError("solver.p must lie in (0, 1)");
  if (c.alpha && !(*c.alpha > 0.0)) throw ConfigError("solver.alpha must be positive");
  if (!(c.participation > 0.0 && c.participation <= 1.0)) throw ConfigError("solver.participation must lie in (0, 1]");
  if (c.minibatch < 1) throw ConfigError("solver.minibatch must be at least 1");
  if (c.lsvrg_rho && !(*c.lsvrg_rho > 0.0 && *c.lsvrg_rho <= 1.0)) throw ConfigError("solver.lsvrg_rho must lie in (0, 1]");
  if (!(c.target_rel_subopt > 0.0 && c.target_rel_subopt < 1.0)) {
    throw ConfigError("experiment.target_rel_subopt must lie in (0, 1)");
  }
  if (!(c.reference_tol > 0.0)) throw ConfigError("experiment.reference_tol must be positive");
  for (double p : c.p_grid) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("experiment.p_grid values must lie in (0, 1)");
  }
  for (double l : c.lambda_grid) {
    if (!(l > 0.0)) throw ConfigError("experiment.lambda_grid values must be positive");
  }
}

void write_experiment_config(std::ostream& out, const ExperimentConfig& c) {
  out << "[data]\n";
  out << "dataset = " << c.dataset << "\n";
  out << "devices = " << c.devices << "\n";
  out << "split = " << to_string(c.split) << "\n";
  out << "ridge = " << fmt_double(c.ridge) << "\n";
  out << "smoothness = " << fmt_double(c.smoothness) << "\n";
  out << "quadratic_dim = " << c.quadratic_dim << "\n";
  out << "\n[solver]\n";
  out << "variant = " << to_string(c.variant) << "\n";
  out << "lambda = " << fmt_double(c.lambda) << "\n";
  out << "p = " << fmt_double(c.p) << "\n";
  out << "alpha = " << (c.alpha ? fmt_double(*c.alpha) : std::string("theory")) << "\n";
  out << "max_iters = " << c.max_iters << "\n";
  out << "seed = " << (c.seed ? std::to_string(*c.seed) : std::string("none")) << "\n";
  out << "jacobian_rule = " << to_string(c.jacobian_rule) << "\n";
  out << "participation = " << fmt_double(c.participation) << "\n";
  out << "minibatch = " << c.minibatch << "\n";
  out << "lsvrg_rho = " << (c.lsvrg_rho ? fmt_double(*c.lsvrg_rho) : std::string("auto")) << "\n";
  out << "\n[experiment]\n";
  out << "target_rel_subopt = " << fmt_double(c.target_rel_subopt) << "\n";
  out << "record_every = " << c.record_every << "\n";
  out << "reference_tol = " << fmt_double(c.reference_tol) << "\n";
  out << "reference = " << (c.reference ? "true" : "false") << "\n";
  out << "cache_dir = " << c.cache_dir << "\n";
  out << "p_grid = \"" << fmt_grid(c.p_grid) << "\"\n";
  out << "lambda_grid = \"" << fmt_grid(c.lambda_grid) << "\"\n";
  out << "run_to_budget = " << (c.run_to_budget ? "true" : "false") << "\n";
}

}  // namespace l2gd
