#include "lqdemix/cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lqdemix/imaging.hpp"
#include "lqdemix/serialize.hpp"

namespace lqdemix::cli {

namespace {

const std::vector<std::string> kCommands = {"separate", "inpaint", "robust-cs", "grid", "phase"};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("invalid value '" + value + "' for " + key + ": expected a number");
  }
  return out;
}

long long parse_int(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("invalid value '" + value + "' for " + key + ": expected an integer");
  }
  return out;
}

std::uint64_t parse_seed(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("invalid value '" + value + "' for " + key + ": expected a nonnegative integer");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("invalid value '" + value + "' for " + key + ": expected true or false");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& part : split_list(value)) out.push_back(parse_double(key, part));
  return out;
}

std::vector<Index> parse_index_list(const std::string& key, const std::string& value) {
  std::vector<Index> out;
  for (const auto& part : split_list(value)) out.push_back(static_cast<Index>(parse_int(key, part)));
  return out;
}

std::optional<double> parse_auto_double(const std::string& key, const std::string& value) {
  if (trim(value) == "auto") return std::nullopt;
  return parse_double(key, value);
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += format_number(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

std::string auto_or(const std::optional<double>& v) { return v ? format_number(*v) : "auto"; }

struct Setting {
  std::string key;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table = [] {
    std::vector<Setting> s;
    auto add = [&](std::string key, std::string help, auto set, auto get) {
      s.push_back({std::move(key), std::move(help), set, get});
    };
    add("solver", "bcd|admm|mt-bcd|mt-admm|sadmm",
        [](RunConfig& c, const std::string& v) {
          try {
            c.solver = parse_solver_id(trim(v));
          } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("solver: ") + e.what());
          }
        },
        [](const RunConfig& c) { return std::string(to_string(c.solver)); });
    add("q1", "exponent of the x1 penalty, in [0, 1]",
        [](RunConfig& c, const std::string& v) { c.solver_cfg.q1 = parse_double("q1", v); },
        [](const RunConfig& c) { return format_number(c.solver_cfg.q1); });
    add("q2", "exponent of the x2 penalty, in [0, 1]",
        [](RunConfig& c, const std::string& v) { c.solver_cfg.q2 = parse_double("q2", v); },
        [](const RunConfig& c) { return format_number(c.solver_cfg.q2); });
    add("mu", "weight of the x1 penalty",
        [](RunConfig& c, const std::string& v) { c.solver_cfg.mu = parse_double("mu", v); },
        [](const RunConfig& c) { return format_number(c.solver_cfg.mu); });
    add("mu_grid", "comma-separated mu candidates; the lowest-RelErr one is used",
        [](RunConfig& c, const std::string& v) { c.mu_grid = parse_double_list("mu_grid", v); },
        [](const RunConfig& c) { return join(c.mu_grid); });
    add("beta_target", "final penalty parameter beta",
        [](RunConfig& c, const std::string& v) { c.solver_cfg.beta_target = parse_double("beta_target", v); },
        [](const RunConfig& c) { return format_number(c.solver_cfg.beta_target); });
    add("beta_start", "initial beta of the continuation",
        [](RunConfig& c, const std::string& v) { c.solver_cfg.beta_start = parse_double("beta_start", v); },
        [](const RunConfig& c) { return format_number(c.solver_cfg.beta_start); });
    add("beta_decay", "per-iteration beta decay factor, in (0, 1)",
        [](RunConfig& c, const std::string& v) { c.solver_cfg.beta_decay = parse_double("beta_decay", v); },
        [](const RunConfig& c) { return format_number(c.solver_cfg.beta_decay); });
    add("max_iters", "iteration limit",
        [](RunConfig& c, const std::string& v) {
          c.solver_cfg.max_iters = static_cast<int>(parse_int("max_iters", v));
        },
        [](const RunConfig& c) { return std::to_string(c.solver_cfg.max_iters); });
    add("tol", "iterate-gap tolerance",
        [](RunConfig& c, const std::string& v) { c.solver_cfg.tol = parse_double("tol", v); },
        [](const RunConfig& c) { return format_number(c.solver_cfg.tol); });
    add("eta1", "BCD proximal parameter for x1 (number or auto)",
        [](RunConfig& c, const std::string& v) { c.solver_cfg.eta1 = parse_auto_double("eta1", v); },
        [](const RunConfig& c) { return auto_or(c.solver_cfg.eta1); });
    add("eta2", "BCD proximal parameter for x2 (number or auto)",
        [](RunConfig& c, const std::string& v) { c.solver_cfg.eta2 = parse_auto_double("eta2", v); },
        [](const RunConfig& c) { return auto_or(c.solver_cfg.eta2); });
    add("rho1", "ADMM penalty for x1 (number or auto)",
        [](RunConfig& c, const std::string& v) { c.solver_cfg.rho1 = parse_auto_double("rho1", v); },
        [](const RunConfig& c) { return auto_or(c.solver_cfg.rho1); });
    add("rho2", "ADMM penalty for x2 (number or auto)",
        [](RunConfig& c, const std::string& v) { c.solver_cfg.rho2 = parse_auto_double("rho2", v); },
        [](const RunConfig& c) { return auto_or(c.solver_cfg.rho2); });
    add("sadmm_rho", "penalty of the two-block ADMM baseline",
        [](RunConfig& c, const std::string& v) { c.solver_cfg.sadmm_rho = parse_double("sadmm_rho", v); },
        [](const RunConfig& c) { return format_number(c.solver_cfg.sadmm_rho); });
    add("m", "number of measurements",
        [](RunConfig& c, const std::string& v) { c.spec.m = static_cast<Index>(parse_int("m", v)); },
        [](const RunConfig& c) { return std::to_string(c.spec.m); });
    add("n1", "length of x1",
        [](RunConfig& c, const std::string& v) { c.spec.n1 = static_cast<Index>(parse_int("n1", v)); },
        [](const RunConfig& c) { return std::to_string(c.spec.n1); });
    add("n2", "length of x2",
        [](RunConfig& c, const std::string& v) { c.spec.n2 = static_cast<Index>(parse_int("n2", v)); },
        [](const RunConfig& c) { return std::to_string(c.spec.n2); });
    add("k", "sparsity K of a single instance or grid cell",
        [](RunConfig& c, const std::string& v) { c.spec.sparsity_k = static_cast<Index>(parse_int("k", v)); },
        [](const RunConfig& c) { return std::to_string(c.spec.sparsity_k); });
    add("k_values", "comma-separated sparsity levels of the phase-transition sweep",
        [](RunConfig& c, const std::string& v) { c.k_values = parse_index_list("k_values", v); },
        [](const RunConfig& c) { return join(c.k_values); });
    add("a1", "operator kind of A1 (dct|idct|identity|gaussian-orthonormal)",
        [](RunConfig& c, const std::string& v) {
          try {
            c.spec.a1_kind = parse_operator_kind(trim(v));
          } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("a1: ") + e.what());
          }
        },
        [](const RunConfig& c) { return std::string(to_string(c.spec.a1_kind)); });
    add("a2", "operator kind of A2 (dct|idct|identity|gaussian-orthonormal)",
        [](RunConfig& c, const std::string& v) {
          try {
            c.spec.a2_kind = parse_operator_kind(trim(v));
          } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("a2: ") + e.what());
          }
        },
        [](const RunConfig& c) { return std::string(to_string(c.spec.a2_kind)); });
    add("noise", "none (x2 is K-sparse) or sas (x2 is symmetric alpha-stable noise)",
        [](RunConfig& c, const std::string& v) {
          const std::string t = trim(v);
          if (t == "none") {
            c.spec.noise.kind = NoiseModel::Kind::none;
          } else if (t == "sas") {
            c.spec.noise.kind = NoiseModel::Kind::sas;
          } else {
            throw ConfigError("invalid value '" + v + "' for noise: expected none or sas");
          }
        },
        [](const RunConfig& c) { return std::string(c.spec.noise.kind == NoiseModel::Kind::sas ? "sas" : "none"); });
    add("alpha", "characteristic exponent of the SaS noise, in (0, 2]",
        [](RunConfig& c, const std::string& v) { c.spec.noise.alpha = parse_double("alpha", v); },
        [](const RunConfig& c) { return format_number(c.spec.noise.alpha); });
    add("gamma", "scale of the SaS noise",
        [](RunConfig& c, const std::string& v) { c.spec.noise.gamma = parse_double("gamma", v); },
        [](const RunConfig& c) { return format_number(c.spec.noise.gamma); });
    add("fraction", "fraction of corrupted pixels (inpaint)",
        [](RunConfig& c, const std::string& v) { c.fraction = parse_double("fraction", v); },
        [](const RunConfig& c) { return format_number(c.fraction); });
    add("input", "input PGM/PPM image (inpaint)",
        [](RunConfig& c, const std::string& v) { c.input = trim(v); },
        [](const RunConfig& c) { return c.input; });
    add("joint", "recover all channels jointly (inpaint)",
        [](RunConfig& c, const std::string& v) { c.joint = parse_bool("joint", v); },
        [](const RunConfig& c) { return std::string(c.joint ? "true" : "false"); });
    add("q1_grid", "comma-separated q1 values (grid)",
        [](RunConfig& c, const std::string& v) { c.q1_grid = parse_double_list("q1_grid", v); },
        [](const RunConfig& c) { return join(c.q1_grid); });
    add("q2_grid", "comma-separated q2 values (grid)",
        [](RunConfig& c, const std::string& v) { c.q2_grid = parse_double_list("q2_grid", v); },
        [](const RunConfig& c) { return join(c.q2_grid); });
    add("robust_mode", "phase or grid (robust-cs)",
        [](RunConfig& c, const std::string& v) { c.robust_mode = trim(v); },
        [](const RunConfig& c) { return c.robust_mode; });
    add("trials", "independent trials per point",
        [](RunConfig& c, const std::string& v) { c.trials = static_cast<Index>(parse_int("trials", v)); },
        [](const RunConfig& c) { return std::to_string(c.trials); });
    add("seed", "base seed",
        [](RunConfig& c, const std::string& v) { c.spec.seed = parse_seed("seed", v); },
        [](const RunConfig& c) { return std::to_string(c.spec.seed); });
    add("out", "output directory",
        [](RunConfig& c, const std::string& v) { c.out = trim(v); },
        [](const RunConfig& c) { return c.out; });
    add("threads", "worker threads for independent trials (0 = all cores)",
        [](RunConfig& c, const std::string& v) {
          const long long t = parse_int("threads", v);
          if (t < 0) throw ConfigError("threads must be nonnegative");
          c.threads = static_cast<unsigned>(t);
        },
        [](const RunConfig& c) { return std::to_string(c.threads); });
    add("warm_start", "warm start nonconvex solves from the convex baseline",
        [](RunConfig& c, const std::string& v) { c.protocol.warm_start = parse_bool("warm_start", v); },
        [](const RunConfig& c) { return std::string(c.protocol.warm_start ? "true" : "false"); });
    add("warm_start_iters", "iterations of the warm-start solve",
        [](RunConfig& c, const std::string& v) {
          c.protocol.warm_start_iters = static_cast<int>(parse_int("warm_start_iters", v));
        },
        [](const RunConfig& c) { return std::to_string(c.protocol.warm_start_iters); });
    return s;
  }();
  return table;
}

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

void require_range(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void check_operator_shape(const std::string& name, OperatorKind kind, Index rows, Index cols) {
  const std::string shape = std::to_string(rows) + "x" + std::to_string(cols);
  switch (kind) {
    case OperatorKind::identity:
    case OperatorKind::dct:
    case OperatorKind::idct:
      require_range(rows == cols, name + " = " + std::string(to_string(kind)) + " needs a square shape, got " + shape);
      return;
    case OperatorKind::gaussian_orthonormal:
      require_range(rows <= cols, name + " = gaussian-orthonormal needs m <= columns, got " + shape);
      return;
    default:
      throw ConfigError(name + " = " + std::string(to_string(kind)) +
                        " is not available for synthetic instances (use dct|idct|identity|gaussian-orthonormal)");
  }
}

}  // namespace

void RunConfig::validate() const {
  require_range(std::find(kCommands.begin(), kCommands.end(), command) != kCommands.end(),
                "unknown command '" + command + "' (expected separate|inpaint|robust-cs|grid|phase)");
  const SolverConfig& s = solver_cfg;
  auto unit = [](double q) { return q >= 0.0 && q <= 1.0; };
  require_range(unit(s.q1), "q1 = " + format_number(s.q1) + " is outside the legal range [0, 1]");
  require_range(unit(s.q2), "q2 = " + format_number(s.q2) + " is outside the legal range [0, 1]");
  for (double q : q1_grid) require_range(unit(q), "q1_grid value " + format_number(q) + " is outside [0, 1]");
  for (double q : q2_grid) require_range(unit(q), "q2_grid value " + format_number(q) + " is outside [0, 1]");
  for (double mu : mu_grid) require_range(mu > 0.0, "mu_grid values must be positive");
  require_range(fraction >= 0.0 && fraction <= 1.0,
                "fraction = " + format_number(fraction) + " is outside the legal range [0, 1]");
  require_range(trials >= 1, "trials must be >= 1");
  require_range(robust_mode == "phase" || robust_mode == "grid", "robust_mode must be phase or grid");
  require_range(protocol.warm_start_iters >= 0, "warm_start_iters must be nonnegative");
  for (Index k : k_values) require_range(k >= 0, "k_values must be nonnegative");
  try {
    s.validate();
    if (command != "inpaint") spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (command == "inpaint") {
    require_range(!input.empty(), "inpaint needs an input image (--input)");
    require_range(!joint || is_multitask(solver), "joint inpainting needs solver mt-bcd or mt-admm");
    require_range(joint || !is_multitask(solver), "per-channel inpainting (joint = false) needs bcd, admm or sadmm");
  } else {
    check_operator_shape("a1", spec.a1_kind, spec.m, spec.n1);
    check_operator_shape("a2", spec.a2_kind, spec.m, spec.n2);
    require_range(!is_multitask(solver), "solver " + std::string(to_string(solver)) +
                                             " is multichannel; synthetic experiments use bcd|admm|sadmm");
  }
}

RunConfig defaults_for(const std::string& command) {
  RunConfig c;
  c.command = command;
  c.k_values = {5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
  c.q1_grid = {0.2, 0.5, 0.8, 1.0};
  c.q2_grid = {0.2, 0.5, 0.8, 1.0};
  if (command == "robust-cs") {
    c.spec.m = 100;
    c.spec.n1 = 256;
    c.spec.n2 = 100;
    c.spec.sparsity_k = 10;
    c.spec.a1_kind = OperatorKind::gaussian_orthonormal;
    c.spec.a2_kind = OperatorKind::identity;
    c.spec.noise = {NoiseModel::Kind::sas, 1.0, 1e-3};
    c.k_values = {5, 10, 15, 20, 25, 30, 35, 40};
    c.q1_grid = {0.2, 0.5, 0.8};
    c.q2_grid = {0.2, 0.5, 0.8};
  } else if (command == "inpaint") {
    c.solver = SolverId::multitask_bcd;
    c.solver_cfg.q1 = 0.7;
    c.solver_cfg.q2 = 0.4;
    c.solver_cfg.beta_start = kImageBetaStart;
  }
  return c;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "command") {
    cfg.command = trim(value);
    return;
  }
  for (const auto& s : settings()) {
    if (s.key == key) {
      s.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown setting '" + key + "'");
}

namespace {

std::vector<std::pair<std::string, std::string>> parse_lines(const std::string& text, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(number) + ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(number) + ": missing key");
    entries.emplace_back(key + "\n" + std::to_string(number), trim(line.substr(eq + 1)));
  }
  return entries;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source) {
  for (const auto& [tagged, value] : parse_lines(text, source)) {
    const auto nl = tagged.find('\n');
    const std::string key = tagged.substr(0, nl);
    const std::string line = tagged.substr(nl + 1);
    try {
      apply_setting(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + line + ": " + e.what());
    }
  }
}

RunConfig parse_config(const std::vector<std::string>& args) {
  CLI::App app{"Nonconvex lq sparse demixing experiments"};
  std::string command;
  std::string config_path;
  app.add_option("command", command, "separate|inpaint|robust-cs|grid|phase");
  app.add_option("--config", config_path, "flat key = value config file");
  std::map<std::string, std::string> flag_values;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  for (const auto& s : settings()) {
    options.emplace_back(s.key, app.add_option("--" + dashed(s.key), flag_values[s.key], s.help));
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw;
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }

  std::string file_text;
  if (!config_path.empty()) file_text = read_text(config_path);

  // The command picks the preset, so resolve it before anything else.
  std::string effective = command;
  if (effective.empty() && !file_text.empty()) {
    for (const auto& [tagged, value] : parse_lines(file_text, config_path)) {
      if (tagged.substr(0, tagged.find('\n')) == "command") effective = value;
    }
  }
  if (effective.empty()) effective = "separate";
  if (std::find(kCommands.begin(), kCommands.end(), effective) == kCommands.end()) {
    throw ConfigError("unknown command '" + effective + "' (expected separate|inpaint|robust-cs|grid|phase)");
  }

  RunConfig cfg = defaults_for(effective);
  if (!file_text.empty()) apply_config_text(cfg, file_text, config_path);
  cfg.command = effective;
  for (const auto& [key, option] : options) {
    if (option->count() > 0) apply_setting(cfg, key, flag_values[key]);
  }
  cfg.validate();
  return cfg;
}

std::string snapshot(const RunConfig& cfg) {
  std::string out = "command = " + cfg.command + "\n";
  for (const auto& s : settings()) out += s.key + " = " + s.get(cfg) + "\n";
  return out;
}

std::string artifact_stem(const RunConfig& cfg) {
  return cfg.command + "_" + std::string(to_string(cfg.solver)) + "_" + std::to_string(cfg.spec.seed);
}

namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

fs::path prepare_output(const RunConfig& cfg) {
  const fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + cfg.out + "'");
  write_file(dir / (artifact_stem(cfg) + ".cfg"), snapshot(cfg));
  return dir;
}

std::string phase_csv(const PhaseTransitionReport& report) {
  std::string csv = "k,trial,seed,relerr_x1,success,iterations,converged,failed\n";
  for (const auto& t : report.trials) {
    csv += std::to_string(t.k) + "," + std::to_string(t.trial) + "," + std::to_string(t.seed) + "," +
           format_number(t.relerr_x1) + "," + (t.success ? "1" : "0") + "," + std::to_string(t.iterations) + "," +
           (t.converged ? "1" : "0") + "," + (t.error.empty() ? "0" : "1") + "\n";
  }
  return csv;
}

std::string rates_csv(const PhaseTransitionReport& report) {
  std::string csv = "k,success_rate\n";
  for (std::size_t i = 0; i < report.k_values.size(); ++i) {
    csv += std::to_string(report.k_values[i]) + "," + format_number(report.success_rate[i]) + "\n";
  }
  return csv;
}

std::string grid_csv(const GridReport& report) {
  std::string csv = "q1,q2,mu,mean_relerr_db,success_rate,trials\n";
  for (std::size_t i = 0; i < report.q1_values.size(); ++i) {
    for (std::size_t j = 0; j < report.q2_values.size(); ++j) {
      const auto ri = static_cast<Index>(i);
      const auto rj = static_cast<Index>(j);
      csv += format_number(report.q1_values[i]) + "," + format_number(report.q2_values[j]) + "," +
             format_number(report.mu(ri, rj)) + "," + format_number(report.mean_relerr_db(ri, rj)) + "," +
             format_number(report.success_rate(ri, rj)) + "," + std::to_string(report.trials_per_cell) + "\n";
    }
  }
  return csv;
}

int run_phase(const RunConfig& cfg, const fs::path& dir, std::ostream& out) {
  const auto report = run_phase_transition(cfg.spec, cfg.solver, cfg.solver_cfg, cfg.k_values, cfg.trials,
                                           cfg.protocol, cfg.threads);
  const std::string stem = artifact_stem(cfg);
  write_file(dir / (stem + ".csv"), phase_csv(report));
  write_file(dir / (stem + "_rates.csv"), rates_csv(report));
  for (std::size_t i = 0; i < report.k_values.size(); ++i) {
    out << "K = " << report.k_values[i] << "  success rate = " << format_number(report.success_rate[i]) << "\n";
  }
  return kOk;
}

int run_grid(const RunConfig& cfg, const fs::path& dir, std::ostream& out) {
  const auto report = run_q_grid(cfg.spec, cfg.solver, cfg.solver_cfg, cfg.q1_grid, cfg.q2_grid, cfg.trials,
                                 cfg.mu_grid, cfg.protocol, cfg.threads);
  write_file(dir / (artifact_stem(cfg) + ".csv"), grid_csv(report));
  for (std::size_t i = 0; i < report.q1_values.size(); ++i) {
    for (std::size_t j = 0; j < report.q2_values.size(); ++j) {
      out << "q1 = " << format_number(report.q1_values[i]) << "  q2 = " << format_number(report.q2_values[j])
          << "  mean RelErr = "
          << format_number(report.mean_relerr_db(static_cast<Index>(i), static_cast<Index>(j))) << " dB\n";
    }
  }
  return kOk;
}

int run_separate(const RunConfig& cfg, const fs::path& dir, std::ostream& out) {
  const Index k = cfg.spec.sparsity_k;
  const SyntheticInstance inst = make_instance(cfg.spec, k, cfg.spec.seed);
  SolverConfig solver_cfg = cfg.solver_cfg;
  if (!cfg.mu_grid.empty()) {
    std::vector<double> errors;
    for (double mu : cfg.mu_grid) {
      SolverConfig trial = solver_cfg;
      trial.mu = mu;
      const SolveResult r = solve_with_protocol(cfg.solver, inst.problem, trial, cfg.protocol);
      errors.push_back(inst.x1.norm() == 0.0 ? r.x1.norm() : relerr(r.x1, inst.x1));
    }
    solver_cfg.mu = select_mu(cfg.mu_grid, errors);
  }
  const SolveResult r = solve_with_protocol(cfg.solver, inst.problem, solver_cfg, cfg.protocol);
  const double e1 = inst.x1.norm() == 0.0 ? r.x1.norm() : relerr(r.x1, inst.x1);
  const double e2 = inst.x2.norm() == 0.0 ? r.x2.norm() : relerr(r.x2, inst.x2);
  const double residual = r.residual_trace.empty() ? 0.0 : r.residual_trace.back();

  const std::string stem = artifact_stem(cfg);
  write_file(dir / (stem + ".csv"),
             "k,seed,mu,relerr_x1,relerr_x2,success,iterations,converged,residual\n" + std::to_string(k) + "," +
                 std::to_string(cfg.spec.seed) + "," + format_number(solver_cfg.mu) + "," + format_number(e1) + "," +
                 format_number(e2) + "," + (e1 <= kSuccessThreshold ? "1" : "0") + "," +
                 std::to_string(r.iterations) + "," + (r.converged ? "1" : "0") + "," + format_number(residual) +
                 "\n");
  write_file(dir / (stem + "_trace.json"), to_json(r));
  out << "RelErr(x1) = " << format_number(e1) << "  RelErr(x2) = " << format_number(e2)
      << "  iterations = " << r.iterations << (r.converged ? " (converged)" : " (not converged)") << "\n";
  for (const auto& w : r.warnings) out << "warning: " << w << "\n";
  return kOk;
}

int run_inpaint(const RunConfig& cfg, const fs::path& dir, std::ostream& out) {
  Image original;
  try {
    original = read_image(cfg.input);
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
  const Corruption corrupted = salt_pepper_corrupt(original, cfg.fraction, cfg.spec.seed);
  const InpaintTask task{corrupted.image, cfg.solver_cfg.q1, cfg.solver_cfg.q2, cfg.solver_cfg.mu, cfg.joint};
  InpaintResult result;
  try {
    result = inpaint(task, cfg.solver_cfg, cfg.solver, cfg.protocol);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  const LinearOperator dct = LinearOperator::dct2d(original.height, original.width);
  const Matrix truth = dct.apply(original.pixels);
  const double coef_err = truth.norm() == 0.0 ? result.coefficients.norm() : relerr(result.coefficients, truth);
  const double psnr_in = reported_psnr(psnr(corrupted.image, original));
  const double psnr_out = reported_psnr(psnr(result.restored, original));
  int iterations = 0;
  bool converged = true;
  for (const auto& r : result.results) {
    iterations += r.iterations;
    converged = converged && r.converged;
  }

  const std::string stem = artifact_stem(cfg);
  const std::string ext = original.channels == 1 ? ".pgm" : ".ppm";
  try {
    write_image(corrupted.image, dir / (stem + "_corrupted" + ext));
    write_image(result.restored, dir / (stem + "_restored" + ext));
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
  write_file(dir / (stem + ".csv"),
             "width,height,channels,corrupted,psnr_corrupted,psnr_restored,relerr_coefficients,iterations,"
             "converged\n" +
                 std::to_string(original.width) + "," + std::to_string(original.height) + "," +
                 std::to_string(original.channels) + "," + std::to_string(corrupted.corrupted_count()) + "," +
                 format_number(psnr_in) + "," + format_number(psnr_out) + "," + format_number(coef_err) + "," +
                 std::to_string(iterations) + "," + (converged ? "1" : "0") + "\n");

  nlohmann::json report;
  report["input"] = cfg.input;
  report["seed"] = cfg.spec.seed;
  report["solver"] = std::string(to_string(cfg.solver));
  report["joint"] = cfg.joint;
  report["fraction"] = cfg.fraction;
  report["q1"] = cfg.solver_cfg.q1;
  report["q2"] = cfg.solver_cfg.q2;
  report["mu"] = cfg.solver_cfg.mu;
  report["psnr_corrupted"] = psnr_in;
  report["psnr_restored"] = psnr_out;
  report["relerr_coefficients"] = coef_err;
  report["iterations"] = iterations;
  report["converged"] = converged;
  write_file(dir / (stem + "_report.json"), report.dump(1) + "\n");

  out << "PSNR corrupted = " << format_number(psnr_in) << " dB  restored = " << format_number(psnr_out)
      << " dB  RelErr(DCT) = " << format_number(coef_err) << "\n";
  return kOk;
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    cfg.validate();
    const fs::path dir = prepare_output(cfg);
    if (cfg.command == "separate") return run_separate(cfg, dir, out);
    if (cfg.command == "phase") return run_phase(cfg, dir, out);
    if (cfg.command == "grid") return run_grid(cfg, dir, out);
    if (cfg.command == "robust-cs") {
      return cfg.robust_mode == "grid" ? run_grid(cfg, dir, out) : run_phase(cfg, dir, out);
    }
    return run_inpaint(cfg, dir, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    err << "solver error: " << e.what() << "\n";
    return kSolverError;
  }
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = parse_config(args);
  } catch (const CLI::CallForHelp&) {
    out << "usage: demix [separate|inpaint|robust-cs|grid|phase] [--config FILE] [--key value ...]\n\nsettings:\n";
    for (const auto& s : settings()) out << "  --" << dashed(s.key) << "  " << s.help << "\n";
    return kOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  }
  return run(cfg, out, err);
}

}  // namespace lqdemix::cli
