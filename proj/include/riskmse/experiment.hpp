#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "riskmse/models/exp_noise.hpp"
#include "riskmse/models/gaussian.hpp"
#include "riskmse/models/hidden.hpp"
#include "riskmse/models/lognormal_mult.hpp"
#include "riskmse/models/sample_file.hpp"
#include "riskmse/skewness.hpp"
#include "riskmse/tradeoff.hpp"
#include "riskmse/version.hpp"

namespace riskmse {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Experiment configuration: a flat description of one run, fillable from an
// INI-style config file and overridable by command-line flags.

struct SweepSpec {
  std::string param;
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
  bool log_spaced = false;

  std::vector<double> values() const {
    std::vector<double> v;
    if (count == 1) {
      v.push_back(lo);
      return v;
    }
    for (int i = 0; i < count; ++i) {
      const double t = static_cast<double>(i) / (count - 1);
      v.push_back(log_spaced ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t);
    }
    return v;
  }
};

struct ExperimentConfig {
  std::string command;
  std::string model_name;
  std::map<std::string, std::string> model_params;
  long samples = 20000;
  std::uint64_t seed = 1;
  double mu_lo = 1e-4;
  double mu_hi = 1e4;
  int mu_count = 60;
  double quantile = 0.001;
  std::optional<double> rho_max;
  std::optional<double> rho_min;
  double eps = 0.1;
  std::optional<SweepSpec> sweep;
  std::vector<std::string> probes;
  std::string out_dir = ".";
  bool gnuplot = false;
  int threads = 1;

  std::vector<double> mu_grid() const { return log_mu_grid(mu_lo, mu_hi, mu_count); }
};

namespace experiment_detail {

inline std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": cannot parse number from '" + text + "'");
  }
}

inline long parse_long(const std::string& text, const std::string& what) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": cannot parse integer from '" + text + "'");
  }
}

inline std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

inline Vec parse_double_list(const std::string& text, const std::string& what) {
  Vec out;
  for (const std::string& p : split(text, ',')) out.push_back(parse_double(trim(p), what));
  return out;
}

}  // namespace experiment_detail

// Sweep grammar: param=lo:hi:count or param=lo:hi:count:log.
inline SweepSpec parse_sweep_spec(const std::string& text) {
  using experiment_detail::parse_double;
  using experiment_detail::parse_long;
  using experiment_detail::split;
  using experiment_detail::trim;
  const std::size_t eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("sweep: expected param=lo:hi:count, got '" + text + "'");
  SweepSpec s;
  s.param = trim(text.substr(0, eq));
  const auto parts = split(text.substr(eq + 1), ':');
  if (parts.size() != 3 && parts.size() != 4)
    throw ConfigError("sweep: expected lo:hi:count or lo:hi:count:log in '" + text + "'");
  s.lo = parse_double(trim(parts[0]), "sweep lo");
  s.hi = parse_double(trim(parts[1]), "sweep hi");
  s.count = static_cast<int>(parse_long(trim(parts[2]), "sweep count"));
  if (parts.size() == 4) {
    const std::string mode = trim(parts[3]);
    if (mode == "log")
      s.log_spaced = true;
    else if (mode != "lin")
      throw ConfigError("sweep: spacing must be 'lin' or 'log', got '" + mode + "'");
  }
  if (s.count < 1) throw ConfigError("sweep: count must be >= 1");
  if (s.count > 1 && !(s.hi > s.lo)) throw ConfigError("sweep: need hi > lo");
  if (s.log_spaced && !(s.lo > 0.0)) throw ConfigError("sweep: log spacing needs lo > 0");
  return s;
}

// Grid flag grammar: lo:hi:count, log-spaced, with 0 and inf always appended.
inline void parse_mu_grid_spec(const std::string& text, ExperimentConfig& cfg) {
  using experiment_detail::parse_double;
  using experiment_detail::parse_long;
  const auto parts = experiment_detail::split(text, ':');
  if (parts.size() != 3) throw ConfigError("mu-grid: expected lo:hi:count, got '" + text + "'");
  cfg.mu_lo = parse_double(experiment_detail::trim(parts[0]), "mu-grid lo");
  cfg.mu_hi = parse_double(experiment_detail::trim(parts[1]), "mu-grid hi");
  cfg.mu_count = static_cast<int>(parse_long(experiment_detail::trim(parts[2]), "mu-grid count"));
  if (!(cfg.mu_lo > 0.0) || !(cfg.mu_hi > cfg.mu_lo) || cfg.mu_count < 2)
    throw ConfigError("mu-grid: need 0 < lo < hi and count >= 2");
}

// ---------------------------------------------------------------------------
// Config file: flat key=value lines under [section] headers. Sections are
// model, run, and output. Unknown sections or keys are rejected; keys in
// [model] other than 'name' pass through as model parameters (the model
// factory rejects names it does not know).

inline void apply_config_file(const std::string& path, ExperimentConfig& cfg) {
  using experiment_detail::parse_double;
  using experiment_detail::parse_long;
  using experiment_detail::trim;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string where = path + ":" + std::to_string(lineno);
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(where + ": malformed section header '" + t + "'");
      section = trim(t.substr(1, t.size() - 2));
      if (section != "model" && section != "run" && section != "output")
        throw ConfigError(where + ": unknown section '" + section + "'");
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value, got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    if (section == "model") {
      if (key == "name")
        cfg.model_name = val;
      else
        cfg.model_params[key] = val;
    } else if (section == "run") {
      if (key == "samples")
        cfg.samples = parse_long(val, where);
      else if (key == "seed")
        cfg.seed = static_cast<std::uint64_t>(parse_long(val, where));
      else if (key == "threads")
        cfg.threads = static_cast<int>(parse_long(val, where));
      else if (key == "mu_grid")
        parse_mu_grid_spec(val, cfg);
      else if (key == "quantile")
        cfg.quantile = parse_double(val, where);
      else if (key == "rho_max")
        cfg.rho_max = parse_double(val, where);
      else if (key == "rho_min")
        cfg.rho_min = parse_double(val, where);
      else if (key == "eps")
        cfg.eps = parse_double(val, where);
      else if (key == "sweep")
        cfg.sweep = parse_sweep_spec(val);
      else if (key == "probe")
        cfg.probes.push_back(val);
      else
        throw ConfigError(where + ": unknown key '" + key + "' in [run]");
    } else if (section == "output") {
      if (key == "dir")
        cfg.out_dir = val;
      else if (key == "gnuplot")
        cfg.gnuplot = (val == "true" || val == "1" || val == "yes");
      else
        throw ConfigError(where + ": unknown key '" + key + "' in [output]");
    } else {
      throw ConfigError(where + ": key '" + key + "' outside any section");
    }
  }
}

// ---------------------------------------------------------------------------
// Model registry.

inline std::vector<std::string> model_names() {
  return {"gaussian",        "exp_noise",       "lognormal_mult",
          "gamma_hidden",    "lognormal_hidden", "uniform_hidden",
          "sample_file"};
}

inline GenerativeModel make_model(const std::string& name,
                                  std::map<std::string, std::string> params) {
  using experiment_detail::parse_double;
  using experiment_detail::parse_double_list;
  using experiment_detail::parse_long;
  const auto take = [&params](const char* key) -> std::optional<std::string> {
    auto it = params.find(key);
    if (it == params.end()) return std::nullopt;
    std::string v = it->second;
    params.erase(it);
    return v;
  };
  const auto take_double = [&](const char* key, double fallback) {
    auto v = take(key);
    return v ? parse_double(*v, std::string("parameter ") + key) : fallback;
  };
  const auto take_list = [&](const char* key, Vec fallback) {
    auto v = take(key);
    return v ? parse_double_list(*v, std::string("parameter ") + key) : fallback;
  };
  const auto finish = [&params, &name]() {
    if (!params.empty())
      throw ConfigError("unknown parameter '" + params.begin()->first + "' for model '" + name +
                        "'");
  };
  const auto broadcast = [](Vec v, std::size_t n, const char* key) {
    if (v.size() == 1 && n > 1) v.assign(n, v[0]);
    if (v.size() != n)
      throw ConfigError(std::string("parameter ") + key + ": length mismatch");
    return v;
  };

  if (name == "gaussian") {
    const auto dim_text = take("dim");
    const int dim = static_cast<int>(dim_text ? parse_long(*dim_text, "dim") : 1);
    const double prior_var = take_double("prior_var", 1.0);
    const double noise_var = take_double("noise_var", 1.0);
    const double obs_scale = take_double("obs_scale", 1.0);
    finish();
    return make_gaussian(dim, prior_var, noise_var, obs_scale);
  }
  if (name == "exp_noise") {
    const double x_mean = take_double("x_mean", 2.0);
    const double noise_factor = take_double("noise_factor", 3.0);
    finish();
    return make_exp_noise(x_mean, noise_factor);
  }
  if (name == "lognormal_mult") {
    const double s_x = take_double("s_x", 1.0);
    const double s_w = take_double("s_w", 0.25);
    finish();
    return make_lognormal_mult(s_x, s_w);
  }
  if (name == "gamma_hidden") {
    Vec kappa = take_list("kappa", Vec{1.0});
    Vec theta = broadcast(take_list("theta", Vec{1.0}), kappa.size(), "theta");
    finish();
    return make_gamma_hidden(kappa, theta);
  }
  if (name == "lognormal_hidden") {
    Vec lm = take_list("log_mean", Vec{0.0});
    Vec lv = broadcast(take_list("log_var", Vec{1.0}), lm.size(), "log_var");
    finish();
    return make_lognormal_hidden(lm, lv);
  }
  if (name == "uniform_hidden") {
    Vec lo = take_list("lo", Vec{0.0});
    Vec hi = broadcast(take_list("hi", Vec{1.0}), lo.size(), "hi");
    finish();
    return make_uniform_hidden(lo, hi);
  }
  if (name == "sample_file") {
    auto path = take("path");
    if (!path) throw ConfigError("model sample_file: parameter 'path' is required");
    const auto bins_text = take("bins");
    const int bins = static_cast<int>(bins_text ? parse_long(*bins_text, "bins") : 64);
    finish();
    return make_sample_file(*path, bins);
  }
  std::string known;
  for (const auto& n : model_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown model '" + name + "' (known: " + known + ")");
}

inline GenerativeModel make_model(const ExperimentConfig& cfg) {
  if (cfg.model_name.empty()) throw ConfigError("no model given (--model or [model] name)");
  return make_model(cfg.model_name, cfg.model_params);
}

// ---------------------------------------------------------------------------
// Probe grammar: mean | const(c) | affine(a,b) | mix(t).

struct ProbeSpec {
  std::string name;
  EstimatorFn fn;
};

inline ProbeSpec parse_probe(const std::string& text) {
  using experiment_detail::parse_double;
  using experiment_detail::split;
  using experiment_detail::trim;
  const std::string t = trim(text);
  if (t == "mean") return {"mean", estimator_conditional_mean()};
  const std::size_t open = t.find('(');
  if (open == std::string::npos || t.back() != ')')
    throw ConfigError("probe: cannot parse '" + text +
                      "' (expected mean, const(c), affine(a,b), or mix(t))");
  const std::string head = trim(t.substr(0, open));
  const std::string inner = t.substr(open + 1, t.size() - open - 2);
  const auto args = split(inner, ',');
  if (head == "const") {
    if (args.size() != 1) throw ConfigError("probe const: expected one argument in '" + text + "'");
    const double c = parse_double(trim(args[0]), "probe const");
    return {t, estimator_constant(Vec{c})};
  }
  if (head == "affine") {
    if (args.size() != 2)
      throw ConfigError("probe affine: expected two arguments in '" + text + "'");
    const double a = parse_double(trim(args[0]), "probe affine scale");
    const double b = parse_double(trim(args[1]), "probe affine shift");
    return {t, estimator_affine(a, b)};
  }
  if (head == "mix") {
    if (args.size() != 1) throw ConfigError("probe mix: expected one argument in '" + text + "'");
    const double w = parse_double(trim(args[0]), "probe mix");
    if (w < 0.0 || w > 1.0) throw ConfigError("probe mix: weight must lie in [0, 1]");
    return {t, estimator_mix(w)};
  }
  throw ConfigError("probe: unknown form '" + head + "' in '" + text + "'");
}

// ---------------------------------------------------------------------------
// Run manifest and deterministic file output. The manifest hash covers the
// experiment identity (config echo and toolkit version); execution details
// that must not change results (thread count, output paths) are excluded, so
// reruns of one experiment produce byte-identical files. Wall time is
// reported on the console only, for the same reason.

inline std::uint64_t fnv1a_hash(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// JSON value for a risk weight: numbers for finite, the string "inf" for the
// endpoint (JSON has no infinity literal).
inline ordered_json json_mu(double mu) {
  if (std::isinf(mu)) return "inf";
  return mu;
}

struct RunManifest {
  ordered_json config_echo;
  std::string version = kVersion;
  std::size_t n_samples = 0;
  std::size_t n_failed = 0;

  std::string hash() const {
    ordered_json key;
    key["config"] = config_echo;
    key["version"] = version;
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a_hash(key.dump())));
    return buf;
  }

  ordered_json to_json() const {
    ordered_json j;
    j["hash"] = hash();
    j["version"] = version;
    j["config"] = config_echo;
    j["samples_requested"] = n_samples;
    j["samples_failed"] = n_failed;
    return j;
  }
};

inline ordered_json config_echo(const ExperimentConfig& cfg) {
  ordered_json j;
  j["command"] = cfg.command;
  j["model"] = cfg.model_name;
  ordered_json params = ordered_json::object();
  for (const auto& [k, v] : cfg.model_params) params[k] = v;
  j["params"] = params;
  j["samples"] = cfg.samples;
  j["seed"] = cfg.seed;
  j["mu_grid"] = format_g(cfg.mu_lo) + ":" + format_g(cfg.mu_hi) + ":" +
                 std::to_string(cfg.mu_count);
  j["quantile"] = cfg.quantile;
  if (cfg.rho_max) j["rho_max"] = *cfg.rho_max;
  if (cfg.rho_min) j["rho_min"] = *cfg.rho_min;
  if (cfg.command == "margin") j["eps"] = cfg.eps;
  if (cfg.sweep) {
    j["sweep"] = cfg.sweep->param + "=" + format_g(cfg.sweep->lo) + ":" +
                 format_g(cfg.sweep->hi) + ":" + std::to_string(cfg.sweep->count) +
                 (cfg.sweep->log_spaced ? ":log" : "");
  }
  if (!cfg.probes.empty()) j["probes"] = cfg.probes;
  return j;
}

class OutputSet {
 public:
  explicit OutputSet(const std::string& dir) : dir_(dir) {
    std::filesystem::create_directories(dir_);
  }

  std::string path_of(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& content) {
    const std::string p = path_of(name);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot open output file '" + p + "'");
    out << content;
    out.flush();
    if (!out) {
      out.close();
      discard();
      throw IoError("failed writing output file '" + p + "'");
    }
    written_.push_back(p);
  }

  void discard() {
    std::error_code ec;
    for (const std::string& p : written_) std::filesystem::remove(p, ec);
    written_.clear();
  }

  const std::vector<std::string>& written() const { return written_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> written_;
};

inline std::string csv_table(const std::string& manifest_hash,
                             const std::vector<std::string>& header,
                             const std::vector<std::vector<std::string>>& rows) {
  std::string out = "# manifest " + manifest_hash + "\n";
  for (std::size_t i = 0; i < header.size(); ++i)
    out += (i ? "," : "") + header[i];
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Command runners. Each builds the posterior cache once, computes its
// report, writes files, prints one line per invariant check, and returns a
// process exit code (0 iff everything requested passed).

namespace experiment_detail {

inline PosteriorCache build_cache(const GenerativeModel& model, const ExperimentConfig& cfg,
                                  RunManifest& manifest) {
  const ObservationBatch batch = sample_observations(model, cfg.samples, cfg.seed);
  PosteriorCache cache = PosteriorCache::build(model, batch, cfg.threads);
  manifest.n_samples = batch.obs.size();
  manifest.n_failed = cache.n_failed();
  return cache;
}

inline bool check_line(std::ostream& os, const std::string& name, bool ok,
                       const std::string& detail = "") {
  os << "check " << name << ": " << (ok ? "PASS" : "FAIL");
  if (!detail.empty()) os << " (" << detail << ")";
  os << "\n";
  return ok;
}

inline bool check_failure_rate(std::ostream& os, const PosteriorCache& cache) {
  const double rate = cache.failure_rate();
  const bool ok = rate <= 1e-3;
  std::string detail = format_g(100.0 * rate) + "% of samples failed";
  if (!cache.failure_messages().empty()) detail += "; first: " + cache.failure_messages()[0];
  return check_line(os, "failure_rate", ok, detail);
}

struct CurveChecks {
  bool monotone = true;
  bool above_anchor = true;
};

inline CurveChecks run_curve_checks(const FrontierCurve& curve) {
  CurveChecks c;
  for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
    const MeanSe dm = paired_difference(curve.mse_summands[i + 1], curve.mse_summands[i]);
    const MeanSe ds = paired_difference(curve.sev_summands[i + 1], curve.sev_summands[i]);
    if (dm.mean < -3.0 * dm.std_error - 1e-10) c.monotone = false;
    if (ds.mean > 3.0 * ds.std_error + 1e-10) c.monotone = false;
  }
  const double se = std::sqrt(curve.h_std_error * curve.h_std_error +
                              curve.anchor_std_error * curve.anchor_std_error);
  c.above_anchor = curve.h_value >= curve.anchor - 3.0 * se - 1e-12;
  return c;
}

}  // namespace experiment_detail

inline int run_frontier(const ExperimentConfig& cfg, std::ostream& os) {
  const auto t0 = std::chrono::steady_clock::now();
  const GenerativeModel model = make_model(cfg);
  RunManifest manifest;
  manifest.config_echo = config_echo(cfg);
  const PosteriorCache cache = experiment_detail::build_cache(model, cfg, manifest);
  const FrontierCurve curve = frontier_scan(cache, cfg.mu_grid(), true, true);

  double mse_min = curve.points.front().mse.value, sev_min = curve.points.front().sev.value;
  for (const FrontierPoint& p : curve.points) {
    mse_min = std::min(mse_min, p.mse.value);
    sev_min = std::min(sev_min, p.sev.value);
  }
  std::vector<std::vector<std::string>> rows;
  for (const FrontierPoint& p : curve.points) {
    const double mn = p.mse.value / mse_min, sn = p.sev.value / sev_min;
    rows.push_back({format_g(p.mu), format_g(p.mse.value), format_g(p.mse.std_error),
                    format_g(p.sev.value), format_g(p.sev.std_error), format_g(p.product),
                    format_g(p.product_std_error), format_g(mn), format_g(sn),
                    format_g(mn * sn)});
  }

  const auto checks = experiment_detail::run_curve_checks(curve);
  bool ok = experiment_detail::check_line(os, "monotonicity", checks.monotone);
  ok &= experiment_detail::check_line(os, "h_above_anchor", checks.above_anchor,
                                      "h=" + format_g(curve.h_value) +
                                          " anchor=" + format_g(curve.anchor));
  ok &= experiment_detail::check_failure_rate(os, cache);

  ordered_json j;
  j["manifest"] = manifest.to_json();
  j["h_value"] = curve.h_value;
  j["h_std_error"] = curve.h_std_error;
  j["mu_star"] = json_mu(curve.mu_star);
  j["anchor"] = curve.anchor;
  j["anchor_std_error"] = curve.anchor_std_error;
  j["mse_min"] = mse_min;
  j["sev_min"] = sev_min;
  j["checks"]["monotonicity"] = checks.monotone;
  j["checks"]["h_above_anchor"] = checks.above_anchor;
  j["checks"]["failure_rate_ok"] = cache.failure_rate() <= 1e-3;

  OutputSet out(cfg.out_dir);
  try {
    out.write("frontier.csv",
              csv_table(manifest.hash(),
                        {"mu", "mse", "mse_se", "sev", "sev_se", "product", "product_se",
                         "mse_norm", "sev_norm", "product_norm"},
                        rows));
    out.write("frontier.json", j.dump(2) + "\n");
    if (cfg.gnuplot) {
      std::string gp;
      gp += "set datafile separator ','\n";
      gp += "set logscale x\n";
      gp += "set xlabel 'mu'\n";
      gp += "set key left top\n";
      gp += "plot 'frontier.csv' skip 2 using 1:8 with lines title 'mse (normalized)', \\\n";
      gp += "     'frontier.csv' skip 2 using 1:9 with lines title 'sev (normalized)', \\\n";
      gp += "     'frontier.csv' skip 2 using 1:10 with lines title 'product'\n";
      out.write("frontier.gp", gp);
    }
  } catch (...) {
    out.discard();
    throw;
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  os << "frontier: h=" << format_g(curve.h_value) << " mu_star=" << format_g(curve.mu_star)
     << " anchor=" << format_g(curve.anchor) << " wall=" << format_g(secs) << "s\n";
  return ok ? 0 : 1;
}

inline int run_margin(const ExperimentConfig& cfg, std::ostream& os) {
  const auto t0 = std::chrono::steady_clock::now();
  const GenerativeModel model = make_model(cfg);
  RunManifest manifest;
  manifest.config_echo = config_echo(cfg);
  const PosteriorCache cache = experiment_detail::build_cache(model, cfg, manifest);
  const MarginReport rep = margin_report(cache, cfg.quantile, cfg.rho_max, cfg.rho_min);
  const FrontierCurve curve = frontier_scan(cache, cfg.mu_grid(), true, true);

  bool ok = true;
  {
    const double lo = rep.e_lower.value - 3.0 * rep.e_lower.std_error -
                      3.0 * rep.expected_margin.std_error - 1e-12;
    const double hi = rep.e_upper.value + 3.0 * rep.e_upper.std_error +
                      3.0 * rep.expected_margin.std_error + 1e-12;
    const bool sandwich = rep.expected_margin.value >= lo && rep.expected_margin.value <= hi;
    ok &= experiment_detail::check_line(os, "margin_sandwich", sandwich,
                                        format_g(rep.e_lower.value) + " <= " +
                                            format_g(rep.expected_margin.value) + " <= " +
                                            format_g(rep.e_upper.value));
  }
  {
    bool bounds = true;
    for (const FrontierPoint& p : curve.points) {
      const double gap = p.product - curve.anchor;
      const double se = std::sqrt(p.product_std_error * p.product_std_error +
                                  curve.anchor_std_error * curve.anchor_std_error);
      if (gap > rep.u_bound + 3.0 * se + 1e-9) bounds = false;
      if (rep.spectral.rho_min && std::isfinite(p.mu) &&
          gap < rep.l_bound(p.mu) - 3.0 * se - 1e-9)
        bounds = false;
    }
    ok &= experiment_detail::check_line(os, "gap_bounds", bounds,
                                        "u_bound=" + format_g(rep.u_bound));
  }
  ok &= experiment_detail::check_failure_rate(os, cache);

  ordered_json j;
  j["manifest"] = manifest.to_json();
  j["expected_margin"] = rep.expected_margin.value;
  j["expected_margin_se"] = rep.expected_margin.std_error;
  j["d_value"] = rep.d_value;
  j["d_se"] = rep.d_std_error;
  j["e_lower"] = rep.e_lower.value;
  j["e_lower_se"] = rep.e_lower.std_error;
  j["e_upper"] = rep.e_upper.value;
  j["e_upper_se"] = rep.e_upper.std_error;
  j["mse_zero"] = rep.mse_zero.value;
  j["sev_floor"] = rep.sev_floor.value;
  j["u_bound"] = rep.u_bound;
  j["spectral"]["rho_max"] = rep.spectral.rho_max;
  j["spectral"]["rho_max_overridden"] = rep.spectral.rho_max_overridden;
  if (rep.spectral.rho_min) {
    j["spectral"]["rho_min"] = *rep.spectral.rho_min;
    j["spectral"]["rho_min_overridden"] = rep.spectral.rho_min_overridden;
  } else {
    j["spectral"]["rho_min"] = nullptr;
    j["spectral"]["note"] = "rank-deficient posteriors seen; lower bound unavailable";
  }
  j["spectral"]["quantile_used"] = rep.spectral.quantile_used;
  j["spectral"]["observed_sigma_max"] = rep.spectral.observed_sigma_max;
  if (rep.spectral.observed_sigma_min)
    j["spectral"]["observed_sigma_min"] = *rep.spectral.observed_sigma_min;
  ordered_json lb = ordered_json::array();
  for (const FrontierPoint& p : curve.points) {
    ordered_json row;
    row["mu"] = json_mu(p.mu);
    row["product_gap"] = p.product - curve.anchor;
    if (rep.spectral.rho_min) row["l_bound"] = rep.l_bound(p.mu);
    lb.push_back(row);
  }
  j["l_bound_grid"] = lb;
  try {
    const MuStarLocalization loc = mu_star_localization(rep, cfg.eps);
    j["mu_star_localization"]["eps"] = cfg.eps;
    j["mu_star_localization"]["leading"] = loc.leading;
    j["mu_star_localization"]["remainder"] = loc.remainder;
  } catch (const UndefinedQuantity& e) {
    j["mu_star_localization"] = nullptr;
  }

  OutputSet out(cfg.out_dir);
  try {
    out.write("margin.json", j.dump(2) + "\n");
  } catch (...) {
    out.discard();
    throw;
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  os << "margin: d=" << format_g(rep.d_value) << " u_bound=" << format_g(rep.u_bound)
     << " wall=" << format_g(secs) << "s\n";
  return ok ? 0 : 1;
}

inline int run_skew_sweep(const ExperimentConfig& cfg, std::ostream& os) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!cfg.sweep) throw ConfigError("skew-sweep: a sweep spec is required (param=lo:hi:count)");
  RunManifest manifest;
  manifest.config_echo = config_echo(cfg);

  std::vector<std::vector<std::string>> rows;
  std::vector<SkewnessValue> ds;
  std::size_t failed = 0, total = 0;
  for (double value : cfg.sweep->values()) {
    auto params = cfg.model_params;
    params[cfg.sweep->param] = format_g(value);
    const GenerativeModel model = make_model(cfg.model_name, params);
    const ObservationBatch batch = sample_observations(model, cfg.samples, cfg.seed);
    const PosteriorCache cache = PosteriorCache::build(model, batch, cfg.threads);
    failed += cache.n_failed();
    total += batch.obs.size();
    const SkewnessValue d = skewness_d(cache);
    ds.push_back(d);
    rows.push_back({format_g(value), format_g(d.d), format_g(d.std_error)});
  }
  manifest.n_samples = total;
  manifest.n_failed = failed;

  bool increasing = true, decreasing = true;
  for (std::size_t i = 0; i + 1 < ds.size(); ++i) {
    const double se = 3.0 * std::sqrt(ds[i].std_error * ds[i].std_error +
                                      ds[i + 1].std_error * ds[i + 1].std_error);
    if (ds[i + 1].d < ds[i].d - se) increasing = false;
    if (ds[i + 1].d > ds[i].d + se) decreasing = false;
  }
  const std::string trend = increasing && decreasing ? "flat"
                            : increasing             ? "increasing"
                            : decreasing             ? "decreasing"
                                                     : "mixed";
  const double rate = total > 0 ? static_cast<double>(failed) / total : 0.0;
  bool ok = experiment_detail::check_line(os, "failure_rate", rate <= 1e-3,
                                          format_g(100.0 * rate) + "% of samples failed");

  ordered_json j;
  j["manifest"] = manifest.to_json();
  j["param"] = cfg.sweep->param;
  j["trend"] = trend;
  ordered_json pts = ordered_json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ordered_json row;
    row["value"] = cfg.sweep->values()[i];
    row["d"] = ds[i].d;
    row["d_se"] = ds[i].std_error;
    pts.push_back(row);
  }
  j["points"] = pts;

  OutputSet out(cfg.out_dir);
  try {
    out.write("skew_sweep.csv", csv_table(manifest.hash(), {"param", "d", "d_se"}, rows));
    out.write("skew_sweep.json", j.dump(2) + "\n");
    if (cfg.gnuplot) {
      std::string gp;
      gp += "set datafile separator ','\n";
      gp += "set xlabel '" + cfg.sweep->param + "'\n";
      gp += "set ylabel 'd'\n";
      gp += "plot 'skew_sweep.csv' skip 2 using 1:2 with linespoints title 'd'\n";
      out.write("skew_sweep.gp", gp);
    }
  } catch (...) {
    out.discard();
    throw;
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  os << "skew-sweep: " << ds.size() << " points, trend " << trend << " wall=" << format_g(secs)
     << "s\n";
  return ok ? 0 : 1;
}

inline int run_verify(const ExperimentConfig& cfg, std::ostream& os) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.probes.empty())
    throw ConfigError("verify: at least one probe is required (--probe or [run] probe=)");
  std::vector<ProbeSpec> probes;
  for (const std::string& p : cfg.probes) probes.push_back(parse_probe(p));

  const GenerativeModel model = make_model(cfg);
  RunManifest manifest;
  manifest.config_echo = config_echo(cfg);
  const PosteriorCache cache = experiment_detail::build_cache(model, cfg, manifest);
  const FrontierCurve curve = frontier_scan(cache, cfg.mu_grid(), true, false);

  bool ok = experiment_detail::check_failure_rate(os, cache);
  ordered_json j;
  j["manifest"] = manifest.to_json();
  j["h_value"] = curve.h_value;
  j["h_std_error"] = curve.h_std_error;
  j["mu_star"] = json_mu(curve.mu_star);
  ordered_json arr = ordered_json::array();
  for (const ProbeSpec& probe : probes) {
    const UncertaintyCheck chk = verify_uncertainty(cache, probe.fn, curve);
    ok &= experiment_detail::check_line(
        os, "probe " + probe.name, chk.passed,
        "product=" + format_g(chk.product) + " h=" + format_g(chk.h_value));
    ordered_json row;
    row["probe"] = probe.name;
    row["mse"] = chk.mse.value;
    row["mse_se"] = chk.mse.std_error;
    row["sev"] = chk.sev.value;
    row["sev_se"] = chk.sev.std_error;
    row["product"] = chk.product;
    row["product_se"] = chk.product_std_error;
    row["margin_over_h"] = chk.margin;
    row["passed"] = chk.passed;
    arr.push_back(row);
  }
  j["probes"] = arr;

  OutputSet out(cfg.out_dir);
  try {
    out.write("verify.json", j.dump(2) + "\n");
  } catch (...) {
    out.discard();
    throw;
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  os << "verify: " << probes.size() << " probes against h=" << format_g(curve.h_value)
     << " wall=" << format_g(secs) << "s\n";
  return ok ? 0 : 1;
}

inline int run_command(const ExperimentConfig& cfg, std::ostream& os) {
  if (cfg.command == "frontier") return run_frontier(cfg, os);
  if (cfg.command == "margin") return run_margin(cfg, os);
  if (cfg.command == "skew-sweep") return run_skew_sweep(cfg, os);
  if (cfg.command == "verify") return run_verify(cfg, os);
  throw ConfigError("unknown command '" + cfg.command + "'");
}

}  // namespace riskmse
