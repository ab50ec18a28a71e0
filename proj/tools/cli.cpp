#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "delaykern/circulant.hpp"
#include "delaykern/dde_oracle.hpp"
#include "delaykern/errors.hpp"
#include "delaykern/execution.hpp"
#include "delaykern/report.hpp"
#include "delaykern/scalar_core.hpp"
#include "delaykern/spatial_synthesis.hpp"

namespace delaykern::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using report::Plot;
using report::Series;
using report::Table;

class ConfigError : public InputError {
public:
  using InputError::InputError;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

std::string env_name(const std::string& key) {
  std::string out = "DELAYKERN_";
  for (char ch : key) out += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

json to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Parameters of one subcommand. Lookup order: command-line flag, then the
// DELAYKERN_* environment variable (both handled by CLI11), then the JSON
// config file, then the built-in default.
class Params {
public:
  explicit Params(CLI::App* app) : app_(app) {
    add_string("config", "--config", "JSON configuration file");
    add_string("out", "--out", "output directory");
    app_->add_option("--format", strings_["format"], "csv, json or svg (default: all three)")
        ->envname(env_name("format"))
        ->check(CLI::IsMember({"csv", "json", "svg"}));
    options_["format"] = app_->get_option("--format");
  }

  void add_number(const std::string& key, const std::string& flag, const std::string& help) {
    options_[key] = app_->add_option(flag, numbers_[key], help)->envname(env_name(key));
  }

  void add_list(const std::string& key, const std::string& flag, const std::string& help) {
    options_[key] = app_->add_option(flag, lists_[key], help)->envname(env_name(key))->delimiter(',');
  }

  void add_string(const std::string& key, const std::string& flag, const std::string& help) {
    options_[key] = app_->add_option(flag, strings_[key], help)->envname(env_name(key));
  }

  // Keys the config file may hold beyond the flags.
  void allow_config_key(const std::string& key) { extra_keys_.insert(key); }

  void load_config() {
    if (!given("config")) return;
    const std::string path = strings_["config"];
    std::ifstream in(path);
    require(in.good(), "cannot read config file " + path);
    try {
      config_ = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    require(config_.is_object(), "config file must hold a JSON object");
    for (const auto& [key, value] : config_.items()) {
      (void)value;
      require(key != "config", "config file cannot name another config file");
      require(options_.count(key) || extra_keys_.count(key), "unknown config key '" + key + "'");
    }
  }

  bool given(const std::string& key) const {
    const auto it = options_.find(key);
    return it != options_.end() && it->second->count() > 0;
  }

  bool in_config(const std::string& key) const { return config_.contains(key); }
  bool set(const std::string& key) const { return given(key) || in_config(key); }
  const json& config(const std::string& key) const { return config_.at(key); }

  double number(const std::string& key, double fallback) const {
    double v = fallback;
    if (given(key)) {
      v = numbers_.at(key);
    } else if (in_config(key)) {
      require(config_[key].is_number(), "config key '" + key + "' must be a number");
      v = config_[key].get<double>();
    }
    require(std::isfinite(v), "parameter '" + key + "' must be finite");
    return v;
  }

  std::size_t count(const std::string& key, std::size_t fallback, std::size_t min) const {
    const double v = number(key, static_cast<double>(fallback));
    require(v == std::floor(v) && v >= static_cast<double>(min) && v <= 1e7,
            "parameter '" + key + "' must be an integer >= " + std::to_string(min));
    return static_cast<std::size_t>(v);
  }

  std::vector<double> list(const std::string& key, const std::vector<double>& fallback) const {
    std::vector<double> v = fallback;
    if (given(key)) {
      v = lists_.at(key);
    } else if (in_config(key)) {
      const json& j = config_[key];
      require(j.is_array(), "config key '" + key + "' must be an array of numbers");
      v.clear();
      for (const auto& e : j) {
        require(e.is_number(), "config key '" + key + "' must be an array of numbers");
        v.push_back(e.get<double>());
      }
    }
    require(!v.empty(), "parameter '" + key + "' must not be empty");
    for (double x : v) require(std::isfinite(x), "parameter '" + key + "' must be finite");
    return v;
  }

  std::optional<std::string> string(const std::string& key) const {
    if (given(key)) return strings_.at(key);
    if (in_config(key)) {
      require(config_[key].is_string(), "config key '" + key + "' must be a string");
      return config_[key].get<std::string>();
    }
    return std::nullopt;
  }

private:
  CLI::App* app_;
  std::map<std::string, double> numbers_;
  std::map<std::string, std::vector<double>> lists_;
  std::map<std::string, std::string> strings_;
  std::map<std::string, CLI::Option*> options_;
  std::set<std::string> extra_keys_;
  json config_ = json::object();
};

class Output {
public:
  explicit Output(const Params& p) {
    dir_ = p.string("out").value_or("delaykern-out");
    format_ = p.string("format");
    require(!format_ || *format_ == "csv" || *format_ == "json" || *format_ == "svg",
            "format must be csv, json or svg");
  }

  bool wants(const char* fmt) const { return !format_ || *format_ == fmt; }

  void csv(const std::string& stem, const Table& t) const {
    if (wants("csv")) write(stem + ".csv", [&](std::ostream& os) { report::write_csv(os, t); });
  }
  void json_doc(const std::string& stem, const json& j) const {
    if (wants("json")) write(stem + ".json", [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  }
  void svg(const std::string& stem, const Plot& plot) const {
    if (wants("svg")) write(stem + ".svg", [&](std::ostream& os) { report::write_svg(os, plot); });
  }

  const std::vector<std::string>& written() const { return written_; }

private:
  void write(const std::string& name, const std::function<void(std::ostream&)>& body) const {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    require(!ec && fs::is_directory(dir_), "cannot create output directory " + dir_.string());
    const fs::path path = dir_ / name;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    require(os.good(), "cannot write " + path.string());
    body(os);
    os.flush();
    require(os.good(), "failed writing " + path.string());
    written_.push_back(path.string());
  }

  fs::path dir_;
  std::optional<std::string> format_;
  mutable std::vector<std::string> written_;
};

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return v;
}

// Runs body(i) for every index and rethrows the first exception by index.
void for_each_checked(std::size_t n, const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(n);
  detail::for_each_index(Execution::parallel, n, [&](std::size_t i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string label(const std::string& name, double value) {
  return name + "=" + report::format_number(value);
}

// ---------------------------------------------------------------- regions

void declare_regions(Params& p) {
  p.add_number("a_min", "--a-min", "smallest open-loop coefficient");
  p.add_number("a_max", "--a-max", "largest open-loop coefficient");
  p.add_number("n_points", "--n-points", "grid size");
  p.add_number("T", "--T", "delay");
}

void cmd_regions(const Params& p, const Output& out) {
  const double a_min = p.number("a_min", -6.0);
  const double a_max = p.number("a_max", 0.9);
  const std::size_t n = p.count("n_points", 139, 2);
  const double T = p.number("T", 1.0);
  require(a_min < a_max, "a_min must be below a_max");
  require(T >= 0.0, "T must be non-negative");

  const auto grid = linspace(a_min, a_max, n);
  const auto rows = region_boundaries(grid, T);

  Table table{{"a", "k_lower", "k_upper", "k_cheap", "k_expensive"}, {}};
  json jrows = json::array();
  Series upper{"k_upper", {}, {}}, cheap{"k_cheap", {}, {}}, expensive{"k_expensive", {}, {}},
      lower{"k = a", {}, {}};
  for (const auto& r : rows) {
    table.rows.push_back({r.a, r.a, r.k_upper, r.k_cheap, r.k_expensive});
    jrows.push_back({{"a", r.a},
                     {"k_lower", r.a},
                     {"k_upper", to_json(r.k_upper)},
                     {"k_cheap", to_json(r.k_cheap)},
                     {"k_expensive", to_json(r.k_expensive)},
                     {"note", r.note}});
    for (Series* s : {&upper, &cheap, &expensive, &lower}) s->x.push_back(r.a);
    upper.y.push_back(r.k_upper.value_or(NAN));
    cheap.y.push_back(r.k_cheap.value_or(NAN));
    expensive.y.push_back(r.k_expensive.value_or(NAN));
    lower.y.push_back(r.a);
  }

  out.csv("regions", table);
  out.json_doc("regions", {{"command", "regions"},
                           {"params", {{"a_min", a_min}, {"a_max", a_max}, {"n_points", n}, {"T", T}}},
                           {"has_upper_bound", T > 0.0},
                           {"rows", jrows}});
  Plot plot{"Stability and optimality regions, " + label("T", T), "a", "k", {}};
  if (T > 0.0) plot.series.push_back(upper);
  plot.series.push_back(cheap);
  plot.series.push_back(expensive);
  plot.series.push_back(lower);
  out.svg("regions", plot);
}

// ----------------------------------------------------------- scalar-sweep

void declare_scalar_sweep(Params& p) {
  p.add_number("a_min", "--a-min", "smallest open-loop coefficient");
  p.add_number("a_max", "--a-max", "largest open-loop coefficient");
  p.add_number("n_points", "--n-points", "grid size");
  p.add_list("T_list", "--T-list", "comma-separated delays");
  p.add_number("r", "--r", "control weight");
}

void cmd_scalar_sweep(const Params& p, const Output& out) {
  const double a_min = p.number("a_min", -3.0);
  const double a_max = p.number("a_max", 3.0);
  const std::size_t n = p.count("n_points", 121, 2);
  const auto Ts = p.list("T_list", {0.0, 1.0, 2.0, 3.0});
  const double r = p.number("r", 1.0);
  require(a_min < a_max, "a_min must be below a_max");
  require(r > 0.0, "r must be positive");
  for (double T : Ts) require(T >= 0.0, "delays must be non-negative");

  const auto grid = linspace(a_min, a_max, n);
  std::vector<std::vector<std::optional<double>>> k(Ts.size(), std::vector<std::optional<double>>(n));
  auto j = k;
  for_each_checked(n * Ts.size(), [&](std::size_t idx) {
    const std::size_t t = idx / n;
    const std::size_t i = idx % n;
    const ScalarPlant plant{grid[i], Ts[t], r};
    // The curve stops where a T >= 1: no gain stabilizes the loop there.
    if (!plant.stabilizable()) return;
    const auto g = optimal_gain(plant);
    k[t][i] = g.k;
    j[t][i] = g.j;
  });

  Table table{{"a"}, {}};
  for (double T : Ts) {
    table.columns.push_back("k[" + label("T", T) + "]");
    table.columns.push_back("J[" + label("T", T) + "]");
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::optional<double>> row{grid[i]};
    for (std::size_t t = 0; t < Ts.size(); ++t) {
      row.push_back(k[t][i]);
      row.push_back(j[t][i]);
    }
    table.rows.push_back(std::move(row));
  }

  json curves = json::array();
  Plot plot{"Optimal gain, " + label("r", r), "a", "k_opt", {}};
  for (std::size_t t = 0; t < Ts.size(); ++t) {
    json jk = json::array(), jj = json::array();
    Series s{label("T", Ts[t]), grid, {}};
    for (std::size_t i = 0; i < n; ++i) {
      jk.push_back(to_json(k[t][i]));
      jj.push_back(to_json(j[t][i]));
      s.y.push_back(k[t][i].value_or(NAN));
    }
    curves.push_back({{"T", Ts[t]}, {"k", jk}, {"J", jj}});
    plot.series.push_back(std::move(s));
  }

  out.csv("scalar_sweep", table);
  out.json_doc("scalar_sweep",
               {{"command", "scalar-sweep"},
                {"params", {{"a_min", a_min}, {"a_max", a_max}, {"n_points", n}, {"T_list", Ts}, {"r", r}}},
                {"a", grid},
                {"curves", curves}});
  out.svg("scalar_sweep", plot);
}

// ------------------------------------------------------------- rd-kernels

void declare_rd_kernels(Params& p) {
  for (const char* key : {"c", "d", "T", "r", "dx", "L", "alpha", "beta", "kappa", "gamma"}) {
    p.add_number(key, std::string("--") + key, std::string("reaction-diffusion parameter ") + key);
  }
}

double l2_relative_gap(const SpatialKernel& a, const SpatialKernel& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    num += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
    den += b.values[i] * b.values[i];
  }
  return std::sqrt(num / den);
}

json truncation_json(const TruncationResult& t, double cutoff) {
  return {{"cutoff", cutoff},
          {"stable", t.stable},
          {"j_truncated", to_json(t.j_truncated)},
          {"j_full", t.j_full},
          {"first_unstable_lambda", to_json(t.first_unstable_lambda)}};
}

void cmd_rd_kernels(const Params& p, const Output& out) {
  ReactionDiffusionParams rd{p.number("c", 1.0), p.number("d", 1.0), p.number("T", 1.0), p.number("r", 1.0)};
  const double dx = p.number("dx", 0.05);
  const double L = p.number("L", 20.0);
  const double alpha = p.number("alpha", 0.5);
  const double beta = p.number("beta", 1.0);
  const double kappa = p.number("kappa", 2.0);
  const double gamma = p.number("gamma", 1.0);
  rd.validate();
  require(dx > 0.0 && L >= 2.0 * dx, "need dx > 0 and L >= 2 dx");
  require(L / dx <= 1e6, "grid too large");

  // The kernel grid fixes lambda_max = pi/dx; dlambda = pi/(2L) keeps the
  // periodic images of the discrete transform outside [-L, L].
  const double lambda_max = std::numbers::pi / dx;
  const auto n_lambda = static_cast<std::size_t>(std::ceil(2.0 * L / dx)) + 1;
  const auto sym = rd.symbol_function(lambda_max, n_lambda);
  ReactionDiffusionParams rd0 = rd;
  rd0.T = 0.0;

  const auto design0 = sweep_optimal_symbol(sym, 0.0, rd.r);
  const auto k0_num = kernel_from_symbol(design0, dx, L, KernelProvenance::delay_free);
  const auto k0_closed = rd_sampled_kernel(rd0, dx, L, KernelProvenance::delay_free);
  const bool delayed = rd.T > 0.0;

  json meta{{"command", "rd-kernels"},
            {"params",
             {{"c", rd.c}, {"d", rd.d}, {"T", rd.T}, {"r", rd.r}, {"dx", dx}, {"L", L},
              {"alpha", alpha}, {"beta", beta}, {"kappa", kappa}, {"gamma", gamma}}},
            {"spectral_grid", {{"lambda_max", lambda_max}, {"n_lambda", n_lambda}}}};
  json warnings = json::array();
  json kernels = json::array();
  kernels.push_back({{"column", "K0_numerical"}, {"provenance", to_string(k0_num.provenance)}});
  kernels.push_back({{"column", "K0_closed_form"}, {"provenance", to_string(k0_closed.provenance)},
                     {"note", "expensive-control limit of the delay-free kernel"}});

  Table table{{"x", "K0_numerical", "K0_closed_form"}, {}};
  Table symbols{{"lambda", "a", "k0_opt"}, {}};
  Plot plot{"Convolution kernels, " + label("T", rd.T) + ", " + label("r", rd.r), "x", "K(x)", {}};
  Series s0n{"delay-free (numerical)", {}, {}}, s0c{"delay-free (closed form)", {}, {}};

  std::optional<SpectralDesign> designT;
  std::optional<SpatialKernel> kT_num, kT_closed;
  std::optional<DesignThresholds> th;
  if (delayed) {
    designT = sweep_optimal_symbol(sym, rd.T, rd.r);
    kT_num = kernel_from_symbol(*designT, dx, L, KernelProvenance::numerical_opt);
    kT_closed = rd_sampled_kernel(rd, dx, L, KernelProvenance::expensive_closed_form);
    th = rd_thresholds(rd, alpha, beta, kappa, gamma);
    table.columns.insert(table.columns.end(), {"KT_numerical", "KT_closed_form", "KT_design"});
    symbols.columns.insert(symbols.columns.end(), {"kT_opt", "kT_expensive"});
    kernels.push_back({{"column", "KT_numerical"}, {"provenance", to_string(kT_num->provenance)}});
    kernels.push_back({{"column", "KT_closed_form"}, {"provenance", to_string(kT_closed->provenance)}});
    if (th->consistent) {
      kernels.push_back({{"column", "KT_design"}, {"provenance", "design_approximation"}});
    } else {
      warnings.push_back("alpha x_th1 > beta x_th2: design approximation omitted");
    }
  }

  Series sTn{"delay-aware (numerical)", {}, {}}, sTc{"delay-aware (closed form)", {}, {}},
      sTd{"design approximation", {}, {}};
  for (std::size_t i = 0; i < k0_num.values.size(); ++i) {
    const double x = k0_num.x(i);
    std::vector<std::optional<double>> row{x, k0_num.values[i], k0_closed.values[i]};
    s0n.x.push_back(x);
    s0n.y.push_back(k0_num.values[i]);
    s0c.x.push_back(x);
    s0c.y.push_back(k0_closed.values[i]);
    if (delayed) {
      std::optional<double> design;
      if (th->consistent) design = rd_design_approximation(rd, *th, x);
      row.insert(row.end(), {kT_num->values[i], kT_closed->values[i], design});
      for (Series* s : {&sTn, &sTc, &sTd}) s->x.push_back(x);
      sTn.y.push_back(kT_num->values[i]);
      sTc.y.push_back(kT_closed->values[i]);
      sTd.y.push_back(design.value_or(NAN));
    }
    table.rows.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < sym.n_lambda; ++i) {
    const auto& s = design0.samples[i];
    std::vector<std::optional<double>> row{s.lambda, s.a, s.k};
    if (delayed) {
      row.push_back(designT->samples[i].k);
      row.push_back(std::exp(rd.T * s.a) / (2.0 * rd.r * std::abs(s.a)));
    }
    symbols.rows.push_back(std::move(row));
  }

  meta["kernels"] = kernels;
  meta["peak"] = {{"K0_numerical", k0_num.values[k0_num.center()]},
                  {"K0_closed_form", k0_closed.values[k0_closed.center()]}};
  if (delayed) {
    meta["peak"]["KT_numerical"] = kT_num->values[kT_num->center()];
    meta["peak"]["KT_closed_form"] = kT_closed->values[kT_closed->center()];
    meta["l2_gap_numerical_vs_closed_form"] = l2_relative_gap(*kT_num, *kT_closed);
    meta["thresholds"] = {{"D0", th->D0},         {"D2", th->D2},       {"D4", th->D4},
                          {"x_th1", th->x_th1},   {"x_th2", th->x_th2}, {"x_th0", th->x_th0},
                          {"x_thT", th->x_thT},   {"gain_gap", th->gain_gap},
                          {"delay_dominates", th->delay_dominates}, {"consistent", th->consistent}};
    const double sigma = std::sqrt(2.0 * rd.d * rd.T);
    if (dx <= sigma / 8.0) {
      meta["convolution_deviation"] = rd_convolution_check(rd, dx, L);
    } else {
      meta["convolution_deviation"] = nullptr;
      warnings.push_back("dx exceeds sqrt(2 d T)/8: convolution check skipped");
    }
    json trunc = json::array();
    for (double cutoff : {th->x_th0, th->x_thT}) {
      trunc.push_back(truncation_json(
          truncation_analysis(rd, *kT_num, cutoff, sym, kappa, gamma), cutoff));
    }
    meta["truncation"] = trunc;
  } else {
    meta["l2_gap_numerical_vs_closed_form"] = l2_relative_gap(k0_num, k0_closed);
  }
  meta["warnings"] = warnings;

  plot.series = {s0n, s0c};
  if (delayed) {
    plot.series.push_back(sTn);
    plot.series.push_back(sTc);
    if (th->consistent) plot.series.push_back(sTd);
  }

  out.csv("rd_kernels", table);
  out.csv("rd_symbols", symbols);
  out.json_doc("rd_kernels", meta);
  out.svg("rd_kernels", plot);
}

// -------------------------------------------------------------- circulant

void declare_circulant(Params& p) {
  p.add_list("a_row", "--a-row", "first row of the symmetric circulant coupling");
  p.add_number("T", "--T", "delay (single case)");
  p.add_number("r", "--r", "control weight (single case)");
  p.add_string("method", "--method", "numerical_opt, small_delay or delay_free (default: all)");
  p.allow_config_key("cases");
}

GainMethod parse_method(const std::string& s) {
  for (auto m : {GainMethod::numerical_opt, GainMethod::small_delay, GainMethod::delay_free}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown gain method '" + s + "'");
}

void cmd_circulant(const Params& p, const Output& out) {
  const CirculantSystem sys{p.list("a_row", {1, 1, 0.5, 0, 0, 0, 0, 0, 0.5, 1})};
  sys.validate();
  const std::size_t n = sys.n();

  std::vector<std::pair<double, double>> cases;  // (T, r)
  if (p.set("T") || p.set("r")) {
    cases.emplace_back(p.number("T", 0.01), p.number("r", 1.0));
  } else if (p.in_config("cases")) {
    const json& jc = p.config("cases");
    require(jc.is_array() && !jc.empty(), "config key 'cases' must be a non-empty array");
    for (const auto& c : jc) {
      require(c.is_object() && c.contains("T") && c.contains("r") && c["T"].is_number() &&
                  c["r"].is_number() && c.size() == 2,
              "each case must be an object {\"T\": number, \"r\": number}");
      cases.emplace_back(c["T"].get<double>(), c["r"].get<double>());
    }
  } else {
    cases = {{0.1, 1.0}, {0.01, 1.0}, {0.01, 10.0}};
  }
  for (const auto& [T, r] : cases) {
    require(std::isfinite(T) && T >= 0.0, "case delay must be non-negative");
    require(std::isfinite(r) && r > 0.0, "case weight must be positive");
  }
  std::vector<GainMethod> methods{GainMethod::numerical_opt, GainMethod::small_delay,
                                  GainMethod::delay_free};
  if (const auto m = p.string("method")) methods = {parse_method(*m)};

  const auto modes = modes_of(sys);
  Table rows{{"case", "T", "r", "j"}, {}};
  Table mode_table{{"case", "T", "r", "mode", "A_hat"}, {}};
  for (auto m : methods) {
    rows.columns.push_back(std::string("k_row_") + to_string(m));
    mode_table.columns.push_back(std::string("k_") + to_string(m));
  }
  json jcases = json::array();
  Plot plot{"Circulant gains", "agent offset j", "gain", {}};
  Series eig{"A_hat (mode)", {}, {}};
  for (std::size_t l = 0; l < n; ++l) {
    eig.x.push_back(static_cast<double>(l));
    eig.y.push_back(modes[l]);
  }
  plot.series.push_back(eig);

  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto [T, r] = cases[c];
    std::vector<CirculantGains> gains;
    json jmethods = json::object();
    for (auto m : methods) {
      gains.push_back(design_gains(sys, T, r, m));
      const auto& g = gains.back();
      const bool stable = verify_closed_loop(sys, g, T);
      json jm{{"k_row", g.k_row},
              {"k_modes", g.k_modes},
              {"self_gain", g.self_gain},
              {"stable", stable},
              {"cost", stable ? json(h2_cost(sys, g, T, r)) : json(nullptr)}};
      if (m == GainMethod::small_delay) jm["algebra_residual"] = g.algebra_residual;
      jmethods[to_string(m)] = jm;
      Series s{label("T", T) + " " + label("r", r) + " " + to_string(m), {}, g.k_row};
      for (std::size_t j = 0; j < n; ++j) s.x.push_back(static_cast<double>(j));
      plot.series.push_back(std::move(s));
    }
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<std::optional<double>> row{static_cast<double>(c), T, r, static_cast<double>(j)};
      std::vector<std::optional<double>> mrow{static_cast<double>(c), T, r, static_cast<double>(j), modes[j]};
      for (const auto& g : gains) {
        row.push_back(g.k_row[j]);
        mrow.push_back(g.k_modes[j]);
      }
      rows.rows.push_back(std::move(row));
      mode_table.rows.push_back(std::move(mrow));
    }
    jcases.push_back({{"T", T}, {"r", r}, {"methods", jmethods}});
  }

  out.csv("circulant", rows);
  out.csv("circulant_modes", mode_table);
  out.json_doc("circulant", {{"command", "circulant"},
                             {"n", n},
                             {"a_row", sys.a_row},
                             {"modes", modes},
                             {"cases", jcases}});
  out.svg("circulant", plot);
}

// ----------------------------------------------------------------- verify

void declare_verify(Params& p) {
  p.add_list("a_list", "--a-list", "open-loop coefficients");
  p.add_list("T_list", "--T-list", "delays (positive)");
  p.add_list("k_fractions", "--k-fractions", "gains as fractions of the stability interval");
  p.add_number("step", "--step", "time step of the deterministic oracle");
  p.add_number("seed", "--seed", "Monte Carlo seed");
  p.add_number("mc_paths", "--mc-paths", "Monte Carlo paths per row (0 disables)");
  p.add_number("mc_h", "--mc-h", "Monte Carlo time step");
  p.add_number("mc_horizon", "--mc-horizon", "Monte Carlo horizon");
}

struct VerifyRow {
  double a, T, k;
  bool zero_gain;
  double step = 0.0;
  OracleReport rep;
  std::optional<MonteCarloEstimate> mc;
  bool pass = false;
};

int cmd_verify(const Params& p, const Output& out, std::ostream& err) {
  const auto as = p.list("a_list", {-2.0, -1.0, -0.5, 0.2, 0.5});
  const auto Ts = p.list("T_list", {0.25, 0.5, 1.0, 1.5});
  const auto qs = p.list("k_fractions", {0.1, 0.25, 0.4, 0.55, 0.7, 0.85});
  const double h = p.number("step", 0.01);
  const double seed = p.number("seed", 1.0);
  const std::size_t paths = p.count("mc_paths", 200, 0);
  const double mc_h = p.number("mc_h", 0.01);
  const double mc_horizon = p.number("mc_horizon", 40.0);
  require(h > 0.0 && h <= 0.1, "step must lie in (0, 0.1]");
  require(seed >= 0.0 && seed == std::floor(seed) && seed < 9.007e15, "seed must be a non-negative integer");
  require(mc_h > 0.0 && mc_horizon > 10.0 * mc_h, "need mc_h > 0 and mc_horizon > 10 mc_h");
  for (double T : Ts) require(T > 0.0, "verify delays must be positive");
  for (double q : qs) require(q > 0.0 && q < 1.0, "k fractions must lie in (0, 1)");
  for (double a : as) {
    for (double T : Ts) require(a * T < 1.0, "every (a, T) pair needs a T < 1");
  }

  std::vector<VerifyRow> rows;
  for (double a : as) {
    for (double T : Ts) {
      const double ku = stabilizing_upper_bound({a, T, 1.0}).value();
      for (double q : qs) rows.push_back({a, T, a + q * (ku - a), false, 0.0, {}, {}});
      if (a < 0.0) rows.push_back({a, T, 0.0, true, 0.0, {}, {}});
    }
  }

  const auto base_seed = static_cast<std::uint64_t>(seed);
  for_each_checked(rows.size(), [&](std::size_t i) {
    auto& row = rows[i];
    const ScalarPlant plant{row.a, row.T, 1.0};
    // The zero-gain rows are held to 1e-9; a quarter step brings the RK4
    // error, which scales like (a h)^4, well below that.
    row.step = row.zero_gain ? h / 4.0 : h;
    row.rep = cross_check(plant, row.k, row.step);
    if (paths >= 2) {
      row.mc = monte_carlo_variance(plant, row.k, mc_h, mc_horizon, paths, base_seed + i,
                                    Execution::serial);
    }
    // Without feedback the time-domain oracle is a plain exponential.
    const double time_tol = row.zero_gain ? 1e-9 : 1e-3;
    row.pass = row.rep.rel_err_time < time_tol && row.rep.rel_err_freq < 1e-4;
  });

  Table table{{"a", "T", "k", "zero_gain", "step", "f_closed_form", "f_time_domain", "f_freq_domain",
               "rel_err_time", "rel_err_freq", "mc_mean", "mc_standard_error", "pass"},
              {}};
  json jrows = json::array();
  double worst_time = 0.0, worst_freq = 0.0;
  std::size_t failures = 0;
  Plot plot{"Oracle relative errors", "row", "log10 relative error", {}};
  Series st{"time domain", {}, {}}, sf{"frequency domain", {}, {}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::optional<double> mc_mean, mc_se;
    if (r.mc) {
      mc_mean = r.mc->mean;
      mc_se = r.mc->standard_error;
    }
    table.rows.push_back({r.a, r.T, r.k, r.zero_gain ? 1.0 : 0.0, r.step, r.rep.f_closed_form,
                          r.rep.f_time_domain, r.rep.f_freq_domain, r.rep.rel_err_time,
                          r.rep.rel_err_freq, mc_mean, mc_se, r.pass ? 1.0 : 0.0});
    json jr{{"a", r.a}, {"T", r.T}, {"k", r.k}, {"zero_gain", r.zero_gain}, {"step", r.step},
            {"f_closed_form", r.rep.f_closed_form}, {"f_time_domain", r.rep.f_time_domain},
            {"f_freq_domain", r.rep.f_freq_domain}, {"rel_err_time", r.rep.rel_err_time},
            {"rel_err_freq", r.rep.rel_err_freq}, {"pass", r.pass}};
    if (r.mc) jr["monte_carlo"] = {{"mean", r.mc->mean}, {"standard_error", r.mc->standard_error}};
    jrows.push_back(jr);
    worst_time = std::max(worst_time, r.rep.rel_err_time);
    worst_freq = std::max(worst_freq, r.rep.rel_err_freq);
    if (!r.pass) ++failures;
    st.x.push_back(static_cast<double>(i));
    sf.x.push_back(static_cast<double>(i));
    st.y.push_back(std::log10(std::max(r.rep.rel_err_time, 1e-18)));
    sf.y.push_back(std::log10(std::max(r.rep.rel_err_freq, 1e-18)));
  }
  plot.series = {st, sf};

  out.csv("verify", table);
  out.json_doc("verify", {{"command", "verify"},
                          {"params",
                           {{"a_list", as}, {"T_list", Ts}, {"k_fractions", qs}, {"step", h},
                            {"seed", base_seed}, {"mc_paths", paths}, {"mc_h", mc_h},
                            {"mc_horizon", mc_horizon}}},
                          {"summary",
                           {{"rows", rows.size()}, {"failures", failures},
                            {"max_rel_err_time", worst_time}, {"max_rel_err_freq", worst_freq}}},
                          {"rows", jrows}});
  out.svg("verify", plot);

  if (failures > 0) {
    err << json{{"status", "error"}, {"exit_code", numerical_error}, {"category", "numerical"},
                {"type", "OracleMismatch"},
                {"message", std::to_string(failures) + " verification rows exceeded tolerance"}}
               .dump()
        << '\n';
    return numerical_error;
  }
  return ok;
}

// ------------------------------------------------------------ error JSON

struct Classified {
  int code;
  std::string category;
  std::string type;
};

Classified classify(const std::exception& e) {
  auto is = [&](auto* tag) { return dynamic_cast<const std::remove_pointer_t<decltype(tag)>*>(&e) != nullptr; };
  if (is(static_cast<ConfigError*>(nullptr))) return {config_error, "config", "ConfigError"};
  if (is(static_cast<AliasError*>(nullptr))) return {config_error, "config", "AliasError"};
  if (is(static_cast<ResolutionError*>(nullptr))) return {config_error, "config", "ResolutionError"};
  if (is(static_cast<SymmetryError*>(nullptr))) return {config_error, "config", "SymmetryError"};
  if (is(static_cast<BoundaryError*>(nullptr))) return {config_error, "config", "BoundaryError"};
  if (is(static_cast<DomainError*>(nullptr))) return {config_error, "config", "DomainError"};
  if (is(static_cast<InputError*>(nullptr))) return {config_error, "config", "InputError"};
  if (is(static_cast<UnstabilizableError*>(nullptr))) return {numerical_error, "numerical", "UnstabilizableError"};
  if (is(static_cast<NoSolutionError*>(nullptr))) return {numerical_error, "numerical", "NoSolutionError"};
  if (is(static_cast<DivergenceError*>(nullptr))) return {numerical_error, "numerical", "DivergenceError"};
  if (is(static_cast<InstabilityError*>(nullptr))) return {numerical_error, "numerical", "InstabilityError"};
  if (is(static_cast<NumericalFailure*>(nullptr))) return {numerical_error, "numerical", "NumericalFailure"};
  if (is(static_cast<json::exception*>(nullptr))) return {config_error, "config", "JsonError"};
  return {numerical_error, "internal", "Exception"};
}

void report_error(std::ostream& err, int code, const std::string& category, const std::string& type,
                  const std::string& message, const json& extra = json::object()) {
  json j{{"status", "error"}, {"exit_code", code}, {"category", category}, {"type", type},
         {"message", message}};
  for (const auto& [k, v] : extra.items()) j[k] = v;
  err << j.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Delay-aware H2 gain design and verification workbench", "delaykern"};
  app.require_subcommand(1, 1);

  struct Entry {
    CLI::App* app;
    std::unique_ptr<Params> params;
  };
  std::map<std::string, Entry> commands;
  auto add = [&](const std::string& name, const std::string& help, void (*declare)(Params&)) {
    CLI::App* sub = app.add_subcommand(name, help);
    auto params = std::make_unique<Params>(sub);
    declare(*params);
    commands[name] = Entry{sub, std::move(params)};
  };
  add("regions", "stability and optimality region boundaries", declare_regions);
  add("scalar-sweep", "optimal gain against a for several delays", declare_scalar_sweep);
  add("rd-kernels", "reaction-diffusion controller kernels", declare_rd_kernels);
  add("circulant", "gain design for symmetric circulant networks", declare_circulant);
  add("verify", "cross-check the closed form against the ODE and frequency oracles", declare_verify);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      for (const auto& [name, entry] : commands) {
        if (entry.app->parsed()) out << entry.app->help();
      }
      return ok;
    }
    report_error(err, config_error, "config", "UsageError", e.what());
    return config_error;
  }

  try {
    for (auto& [name, entry] : commands) {
      if (!entry.app->parsed()) continue;
      Params& p = *entry.params;
      p.load_config();
      const Output output(p);
      int code = ok;
      if (name == "regions") cmd_regions(p, output);
      else if (name == "scalar-sweep") cmd_scalar_sweep(p, output);
      else if (name == "rd-kernels") cmd_rd_kernels(p, output);
      else if (name == "circulant") cmd_circulant(p, output);
      else code = cmd_verify(p, output, err);
      for (const auto& path : output.written()) out << path << '\n';
      return code;
    }
  } catch (const UnstabilizableError& e) {
    report_error(err, numerical_error, "numerical", "UnstabilizableError", e.what(),
                 {{"mode", e.mode()}});
    return numerical_error;
  } catch (const std::exception& e) {
    const auto c = classify(e);
    report_error(err, c.code, c.category, c.type, e.what());
    return c.code;
  }
  return ok;
}

}  // namespace delaykern::cli
