#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "chiext/analytics.hpp"
#include "chiext/covariance.hpp"
#include "chiext/error.hpp"
#include "chiext/gaussian_sim.hpp"
#include "chiext/limit_process.hpp"
#include "chiext/model_spec.hpp"
#include "chiext/montecarlo.hpp"
#include "chiext/parallel.hpp"
#include "chiext/rng.hpp"

#ifndef CHIEXT_GIT_DESCRIBE
#define CHIEXT_GIT_DESCRIBE "unknown"
#endif

namespace chiext::cli {

namespace {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

enum class Kind { Int, Count, Real, OptReal, RealList, Text };

struct Field {
  std::string name;
  Kind kind;
  json fallback;
  std::string help;
};

// Fields echoed to the sidecar but kept out of the CSV header: they change
// how a run executes, never what it computes.
const char* const kExecutionFields[] = {"parallelism"};

// Broadcast model fields; resolved into the "models" array.
const char* const kModelFields[] = {"family", "C", "alpha", "gamma"};

std::vector<Field> common_fields() {
  return {
      {"m", Kind::Int, 1, "components in the first block"},
      {"k", Kind::Int, 0, "components in the second block"},
      {"kappa", Kind::Real, 2.0, "power applied to both norms"},
      {"master_seed", Kind::Count, 1, "master seed of every random stream"},
      {"parallelism", Kind::Count, 0,
       "worker threads, 0 for all cores (capped by CHI_EXTREMES_THREADS)"},
  };
}

std::vector<Field> pickands_fields() {
  return {
      {"pickands_steps", Kind::RealList, json::array({0.2, 0.1, 0.05}),
       "grid steps for the Pickands estimate"},
      {"pickands_horizon", Kind::Real, 50.0, "horizon a*J of the Pickands estimate"},
      {"pickands_reps", Kind::Count, 100000, "replications per Pickands step"},
  };
}

struct Command {
  std::string name;
  std::string help;
  std::vector<Field> fields;
};

std::vector<Command> commands() {
  std::vector<Command> c;
  c.push_back({"validate-model",
               "check component models: local expansion, embedding, Berman decay",
               {{"t_max", Kind::Real, 10.0, "embedding grid length"},
                {"n", Kind::Count, 1024, "embedding grid points"},
                {"clip_tolerance", Kind::Real, kDefaultClipTolerance,
                 "largest clipped negative eigenvalue mass"},
                {"berman_horizon", Kind::Real, 1e4, "largest lag of the Berman check"},
                {"berman_tolerance", Kind::Real, kDefaultBermanTolerance,
                 "final-value tolerance of the Berman check"}}});
  c.push_back({"tail",
               "P(zeta(0) > u): asymptotic form against the quadrature oracle",
               {{"u", Kind::RealList, json::array({4.0}), "thresholds"},
                {"tolerance", Kind::Real, kDefaultQuadratureTolerance,
                 "relative quadrature tolerance"}}});
  auto sup = std::vector<Field>{
      {"T", Kind::Real, 5.0, "time horizon"},
      {"u", Kind::RealList, json::array(), "thresholds"},
      {"tails", Kind::RealList, json::array(),
       "one-point tail probabilities; used when u is empty"},
      {"reps", Kind::Count, 10000, "replications"},
      {"delta", Kind::Real, 0.1, "mesh as a fraction of q(max u)"},
      {"H", Kind::OptReal, nullptr, "Pickands constant (estimated when null)"},
      {"K", Kind::Real, 10.0, "Piterbarg bound constant"},
      {"beta", Kind::OptReal, nullptr, "Piterbarg exponent (null: 2/kappa + 1)"}};
  for (auto& f : pickands_fields()) sup.push_back(f);
  c.push_back({"sup-prob", "P(sup_[0,T] zeta > u) against the asymptotic form", sup});
  c.push_back({"pickands", "Pickands-type constant from the limit process",
               {{"steps", Kind::RealList, json::array({0.2, 0.1, 0.05}), "grid steps a"},
                {"horizon", Kind::Real, 50.0, "common horizon a*J"},
                {"reps", Kind::Count, 100000, "replications per step"}}});
  c.push_back({"upsilon", "tail of the total sojourn of the limit process",
               {{"a", Kind::Real, 0.05, "grid step"},
                {"J", Kind::Count, 1000, "grid points"},
                {"x", Kind::RealList, json::array({0.0, 0.5, 1.0, 2.0, 4.0}),
                 "sojourn levels"},
                {"reps", Kind::Count, 10000, "replications"}}});
  c.push_back({"sojourn", "sojourn-time identity against the limit profile",
               {{"u", Kind::OptReal, nullptr, "threshold"},
                {"tail", Kind::OptReal, 1e-2, "one-point tail probability; used when u is null"},
                {"t_window", Kind::Real, 10.0, "window length"},
                {"x", Kind::RealList, json::array({0.0, 0.5, 1.0, 2.0, 4.0}),
                 "sojourn levels"},
                {"reps", Kind::Count, 10000, "replications"},
                {"delta", Kind::Real, 0.1, "mesh as a fraction of q(u)"},
                {"limit_a", Kind::Real, 0.05, "limit-process grid step"},
                {"limit_horizon", Kind::Real, 50.0, "limit-process horizon"},
                {"limit_reps", Kind::Count, 100000, "limit-process replications"}}});
  auto gum = std::vector<Field>{
      {"T", Kind::RealList, json::array({200.0, 2000.0, 20000.0}), "time horizons"},
      {"reps", Kind::Count, 2000, "maxima per horizon"},
      {"delta", Kind::Real, 0.1, "mesh as a fraction of q(b_T)"},
      {"H", Kind::OptReal, nullptr, "Pickands constant (estimated when null)"},
      {"batches", Kind::Count, 4, "seed batches for the averaged KS distance"},
      {"berman_horizon", Kind::Real, 1e4, "largest lag of the Berman check"}};
  for (auto& f : pickands_fields()) gum.push_back(f);
  c.push_back({"gumbel", "normalized maxima against the Gumbel law", gum});
  c.push_back({"excursion", "conditional excursions against the limit process",
               {{"u", Kind::RealList, json::array(), "thresholds"},
                {"tails", Kind::RealList, json::array({1e-2, 3e-3, 1e-3}),
                 "one-point tail probabilities; used when u is empty"},
                {"t", Kind::RealList, json::array({0.5, 1.0}), "rescaled times"},
                {"reps", Kind::Count, 2000, "accepted excursions per threshold"},
                {"eta_reps", Kind::Count, 20000, "limit-process draws"},
                {"permutations", Kind::Count, 200, "permutations per KS p-value"},
                {"chunk", Kind::Count, 250, "accepted excursions per work item"}}});
  return c;
}

// ---------------------------------------------------------------------------
// Value conversion
// ---------------------------------------------------------------------------

double parse_real(const std::string& name, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw ConfigError(name + ": not a number: '" + text + "'");
  }
  return v;
}

long long parse_integer(const std::string& name, const std::string& text) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw ConfigError(name + ": not an integer: '" + text + "'");
  }
  return v;
}

json from_flag(const Field& f, const std::vector<std::string>& values) {
  switch (f.kind) {
    case Kind::Int:
      return parse_integer(f.name, values.back());
    case Kind::Count: {
      const auto v = parse_integer(f.name, values.back());
      if (v < 0) throw ConfigError(f.name + " must be nonnegative");
      return static_cast<std::uint64_t>(v);
    }
    case Kind::Real:
      return parse_real(f.name, values.back());
    case Kind::OptReal:
      if (values.back() == "null") return nullptr;
      return parse_real(f.name, values.back());
    case Kind::RealList: {
      json list = json::array();
      for (const auto& v : values) {
        if (!v.empty()) list.push_back(parse_real(f.name, v));
      }
      return list;
    }
    case Kind::Text:
      return values.back();
  }
  return nullptr;
}

json checked(const Field& f, const json& v) {
  const auto fail = [&](const char* what) -> json {
    throw ConfigError(f.name + ": expected " + what + ", got " + v.dump());
  };
  switch (f.kind) {
    case Kind::Int:
      if (!v.is_number_integer()) return fail("an integer");
      return v;
    case Kind::Count:
      if (v.is_number_unsigned()) return v;
      if (v.is_number_integer() && v.get<long long>() >= 0) {
        return v.get<std::uint64_t>();
      }
      return fail("a nonnegative integer");
    case Kind::Real:
      if (!v.is_number()) return fail("a number");
      return v.get<double>();
    case Kind::OptReal:
      if (v.is_null()) return v;
      if (!v.is_number()) return fail("a number or null");
      return v.get<double>();
    case Kind::RealList: {
      if (v.is_number()) return json::array({v.get<double>()});
      if (!v.is_array()) return fail("a list of numbers");
      json list = json::array();
      for (const auto& x : v) {
        if (!x.is_number()) return fail("a list of numbers");
        list.push_back(x.get<double>());
      }
      return list;
    }
    case Kind::Text:
      if (!v.is_string()) return fail("a string");
      return v;
  }
  return v;
}

double real(const json& c, const char* name) { return c.at(name).get<double>(); }
std::uint64_t count(const json& c, const char* name) {
  return c.at(name).get<std::uint64_t>();
}
std::optional<double> optional_real(const json& c, const char* name) {
  if (c.at(name).is_null()) return std::nullopt;
  return c.at(name).get<double>();
}
std::vector<double> reals(const json& c, const char* name) {
  return c.at(name).get<std::vector<double>>();
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

json model_record(const json& v) {
  if (!v.is_object()) throw ConfigError("model records must be objects");
  for (const auto& [key, _] : v.items()) {
    if (key != "family" && key != "C" && key != "alpha" && key != "gamma" &&
        key != "lags" && key != "values") {
      throw ConfigError("model record: unknown field '" + key + "'");
    }
  }
  if (!v.contains("family") || !v["family"].is_string()) {
    throw ConfigError("model record needs a family");
  }
  const auto family = v["family"].get<std::string>();
  const auto number = [&](const char* key) {
    if (!v.contains(key) || !v[key].is_number()) {
      throw ConfigError(family + " model needs numeric '" + key + "'");
    }
    return v[key].get<double>();
  };
  json out = {{"family", family}};
  if (family == "power_exponential") {
    out["C"] = number("C");
    out["alpha"] = number("alpha");
  } else if (family == "generalized_cauchy") {
    out["C"] = number("C");
    out["alpha"] = number("alpha");
    out["gamma"] = number("gamma");
  } else if (family == "tabulated") {
    const Field lags{"lags", Kind::RealList, nullptr, ""};
    const Field values{"values", Kind::RealList, nullptr, ""};
    if (!v.contains("lags") || !v.contains("values")) {
      throw ConfigError("tabulated model needs 'lags' and 'values'");
    }
    out["lags"] = checked(lags, v["lags"]);
    out["values"] = checked(values, v["values"]);
  } else {
    throw ConfigError("unknown covariance family '" + family + "'");
  }
  return out;
}

CovarianceModel to_model(const json& r) {
  const auto family = r.at("family").get<std::string>();
  if (family == "power_exponential") {
    return CovarianceModel::power_exponential(r.at("C"), r.at("alpha"));
  }
  if (family == "generalized_cauchy") {
    return CovarianceModel::generalized_cauchy(r.at("C"), r.at("alpha"), r.at("gamma"));
  }
  return CovarianceModel::tabulated(r.at("lags").get<std::vector<double>>(),
                                    r.at("values").get<std::vector<double>>());
}

std::vector<CovarianceModel> to_models(const json& c) {
  std::vector<CovarianceModel> models;
  for (const auto& r : c.at("models")) models.push_back(to_model(r));
  return models;
}

ModelSpec to_spec(const json& c) {
  ModelSpec spec;
  spec.m = c.at("m").get<int>();
  spec.k = c.at("k").get<int>();
  spec.kappa = real(c, "kappa");
  spec.models = to_models(c);
  if (!spec.models.empty()) {
    spec.alpha = spec.models.front().local_exponent().value_or(0.0);
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string num(std::uint64_t v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }
std::string flag(bool v) { return v ? "1" : "0"; }
std::string text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) {
    if (row.size() != columns.size()) {
      throw std::logic_error("row width does not match the columns");
    }
    rows.push_back(std::move(row));
  }
};

std::string render(const json& header, const Table& table) {
  std::ostringstream os;
  os << "# config: " << header.dump() << "\n";
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    os << (i ? "," : "") << table.columns[i];
  }
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

std::vector<double> thresholds(const json& c, const ModelSpec& spec) {
  auto u = reals(c, "u");
  if (u.empty()) {
    for (double p : reals(c, "tails")) {
      if (!(p > 0.0 && p <= 0.5)) throw ConfigError("tails must lie in (0, 1/2]");
      u.push_back(threshold_for_tail(spec.m, spec.k, spec.kappa, p));
    }
  }
  if (u.empty()) throw ConfigError("give thresholds via u or tails");
  return u;
}

PickandsOptions pickands_options(const json& c) {
  PickandsOptions p;
  p.steps = reals(c, "pickands_steps");
  p.horizon = real(c, "pickands_horizon");
  p.reps = count(c, "pickands_reps");
  return p;
}

Table run_validate_model(const json& c) {
  const int m = c.at("m").get<int>();
  const int k = c.at("k").get<int>();
  const double kappa = real(c, "kappa");
  const auto models = to_models(c);
  if (m < 1 || k < 0) throw ConfigError("need m >= 1 and k >= 0");
  if (models.size() != static_cast<std::size_t>(m + k)) {
    throw ConfigError("expected " + std::to_string(m + k) + " component models");
  }
  const auto grid = Grid::make(real(c, "t_max"),
                               static_cast<int>(count(c, "n")));

  std::string instance_message;
  bool instance_valid = true;
  try {
    to_spec(c);
  } catch (const Error& e) {
    instance_valid = false;
    instance_message = e.what();
  }

  double berman_c = kNaN, berman_final = kNaN;
  bool berman_ok = false;
  std::string berman_message;
  try {
    const auto report = berman_check(models, kappa, k, real(c, "berman_horizon"),
                                     real(c, "berman_tolerance"));
    berman_c = report.c;
    berman_final = report.evidence.empty() ? kNaN : report.evidence.back().second;
    berman_ok = report.satisfied;
  } catch (const Error& e) {
    berman_message = e.what();
  }

  std::vector<double> lags;
  for (int j = 0; j < 12; ++j) lags.push_back(0.1 * std::pow(2.0, -j));

  Table t;
  t.columns = {"component", "family", "C_local", "alpha_local", "fit_residual",
               "min_eigenvalue", "clip_mass", "embeddable", "berman_c",
               "berman_final", "berman_satisfied", "instance_valid", "message"};
  for (std::size_t i = 0; i < models.size(); ++i) {
    std::vector<std::string> notes;
    if (!instance_message.empty()) notes.push_back(instance_message);
    if (!berman_message.empty()) notes.push_back(berman_message);
    LocalExpansion fit{kNaN, kNaN, kNaN};
    try {
      fit = fit_local_expansion(models[i], lags);
    } catch (const Error& e) {
      notes.push_back(e.what());
    }
    double min_eig = kNaN, clip = kNaN;
    bool embeddable = false;
    try {
      const auto e = build_embedding(models[i], grid, real(c, "clip_tolerance"));
      min_eig = e.min_eigenvalue();
      clip = e.clip_mass();
      embeddable = true;
    } catch (const NonEmbeddableError& e) {
      min_eig = e.min_eigenvalue();
      clip = e.clip_mass();
      notes.push_back(e.what());
    } catch (const Error& e) {
      notes.push_back(e.what());
    }
    std::string message;
    for (const auto& n : notes) message += (message.empty() ? "" : "; ") + n;
    t.add({num(static_cast<int>(i)), models[i].family_name(), num(fit.C_local),
           num(fit.alpha_local), num(fit.fit_residual), num(min_eig), num(clip),
           flag(embeddable), num(berman_c), num(berman_final), flag(berman_ok),
           flag(instance_valid), text(message)});
  }
  return t;
}

Table run_tail(const json& c) {
  const int m = c.at("m").get<int>();
  const int k = c.at("k").get<int>();
  const double kappa = real(c, "kappa");
  Table t;
  t.columns = {"m", "k", "kappa", "u", "asymptotic", "oracle", "ratio"};
  for (double u : reals(c, "u")) {
    const auto e = evaluate_tail(m, k, kappa, u, real(c, "tolerance"));
    t.add({num(m), num(k), num(kappa), num(u), num(e.asymptotic), num(e.oracle),
           num(e.ratio)});
  }
  return t;
}

Table run_sup_prob(const json& c, const RngPolicy& policy, unsigned par) {
  const auto spec = to_spec(c);
  SupProbOptions opt;
  opt.delta = real(c, "delta");
  opt.H = optional_real(c, "H");
  opt.K = real(c, "K");
  opt.beta = optional_real(c, "beta");
  opt.pickands = pickands_options(c);
  opt.parallelism = par;
  const auto u = thresholds(c, spec);
  const auto r = experiment_sup_prob(spec, real(c, "T"), u, count(c, "reps"), policy, opt);
  Table t;
  t.columns = {"T", "u", "feasible", "reason", "tail", "empirical", "stderr",
               "ci_low", "ci_high", "asymptotic", "ratio", "out_of_regime",
               "piterbarg", "H", "H_estimated", "mesh", "grid_points", "reps"};
  for (const auto& row : r.rows) {
    t.add({num(r.T), num(row.u), flag(row.feasible), text(row.reason), num(row.tail),
           num(row.empirical.mean), num(row.empirical.stderr), num(row.empirical.ci_low),
           num(row.empirical.ci_high), num(row.asymptotic), num(row.ratio),
           flag(row.out_of_regime), num(row.piterbarg), num(r.H_used),
           flag(r.H_estimated), num(r.mesh), num(r.grid_points), num(r.reps)});
  }
  return t;
}

Table run_pickands(const json& c, const RngPolicy& policy, unsigned par) {
  const auto spec = to_spec(c);
  const auto steps = reals(c, "steps");
  const auto x = extrapolate_pickands(spec, steps, real(c, "horizon"), count(c, "reps"),
                                      policy, par);
  Table t;
  t.columns = {"kind", "a", "J", "reps", "successes", "h_hat", "stderr",
               "ci_low", "ci_high", "second_half_fraction", "truncation_warning",
               "zero_successes", "horizon_ratio"};
  for (const auto& e : x.estimates) {
    t.add({"raw", num(e.a), num(static_cast<std::uint64_t>(e.J)), num(e.reps),
           num(e.successes), num(e.h_hat), num(e.stderr), num(e.ci_low), num(e.ci_high),
           num(e.second_half_fraction), flag(e.truncation_warning),
           flag(e.zero_successes), num(e.horizon_ratio)});
  }
  if (x.estimates.size() >= 2) {
    const auto extrapolated = [&](const char* kind, double v, double se) {
      t.add({kind, num(0.0), "", "", "", num(v), num(se), num(v - 1.959963984540054 * se),
             num(v + 1.959963984540054 * se), "", "", "", ""});
    };
    extrapolated("linear_in_rate", x.linear_in_rate, x.linear_in_rate_stderr);
    extrapolated("linear_in_a", x.linear_in_a, x.linear_in_a_stderr);
  }
  return t;
}

Table run_upsilon(const json& c, const RngPolicy& policy, unsigned par) {
  const LimitConfig config{to_spec(c), real(c, "a"), count(c, "J")};
  const auto u = estimate_upsilon(config, reals(c, "x"), count(c, "reps"), policy, par);
  Table t;
  t.columns = {"x", "raw", "upsilon", "stderr", "ci_low", "ci_high", "reps",
               "mean_sojourn"};
  for (std::size_t i = 0; i < u.x.size(); ++i) {
    t.add({num(u.x[i]), num(u.raw[i]), num(u.upsilon[i]), num(u.stderr[i]),
           num(u.ci_low[i]), num(u.ci_high[i]), num(u.reps), num(u.mean_sojourn)});
  }
  return t;
}

Table run_sojourn(const json& c, const RngPolicy& policy, unsigned par) {
  const auto spec = to_spec(c);
  double u = 0.0;
  if (const auto given = optional_real(c, "u")) {
    u = *given;
  } else if (const auto p = optional_real(c, "tail")) {
    u = threshold_for_tail(spec.m, spec.k, spec.kappa, *p);
  } else {
    throw ConfigError("give a threshold via u or tail");
  }
  SojournOptions opt;
  opt.delta = real(c, "delta");
  opt.limit_a = real(c, "limit_a");
  opt.limit_horizon = real(c, "limit_horizon");
  opt.limit_reps = count(c, "limit_reps");
  opt.parallelism = par;
  const auto r = experiment_sojourn(spec, u, real(c, "t_window"), reals(c, "x"),
                                    count(c, "reps"), policy, opt);
  Table t;
  t.columns = {"u", "v", "tail", "mesh", "reps", "positive", "mean_L", "mean_L_stderr",
               "x", "lhs", "lhs_stderr", "lhs_ci_low", "lhs_ci_high", "upsilon",
               "upsilon_raw", "upsilon_ci_low", "upsilon_ci_high", "ratio", "overlap"};
  for (const auto& row : r.rows) {
    t.add({num(r.u), num(r.v), num(r.tail), num(r.mesh), num(r.reps), num(r.positive),
           num(r.mean_L), num(r.mean_L_stderr), num(row.x), num(row.lhs),
           num(row.lhs_stderr), num(row.lhs_ci_low), num(row.lhs_ci_high),
           num(row.upsilon), num(row.upsilon_raw), num(row.upsilon_ci_low),
           num(row.upsilon_ci_high), num(row.ratio), flag(row.overlap)});
  }
  return t;
}

Table run_gumbel(const json& c, const RngPolicy& policy, unsigned par) {
  const auto spec = to_spec(c);
  GumbelOptions opt;
  opt.delta = real(c, "delta");
  opt.H = optional_real(c, "H");
  opt.pickands = pickands_options(c);
  opt.batches = static_cast<unsigned>(count(c, "batches"));
  opt.berman_horizon = real(c, "berman_horizon");
  opt.parallelism = par;
  const auto r = experiment_gumbel(spec, reals(c, "T"), count(c, "reps"), policy, opt);
  Table t;
  t.columns = {"T", "a_T", "b_T", "K0", "D0", "H", "H_estimated", "mesh",
               "grid_points", "reps", "ks", "ks_batch", "mean", "mean_stderr",
               "mean_ci_low", "mean_ci_high", "variance", "seleznjev",
               "seleznjev_stderr"};
  for (const auto& row : r.rows) {
    t.add({num(row.T), num(row.a_T), num(row.b_T), num(row.K0), num(row.D0),
           num(r.H_used), flag(r.H_estimated), num(row.mesh), num(row.grid_points),
           num(row.reps), num(row.ks), num(row.ks_batch), num(row.normalized.mean),
           num(row.normalized.stderr), num(row.normalized.ci_low),
           num(row.normalized.ci_high), num(row.normalized_variance),
           num(row.seleznjev), num(row.seleznjev_stderr)});
  }
  return t;
}

Table run_excursion(const json& c, const RngPolicy& policy, unsigned par) {
  const auto spec = to_spec(c);
  ExcursionOptions opt;
  opt.eta_reps = count(c, "eta_reps");
  opt.permutations = static_cast<int>(count(c, "permutations"));
  opt.chunk = count(c, "chunk");
  opt.parallelism = par;
  const auto u = thresholds(c, spec);
  const auto r = experiment_excursion(spec, u, reals(c, "t"), count(c, "reps"),
                                      policy, opt);
  Table t;
  t.columns = {"u", "t", "tail", "acceptance_rate", "ks", "p_value",
               "excursion_mean", "excursion_stderr", "eta_mean", "eta_stderr",
               "eta_mean_analytic"};
  // t = 0 rows carry the overshoot w (zeta(0) - u), whose limit is Exp(1).
  for (const auto& o : r.origin) {
    t.add({num(o.u), num(0.0), "", "", "", "", num(o.value.mean), num(o.value.stderr),
           num(1.0), num(0.0), num(1.0)});
  }
  for (const auto& row : r.rows) {
    t.add({num(row.u), num(row.t), num(row.tail), num(row.acceptance_rate), num(row.ks),
           num(row.p_value), num(row.excursion.mean), num(row.excursion.stderr),
           num(row.eta.mean), num(row.eta.stderr), num(row.eta_mean_analytic)});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Resolution and dispatch
// ---------------------------------------------------------------------------

struct Parsed {
  const Command* command = nullptr;
  std::string config_path;
  std::string out_path;
  std::map<std::string, std::vector<std::string>> flags;
};

json load_config_file(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  // A sidecar carries the resolved config under "config".
  if (doc.is_object() && doc.contains("config") && doc["config"].is_object()) {
    doc = doc["config"];
  }
  if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
  if (doc.contains("command") && doc["command"] != command) {
    throw ConfigError("config file is for command " + doc["command"].dump());
  }
  return doc;
}

json resolve(const Parsed& p) {
  const json file =
      p.config_path.empty() ? json::object() : load_config_file(p.config_path, p.command->name);
  auto fields = common_fields();
  for (const auto& f : p.command->fields) fields.push_back(f);

  for (const auto& [key, _] : file.items()) {
    const bool known =
        key == "command" || key == "models" ||
        std::any_of(fields.begin(), fields.end(), [&](const Field& f) { return f.name == key; }) ||
        std::find(std::begin(kModelFields), std::end(kModelFields), key) !=
            std::end(kModelFields);
    if (!known) throw ConfigError("unknown config field '" + key + "'");
  }

  json c = json::object();
  c["command"] = p.command->name;
  for (const auto& f : fields) {
    if (auto it = p.flags.find(f.name); it != p.flags.end()) {
      c[f.name] = from_flag(f, it->second);
    } else if (file.contains(f.name)) {
      c[f.name] = checked(f, file[f.name]);
    } else {
      c[f.name] = f.fallback;
    }
  }

  const int m = c["m"].get<int>();
  const int k = c["k"].get<int>();
  if (m < 1) throw ConfigError("m must be at least 1");
  if (k < 0) throw ConfigError("k must be nonnegative");
  const auto dim = static_cast<std::size_t>(m + k);

  const bool model_flags = std::any_of(
      std::begin(kModelFields), std::end(kModelFields),
      [&](const char* name) { return p.flags.count(name) > 0; });
  json models = json::array();
  if (!model_flags && file.contains("models")) {
    const auto& list = file["models"];
    if (!list.is_array() || (list.size() != dim && list.size() != 1)) {
      throw ConfigError("models must list one record or m + k = " +
                        std::to_string(dim) + " records");
    }
    for (std::size_t i = 0; i < dim; ++i) {
      models.push_back(model_record(list[list.size() == 1 ? 0 : i]));
    }
  } else {
    json record = json::object();
    const auto pick = [&](const char* name, Kind kind, const json& fallback) {
      const Field f{name, kind, fallback, ""};
      if (auto it = p.flags.find(name); it != p.flags.end()) return from_flag(f, it->second);
      if (file.contains(name)) return checked(f, file[name]);
      return fallback;
    };
    record["family"] = pick("family", Kind::Text, "power_exponential");
    record["C"] = pick("C", Kind::Real, 1.0);
    record["alpha"] = pick("alpha", Kind::Real, 1.0);
    if (record["family"] == "generalized_cauchy") {
      record["gamma"] = pick("gamma", Kind::Real, 1.0);
    }
    record = model_record(record);
    for (std::size_t i = 0; i < dim; ++i) models.push_back(record);
  }
  c["models"] = models;
  return c;
}

std::string sidecar_path(const std::string& out) {
  const std::string ext = ".csv";
  if (out.size() > ext.size() && out.compare(out.size() - ext.size(), ext.size(), ext) == 0) {
    return out.substr(0, out.size() - ext.size()) + ".json";
  }
  return out + ".json";
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << content;
  if (!f) throw ConfigError("failed writing '" + path + "'");
}

int report_error(std::ostream& err, const char* category, const std::string& kind,
                 const std::string& message, int code) {
  err << json{{"status", "error"},
              {"category", category},
              {"kind", kind},
              {"message", message},
              {"exit_code", code}}
             .dump()
      << "\n";
  return code;
}

int classify(std::ostream& err, std::exception_ptr e, const std::string& prefix) {
  try {
    std::rethrow_exception(e);
  } catch (const ReplicationError& r) {
    return classify(err, r.cause(), prefix + r.what() + " | ");
  } catch (const ConfigError& c) {
    return report_error(err, "config", c.kind(), prefix + c.what(), kConfigFailure);
  } catch (const NumericError& n) {
    return report_error(err, "numeric", n.kind(), prefix + n.what(), kNumericFailure);
  } catch (const json::exception& j) {
    return report_error(err, "config", "schema", prefix + j.what(), kConfigFailure);
  } catch (const std::exception& x) {
    return report_error(err, "internal", "internal", prefix + x.what(), 1);
  }
  return 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto table = commands();
  CLI::App app{"Extremes of differences of chi-type processes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(CHIEXT_GIT_DESCRIBE));

  Parsed parsed;
  std::map<std::string, std::map<std::string, std::vector<std::string>>> raw;
  std::map<std::string, std::map<std::string, CLI::Option*>> options;
  std::map<std::string, std::string> config_paths, out_paths;
  std::vector<CLI::App*> subs;

  for (const auto& cmd : table) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    subs.push_back(sub);
    sub->add_option("--config", config_paths[cmd.name], "JSON config (or a sidecar)");
    sub->add_option("--out", out_paths[cmd.name],
                    "CSV path; the sidecar goes next to it (.json)");
    auto fields = common_fields();
    for (const auto& f : cmd.fields) fields.push_back(f);
    std::vector<Field> model_fields{{"family", Kind::Text, nullptr, "broadcast model family"},
                                    {"C", Kind::Real, nullptr, "broadcast local coefficient"},
                                    {"alpha", Kind::Real, nullptr, "broadcast exponent"},
                                    {"gamma", Kind::Real, nullptr, "broadcast Cauchy power"}};
    for (const auto& f : model_fields) fields.push_back(f);
    for (const auto& f : fields) {
      auto& slot = raw[cmd.name][f.name];
      const std::string names = f.name == "H" ? "--H,--h-override" : "--" + f.name;
      auto* opt = sub->add_option(names, slot, f.help);
      if (f.kind == Kind::RealList) {
        opt->delimiter(',');
      } else {
        opt->expected(1);
        opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
      }
      options[cmd.name][f.name] = opt;
    }
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return report_error(err, "config", "usage", e.what(), kConfigFailure);
  }

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      parsed.command = &table[i];
    }
    const auto& name = parsed.command->name;
    parsed.config_path = config_paths[name];
    parsed.out_path = out_paths[name];
    for (const auto& [field, opt] : options[name]) {
      if (opt->count() > 0) parsed.flags[field] = raw[name][field];
    }

    const auto started = std::chrono::steady_clock::now();
    const json config = resolve(parsed);
    const RngPolicy policy{count(config, "master_seed"), name};
    const unsigned par = resolve_parallelism(static_cast<unsigned>(
        std::min<std::uint64_t>(count(config, "parallelism"), 4096)));

    Table result;
    if (name == "validate-model") result = run_validate_model(config);
    else if (name == "tail") result = run_tail(config);
    else if (name == "sup-prob") result = run_sup_prob(config, policy, par);
    else if (name == "pickands") result = run_pickands(config, policy, par);
    else if (name == "upsilon") result = run_upsilon(config, policy, par);
    else if (name == "sojourn") result = run_sojourn(config, policy, par);
    else if (name == "gumbel") result = run_gumbel(config, policy, par);
    else result = run_excursion(config, policy, par);

    json header = config;
    for (const char* field : kExecutionFields) header.erase(field);
    const std::string csv = render(header, result);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (parsed.out_path.empty()) {
      out << csv;
    } else {
      write_file(parsed.out_path, csv);
      const json sidecar = {{"command", name},
                            {"config", config},
                            {"csv", parsed.out_path},
                            {"version", CHIEXT_GIT_DESCRIBE},
                            {"runtime_seconds", seconds}};
      write_file(sidecar_path(parsed.out_path), sidecar.dump(2) + "\n");
    }
    return kSuccess;
  } catch (...) {
    return classify(err, std::current_exception(), "");
  }
}

}  // namespace chiext::cli
