#pragma once

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "edgecache/baselines.hpp"
#include "edgecache/trace_io.hpp"

#ifndef EDGECACHE_VERSION
#define EDGECACHE_VERSION "0.1.0"
#endif

namespace edgecache {

inline constexpr const char* kVersion = EDGECACHE_VERSION;

enum class Scenario { sbs, d2d };
enum class SweepVar { c_hat, c_mnats, gamma, xi_user };

inline std::string_view to_string(Scenario s) { return s == Scenario::sbs ? "sbs" : "d2d"; }

inline Scenario parse_scenario(std::string_view s) {
  if (s == "sbs") return Scenario::sbs;
  if (s == "d2d") return Scenario::d2d;
  throw ParseError("scenario", "expected sbs or d2d, got '" + std::string(s) + "'");
}

inline std::string_view to_string(SweepVar v) {
  switch (v) {
    case SweepVar::c_hat: return "C_hat";
    case SweepVar::c_mnats: return "C_mnats";
    case SweepVar::gamma: return "gamma";
    case SweepVar::xi_user: return "xi_user";
  }
  return "?";
}

inline SweepVar parse_sweep_var(std::string_view s) {
  for (SweepVar v : {SweepVar::c_hat, SweepVar::c_mnats, SweepVar::gamma, SweepVar::xi_user})
    if (to_string(v) == s) return v;
  throw ParseError("variable", "unknown sweep variable '" + std::string(s) + "'");
}

struct TraceParams {
  std::size_t num_slots = 20;
  double slot_seconds = 10.0;
  std::size_t num_users = 3;
  std::size_t num_files = 2000;
  double min_length = 0.3;  // Mnats
  double max_length = 150.0;
  double gamma = 1.0;
  double idle_probability = 0.0;
  std::size_t num_traces = 200;
  std::uint64_t seed = 1;
};

struct CostConfig {
  CostKind kind = CostKind::energy;
  double bandwidth_hz = 1e7;  // total; each D2D user gets an even share
  double channel_gain = 1.0;
  double transmit_power_w = 1.0;  // bandwidth cost only
  double price_per_kwh = 0.3;     // energy_cost only
  double incentive_per_mnat = 0.0;
  bool instantaneous_d2d = false;
};

struct SolverConfig {
  double sbs_tol = 1e-4;
  std::size_t sbs_max_iters = 200000;
  double d2d_tol = 1e-9;
  int d2d_max_iters = 300;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::sbs;
  TraceParams trace;
  CostConfig cost;
  std::optional<double> c_hat = 25.0;  // percent of the mean requested data per user
  std::optional<double> c_mnats;       // raw total capacity, overrides c_hat
  SweepVar sweep_var = SweepVar::c_hat;
  std::vector<double> sweep_values = {25.0};
  std::vector<Policy> policies = {std::begin(kAllPolicies), std::end(kAllPolicies)};
  SolverConfig solver;
  std::string out_dir = "results";
};

// ---- configuration ----

namespace harness_detail {

using nlohmann::json;

inline double real_at(const json& obj, const char* key, double fallback) {
  return obj.contains(key) ? detail::number_at(obj.at(key), key) : fallback;
}

inline std::size_t size_at(const json& obj, const char* key, std::size_t fallback) {
  return obj.contains(key) ? detail::count_at(obj.at(key), key) : fallback;
}

inline void require(bool ok, const char* key, const std::string& what) {
  if (!ok) throw ParseError(key, what);
}

}  // namespace harness_detail

inline void validate(const ExperimentConfig& c) {
  using harness_detail::require;
  const auto& t = c.trace;
  require(t.slot_seconds > 0.0 && std::isfinite(t.slot_seconds), "slot_seconds", "must be positive");
  require(t.min_length >= 0.0 && t.max_length >= t.min_length && std::isfinite(t.max_length), "max_length_mnats",
          "need 0 <= min_length_mnats <= max_length_mnats");
  require(std::isfinite(t.gamma) && t.gamma >= 0.0, "gamma", "must be finite and >= 0");
  require(t.idle_probability >= 0.0 && t.idle_probability <= 1.0, "idle_probability", "must lie in [0, 1]");
  require(c.cost.bandwidth_hz > 0.0 && std::isfinite(c.cost.bandwidth_hz), "bandwidth_hz", "must be positive");
  require(c.cost.channel_gain > 0.0, "channel_gain", "must be positive");
  require(c.cost.incentive_per_mnat >= 0.0, "incentive_per_mnat", "must be >= 0");
  require(c.c_hat.has_value() || c.c_mnats.has_value(), "capacity", "need C_hat or C_mnats");
  if (c.c_hat) require(*c.c_hat >= 0.0 && std::isfinite(*c.c_hat), "C_hat", "must be finite and >= 0");
  if (c.c_mnats) require(*c.c_mnats >= 0.0 && std::isfinite(*c.c_mnats), "C_mnats", "must be finite and >= 0");
  require(!c.sweep_values.empty(), "values", "sweep needs at least one value");
  std::set<double> seen;
  for (double v : c.sweep_values) {
    require(std::isfinite(v) && v >= 0.0, "values", "sweep values must be finite and >= 0");
    require(seen.insert(v).second, "values", "duplicate sweep value");
  }
  require(c.sweep_var != SweepVar::xi_user || c.scenario == Scenario::d2d, "variable",
          "xi_user sweeps need the d2d scenario");
  require(!c.policies.empty(), "policies", "need at least one policy");
  require(c.solver.sbs_tol > 0.0 && c.solver.d2d_tol > 0.0, "solver", "tolerances must be positive");
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using namespace harness_detail;
  detail::expect_keys(j, "config", {}, {"scenario", "trace", "cost", "capacity", "sweep", "policies", "solver", "output"});
  ExperimentConfig c;
  if (j.contains("scenario")) {
    require(j["scenario"].is_string(), "scenario", "expected a string");
    c.scenario = parse_scenario(j["scenario"].get<std::string>());
  }
  if (j.contains("trace")) {
    const auto& t = j["trace"];
    detail::expect_keys(t, "trace", {},
                        {"num_slots", "slot_seconds", "num_users", "num_files", "min_length_mnats", "max_length_mnats",
                         "gamma", "idle_probability", "num_traces", "seed"});
    auto& p = c.trace;
    p.num_slots = size_at(t, "num_slots", p.num_slots);
    p.slot_seconds = real_at(t, "slot_seconds", p.slot_seconds);
    p.num_users = size_at(t, "num_users", p.num_users);
    p.num_files = size_at(t, "num_files", p.num_files);
    p.min_length = real_at(t, "min_length_mnats", p.min_length);
    p.max_length = real_at(t, "max_length_mnats", p.max_length);
    p.gamma = real_at(t, "gamma", p.gamma);
    p.idle_probability = real_at(t, "idle_probability", p.idle_probability);
    p.num_traces = size_at(t, "num_traces", p.num_traces);
    if (t.contains("seed")) {
      require(t["seed"].is_number_unsigned() || (t["seed"].is_number_integer() && t["seed"].get<long long>() >= 0),
              "seed", "expected a nonnegative integer");
      p.seed = t["seed"].get<std::uint64_t>();
    }
  }
  if (j.contains("cost")) {
    const auto& k = j["cost"];
    detail::expect_keys(k, "cost", {},
                        {"kind", "bandwidth_hz", "channel_gain", "transmit_power_w", "price_per_kwh",
                         "incentive_per_mnat", "instantaneous_d2d"});
    auto& m = c.cost;
    if (k.contains("kind")) {
      require(k["kind"].is_string(), "kind", "expected a string");
      try {
        m.kind = cost_kind_from_string(k["kind"].get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ParseError("kind", e.what());
      }
      require(m.kind != CostKind::linear_incentive, "kind", "the MBS cost cannot be linear_incentive");
    }
    m.bandwidth_hz = real_at(k, "bandwidth_hz", m.bandwidth_hz);
    m.channel_gain = real_at(k, "channel_gain", m.channel_gain);
    m.transmit_power_w = real_at(k, "transmit_power_w", m.transmit_power_w);
    m.price_per_kwh = real_at(k, "price_per_kwh", m.price_per_kwh);
    m.incentive_per_mnat = real_at(k, "incentive_per_mnat", m.incentive_per_mnat);
    if (k.contains("instantaneous_d2d")) {
      require(k["instantaneous_d2d"].is_boolean(), "instantaneous_d2d", "expected a boolean");
      m.instantaneous_d2d = k["instantaneous_d2d"].get<bool>();
    }
  }
  if (j.contains("capacity")) {
    const auto& k = j["capacity"];
    detail::expect_keys(k, "capacity", {}, {"C_hat", "C_mnats"});
    c.c_hat.reset();
    if (k.contains("C_hat")) c.c_hat = detail::number_at(k["C_hat"], "C_hat");
    if (k.contains("C_mnats")) c.c_mnats = detail::number_at(k["C_mnats"], "C_mnats");
  }
  if (j.contains("sweep")) {
    const auto& k = j["sweep"];
    detail::expect_keys(k, "sweep", {"variable", "values"}, {});
    require(k["variable"].is_string(), "variable", "expected a string");
    c.sweep_var = parse_sweep_var(k["variable"].get<std::string>());
    c.sweep_values = detail::reals_at(k["values"], "values");
  } else {
    // A single point at the configured value of the default sweep variable.
    c.sweep_var = c.c_mnats ? SweepVar::c_mnats : SweepVar::c_hat;
    c.sweep_values = {c.c_mnats ? *c.c_mnats : *c.c_hat};
  }
  if (j.contains("policies")) {
    require(j["policies"].is_array(), "policies", "expected an array");
    c.policies.clear();
    for (const auto& p : j["policies"]) {
      require(p.is_string(), "policies", "expected policy names");
      try {
        c.policies.push_back(parse_policy(p.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw ParseError("policies", e.what());
      }
    }
  }
  if (j.contains("solver")) {
    const auto& k = j["solver"];
    detail::expect_keys(k, "solver", {}, {"sbs_tol", "sbs_max_iters", "d2d_tol", "d2d_max_iters"});
    c.solver.sbs_tol = real_at(k, "sbs_tol", c.solver.sbs_tol);
    c.solver.sbs_max_iters = size_at(k, "sbs_max_iters", c.solver.sbs_max_iters);
    c.solver.d2d_tol = real_at(k, "d2d_tol", c.solver.d2d_tol);
    c.solver.d2d_max_iters = static_cast<int>(size_at(k, "d2d_max_iters", c.solver.d2d_max_iters));
  }
  if (j.contains("output")) {
    const auto& k = j["output"];
    detail::expect_keys(k, "output", {}, {"dir"});
    if (k.contains("dir")) {
      require(k["dir"].is_string(), "dir", "expected a string");
      c.out_dir = k["dir"].get<std::string>();
    }
  }
  validate(c);
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["scenario"] = to_string(c.scenario);
  const auto& t = c.trace;
  j["trace"] = {{"num_slots", t.num_slots},
                {"slot_seconds", t.slot_seconds},
                {"num_users", t.num_users},
                {"num_files", t.num_files},
                {"min_length_mnats", t.min_length},
                {"max_length_mnats", t.max_length},
                {"gamma", t.gamma},
                {"idle_probability", t.idle_probability},
                {"num_traces", t.num_traces},
                {"seed", t.seed}};
  const auto& k = c.cost;
  j["cost"] = {{"kind", to_string(k.kind)},
               {"bandwidth_hz", k.bandwidth_hz},
               {"channel_gain", k.channel_gain},
               {"transmit_power_w", k.transmit_power_w},
               {"price_per_kwh", k.price_per_kwh},
               {"incentive_per_mnat", k.incentive_per_mnat},
               {"instantaneous_d2d", k.instantaneous_d2d}};
  j["capacity"] = nlohmann::json::object();
  if (c.c_hat) j["capacity"]["C_hat"] = *c.c_hat;
  if (c.c_mnats) j["capacity"]["C_mnats"] = *c.c_mnats;
  j["sweep"] = {{"variable", to_string(c.sweep_var)}, {"values", c.sweep_values}};
  j["policies"] = nlohmann::json::array();
  for (Policy p : c.policies) j["policies"].push_back(to_string(p));
  j["solver"] = {{"sbs_tol", c.solver.sbs_tol},
                 {"sbs_max_iters", c.solver.sbs_max_iters},
                 {"d2d_tol", c.solver.d2d_tol},
                 {"d2d_max_iters", c.solver.d2d_max_iters}};
  j["output"] = {{"dir", c.out_dir}};
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("", "malformed JSON in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Identity of everything that shapes the numbers; the output directory is excluded.
inline std::string config_hash(const ExperimentConfig& c) {
  auto j = config_to_json(c);
  j.erase("output");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

// The configuration with one sweep value substituted.
inline ExperimentConfig at_sweep_value(ExperimentConfig c, double value) {
  switch (c.sweep_var) {
    case SweepVar::c_hat:
      c.c_hat = value;
      c.c_mnats.reset();
      break;
    case SweepVar::c_mnats: c.c_mnats = value; break;
    case SweepVar::gamma: c.trace.gamma = value; break;
    case SweepVar::xi_user: c.cost.incentive_per_mnat = value; break;
  }
  return c;
}

// ---- traces and costs ----

inline std::uint64_t trace_seed(std::uint64_t master, std::size_t index) {
  return splitmix64(master ^ splitmix64(0xA5A5A5A5ULL + index));
}

// Catalog lengths depend only on the trace seed, so sweeps over gamma or
// capacity compare the same files.
inline DemandTrace experiment_trace(const ExperimentConfig& c, std::size_t index) {
  const auto& t = c.trace;
  const std::uint64_t seed = trace_seed(t.seed, index);
  Rng rng(seed ^ 0xC0FFEE0DDF00DULL);
  const FileCatalog cat = make_catalog(t.num_files, t.min_length, t.max_length, t.gamma, rng);
  return sample_trace(cat, t.num_slots, t.num_users, seed, t.idle_probability, t.slot_seconds);
}

inline double mean_length(const FileCatalog& cat) {
  double s = 0.0;
  for (double l : cat.lengths) s += l;
  return cat.lengths.empty() ? 0.0 : s / static_cast<double>(cat.lengths.size());
}

// Total cache capacity in Mnats; C_hat is a percentage of N * E[l].
inline double total_capacity(const ExperimentConfig& c, const FileCatalog& cat) {
  if (c.c_mnats) return *c.c_mnats;
  return *c.c_hat * static_cast<double>(c.trace.num_slots) * mean_length(cat) / 100.0;
}

// MBS cost of one link of the given bandwidth.
inline CostModel link_cost(const CostConfig& k, double bandwidth_hz) {
  CostModel m = CostModel::energy(bandwidth_hz, kNatsPerMnat, k.channel_gain);
  m.kind = k.kind;
  m.price_per_kwh = k.price_per_kwh;
  m.fixed_power_w = k.transmit_power_w;
  return m;
}

inline std::string units_for(CostKind k) {
  switch (k) {
    case CostKind::energy: return "J";
    case CostKind::energy_cost: return "$";
    case CostKind::bandwidth: return "Hz*s";
    case CostKind::traffic: return "Mnats";
    case CostKind::linear_incentive: return "$";
  }
  return "?";
}

// Extra rows of the D2D optimal policy: the cost split and the relayed volume.
inline constexpr const char* kMbsCostRow = "optimal.mbs_cost";
inline constexpr const char* kLinkCostRow = "optimal.link_cost";
inline constexpr const char* kVolumeRow = "optimal.d2d_volume";

struct CostSplit {
  double mbs = 0.0;
  double links = 0.0;
  double volume = 0.0;  // Mnats between distinct users
};

inline CostSplit split_cost(const D2dProblem& prob, const D2dSchedule& s) {
  const auto& v = prob.view;
  const std::size_t U = v.num_users;
  const double Ts = v.slot_seconds;
  CostSplit out;
  for (std::size_t n = 0; n < v.num_slots; ++n) {
    for (std::size_t u = 0; u < U; ++u) {
      out.mbs += Ts * eval(prob.mbs_costs[u], std::max(0.0, s.mbs_rates(n, u)));
      for (std::size_t x = 0; x < U; ++x) {
        if (x == u) continue;
        const double b = std::max(0.0, s.d2d_data(n, x, u));
        out.links += Ts * eval(prob.d2d_cost(x, u), b / Ts);
        out.volume += b;
      }
    }
  }
  return out;
}

// ---- statistics ----

// Half-width of the two-sided 95% Student-t interval of the mean.
inline double ci95(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  return boost::math::quantile(dist, 0.975) * sd / std::sqrt(static_cast<double>(n));
}

// ---- results ----

struct ResultRow {
  std::string scenario;
  std::string sweep_var;
  double sweep_value = 0.0;
  std::string policy;
  double mean = 0.0;
  double ci95 = 0.0;
  std::size_t n = 0;
  std::string units;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::size_t nonconverged = 0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct TraceRecord {
  double sweep_value = 0.0;
  std::size_t trace = 0;
  std::uint64_t seed = 0;
  std::string policy;
  double value = 0.0;  // NaN when the policy threw
  bool converged = true;
};

struct SweepResult {
  std::vector<ResultRow> rows;
  std::vector<TraceRecord> traces;
  std::size_t nonconverged = 0;
};

inline std::string format_real(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline constexpr const char* kResultsHeader =
    "scenario,sweep_var,sweep_value,policy,mean,ci95,n,units,seed,config_hash,nonconverged";

inline std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out = kResultsHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += r.scenario + ',' + r.sweep_var + ',' + format_real(r.sweep_value) + ',' + r.policy + ',' +
           format_real(r.mean) + ',' + format_real(r.ci95) + ',' + std::to_string(r.n) + ',' + r.units + ',' +
           std::to_string(r.seed) + ',' + r.config_hash + ',' + std::to_string(r.nonconverged) + '\n';
  }
  return out;
}

namespace harness_detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_real(const std::string& s, const char* key) {
  double x = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ParseError(key, "not a number: '" + s + "'");
  return x;
}

template <typename T>
T parse_uint(const std::string& s, const char* key) {
  T x = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ParseError(key, "not an integer: '" + s + "'");
  return x;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace harness_detail

inline std::vector<ResultRow> parse_results_csv(const std::string& text) {
  using namespace harness_detail;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) throw ParseError("header", "unexpected results header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 11) throw ParseError("row", "expected 11 columns, got " + std::to_string(f.size()));
    ResultRow r;
    r.scenario = f[0];
    r.sweep_var = f[1];
    r.sweep_value = parse_real(f[2], "sweep_value");
    r.policy = f[3];
    r.mean = parse_real(f[4], "mean");
    r.ci95 = parse_real(f[5], "ci95");
    r.n = parse_uint<std::size_t>(f[6], "n");
    r.units = f[7];
    r.seed = parse_uint<std::uint64_t>(f[8], "seed");
    r.config_hash = f[9];
    r.nonconverged = parse_uint<std::size_t>(f[10], "nonconverged");
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<ResultRow> load_results(const std::string& path) {
  return parse_results_csv(harness_detail::read_file(path));
}

inline std::string traces_csv(const std::vector<TraceRecord>& recs) {
  std::string out = "sweep_value,trace,seed,policy,value,converged\n";
  for (const auto& r : recs) {
    out += format_real(r.sweep_value) + ',' + std::to_string(r.trace) + ',' + std::to_string(r.seed) + ',' +
           r.policy + ',' + format_real(r.value) + ',' + (r.converged ? "1" : "0") + '\n';
  }
  return out;
}

// ---- sweep ----

// Runs f(0..count-1) on `jobs` threads; the first exception is rethrown.
template <typename F>
void parallel_for(std::size_t count, unsigned jobs, F&& f) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex m;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard lock(m);
        if (!error) error = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < jobs; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct TraceOutcome {
  std::vector<double> value;  // per configured policy, NaN when the policy threw
  std::vector<bool> converged;
  CostSplit split;
  bool split_valid = false;
};

// Every policy of the configuration on one trace.
inline TraceOutcome evaluate_trace(const ExperimentConfig& c, const DemandTrace& trace) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  TraceOutcome out;
  out.value.assign(c.policies.size(), nan);
  out.converged.assign(c.policies.size(), false);
  const double C = total_capacity(c, trace.catalog);
  const std::size_t U = trace.num_users;
  if (c.scenario == Scenario::sbs) {
    const auto view = build_view(trace);
    const CostModel cost = link_cost(c.cost, c.cost.bandwidth_hz);
    SbsOptions opt;
    opt.tol = c.solver.sbs_tol;
    opt.max_iters = c.solver.sbs_max_iters;
    for (std::size_t k = 0; k < c.policies.size(); ++k) {
      try {
        const Policy p = c.policies[k];
        const auto r = p == Policy::optimal ? optimal(view, cost, C, opt) : run_policy(p, view, cost, C);
        out.value[k] = r.objective;
        out.converged[k] = r.converged;
      } catch (const std::runtime_error&) {
      }
    }
    return out;
  }
  const CostModel mbs = link_cost(c.cost, c.cost.bandwidth_hz / static_cast<double>(U));
  const auto prob = build_problem(trace, std::vector<double>(U, C / static_cast<double>(U)), mbs,
                                  CostModel::linear_incentive(c.cost.incentive_per_mnat, kNatsPerMnat),
                                  c.cost.instantaneous_d2d);
  D2dOptions opt;
  opt.tol = c.solver.d2d_tol;
  opt.max_iters = c.solver.d2d_max_iters;
  for (std::size_t k = 0; k < c.policies.size(); ++k) {
    try {
      const Policy p = c.policies[k];
      if (p == Policy::optimal) {
        const auto r = d2d_optimal(prob, opt);
        out.value[k] = r.schedule.objective;
        out.converged[k] = r.schedule.certificate.converged;
        out.split = split_cost(prob, r.schedule);
        out.split_valid = true;
      } else {
        out.value[k] = run_d2d_policy(p, prob).schedule.objective;
        out.converged[k] = true;
      }
    } catch (const std::runtime_error&) {
    }
  }
  return out;
}

inline ResultRow aggregate(const ExperimentConfig& c, double value, std::string policy, std::string units,
                           const std::vector<double>& xs, std::size_t nonconverged, const std::string& hash) {
  ResultRow r;
  r.scenario = to_string(c.scenario);
  r.sweep_var = to_string(c.sweep_var);
  r.sweep_value = value;
  r.policy = std::move(policy);
  r.units = std::move(units);
  r.seed = c.trace.seed;
  r.config_hash = hash;
  r.nonconverged = nonconverged;
  std::vector<double> ok;
  for (double x : xs)
    if (std::isfinite(x)) ok.push_back(x);
  r.n = ok.size();
  if (!ok.empty()) {
    double s = 0.0;
    for (double x : ok) s += x;  // trace order, independent of scheduling
    r.mean = s / static_cast<double>(ok.size());
  } else {
    r.mean = std::numeric_limits<double>::quiet_NaN();
  }
  r.ci95 = ci95(ok);
  return r;
}

inline SweepResult run_sweep(const ExperimentConfig& cfg, unsigned jobs = 1) {
  validate(cfg);
  const std::size_t V = cfg.sweep_values.size(), T = cfg.trace.num_traces, P = cfg.policies.size();
  std::vector<TraceOutcome> outcomes(V * T);
  std::vector<ExperimentConfig> at;
  for (double v : cfg.sweep_values) at.push_back(at_sweep_value(cfg, v));
  parallel_for(V * T, jobs, [&](std::size_t job) {
    const std::size_t vi = job / T, ti = job % T;
    outcomes[job] = evaluate_trace(at[vi], experiment_trace(at[vi], ti));
  });

  const std::string hash = config_hash(cfg);
  const std::string units = units_for(cfg.cost.kind);
  const bool split = cfg.scenario == Scenario::d2d &&
                     std::find(cfg.policies.begin(), cfg.policies.end(), Policy::optimal) != cfg.policies.end();
  SweepResult res;
  for (std::size_t vi = 0; vi < V; ++vi) {
    const double value = cfg.sweep_values[vi];
    for (std::size_t k = 0; k < P; ++k) {
      std::vector<double> xs(T);
      std::size_t bad = 0;
      for (std::size_t ti = 0; ti < T; ++ti) {
        const auto& o = outcomes[vi * T + ti];
        xs[ti] = o.value[k];
        bad += o.converged[k] ? 0 : 1;
        res.traces.push_back({value, ti, trace_seed(cfg.trace.seed, ti), std::string(to_string(cfg.policies[k])),
                              o.value[k], static_cast<bool>(o.converged[k])});
      }
      res.nonconverged += bad;
      res.rows.push_back(aggregate(cfg, value, std::string(to_string(cfg.policies[k])), units, xs, bad, hash));
    }
    if (!split) continue;
    std::vector<double> mbs(T), links(T), volume(T);
    for (std::size_t ti = 0; ti < T; ++ti) {
      const auto& o = outcomes[vi * T + ti];
      const double nan = std::numeric_limits<double>::quiet_NaN();
      mbs[ti] = o.split_valid ? o.split.mbs : nan;
      links[ti] = o.split_valid ? o.split.links : nan;
      volume[ti] = o.split_valid ? o.split.volume : nan;
    }
    res.rows.push_back(aggregate(cfg, value, kMbsCostRow, units, mbs, 0, hash));
    res.rows.push_back(aggregate(cfg, value, kLinkCostRow, "$", links, 0, hash));
    res.rows.push_back(aggregate(cfg, value, kVolumeRow, "Mnats", volume, 0, hash));
  }
  return res;
}

// Writes results.csv, traces.csv and manifest.json under `dir`.
inline void write_sweep(const ExperimentConfig& cfg, const SweepResult& res, const std::string& dir,
                        double wall_seconds, unsigned jobs) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  harness_detail::write_file((fs::path(dir) / "results.csv").string(), results_csv(res.rows));
  harness_detail::write_file((fs::path(dir) / "traces.csv").string(), traces_csv(res.traces));
  nlohmann::json m;
  m["config"] = config_to_json(cfg);
  m["config_hash"] = config_hash(cfg);
  m["version"] = kVersion;
  m["wall_seconds"] = wall_seconds;
  m["jobs"] = jobs;
  m["rows"] = res.rows.size();
  m["nonconverged"] = res.nonconverged;
  harness_detail::write_file((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
}

// ---- summaries ----

struct SavingsRow {
  std::string scenario;
  double sweep_value = 0.0;
  std::string policy;
  double percent = 0.0;
};

inline bool is_policy_row(const ResultRow& r) { return r.policy.find('.') == std::string::npos; }

// 100 (1 - mean / mean_reference) for every policy row.
inline std::vector<SavingsRow> savings(const std::vector<ResultRow>& rows, std::string_view reference = "no_caching") {
  std::map<std::pair<std::string, double>, double> ref;
  for (const auto& r : rows)
    if (r.policy == reference) ref[{r.scenario, r.sweep_value}] = r.mean;
  std::vector<SavingsRow> out;
  for (const auto& r : rows) {
    if (!is_policy_row(r)) continue;
    const auto it = ref.find({r.scenario, r.sweep_value});
    if (it == ref.end()) {
      throw std::invalid_argument("savings: no '" + std::string(reference) + "' row at " + r.scenario + " " +
                                  format_real(r.sweep_value));
    }
    const double pct = it->second == 0.0 ? 0.0 : 100.0 * (1.0 - r.mean / it->second);
    out.push_back({r.scenario, r.sweep_value, r.policy, pct});
  }
  return out;
}

// ---- plot data ----

enum class Figure { fig5a, fig5b, fig6a, fig6b, fig7 };

inline std::string_view to_string(Figure f) {
  switch (f) {
    case Figure::fig5a: return "fig5a";
    case Figure::fig5b: return "fig5b";
    case Figure::fig6a: return "fig6a";
    case Figure::fig6b: return "fig6b";
    case Figure::fig7: return "fig7";
  }
  return "?";
}

inline Figure parse_figure(std::string_view s) {
  for (Figure f : {Figure::fig5a, Figure::fig5b, Figure::fig6a, Figure::fig6b, Figure::fig7})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown figure '" + std::string(s) + "'");
}

struct PlotPoint {
  double x = 0.0;
  std::string series;
  double y = 0.0;
  double y_err = 0.0;
  std::string axis;  // left or right y-axis

  friend bool operator==(const PlotPoint&, const PlotPoint&) = default;
};

// Long-format points of one figure. Energies become kJ per Hz of the total
// bandwidth; fig7 maps the optimal policy's cost split onto C, E, I and the
// relayed volume V.
inline std::vector<PlotPoint> plot_points(const std::vector<ResultRow>& rows, Figure fig,
                                          double total_bandwidth_hz = 1e7) {
  const bool d2d = fig == Figure::fig5b || fig == Figure::fig6b || fig == Figure::fig7;
  const std::string_view var = fig == Figure::fig7                              ? "xi_user"
                               : (fig == Figure::fig5a || fig == Figure::fig5b) ? "C_hat"
                                                                                : "gamma";
  std::vector<PlotPoint> out;
  for (const auto& r : rows) {
    if (r.scenario != (d2d ? "d2d" : "sbs") || r.sweep_var != var) continue;
    PlotPoint p{r.sweep_value, r.policy, r.mean, r.ci95, "left"};
    if (fig == Figure::fig7) {
      if (r.policy == "optimal") p.series = "C", p.axis = "right";
      else if (r.policy == kMbsCostRow) p.series = "E", p.axis = "right";
      else if (r.policy == kLinkCostRow) p.series = "I";
      else if (r.policy == kVolumeRow) p.series = "V";
      else continue;
    } else {
      if (!is_policy_row(r)) continue;
      if (r.units == "J") {
        p.y /= total_bandwidth_hz * 1e3;
        p.y_err /= total_bandwidth_hz * 1e3;
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline std::string plot_csv(const std::vector<PlotPoint>& pts) {
  std::string out = "x,series,y,y_err,axis\n";
  for (const auto& p : pts) {
    out += format_real(p.x) + ',' + p.series + ',' + format_real(p.y) + ',' + format_real(p.y_err) + ',' + p.axis +
           '\n';
  }
  return out;
}

inline std::vector<PlotPoint> parse_plot_csv(const std::string& text) {
  using namespace harness_detail;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "x,series,y,y_err,axis") throw ParseError("header", "unexpected plot header");
  std::vector<PlotPoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw ParseError("row", "expected 5 columns");
    out.push_back({parse_real(f[0], "x"), f[1], parse_real(f[2], "y"), parse_real(f[3], "y_err"), f[4]});
  }
  return out;
}

}  // namespace edgecache
