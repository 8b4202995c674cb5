// Command-line front end: trace generation, single solves and experiment sweeps.
//
// Exit codes: 0 success, 2 configuration error, 3 some solves did not
// converge (rows are flagged), 4 I/O error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "edgecache/edgecache.hpp"

using namespace edgecache;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNonconverged = 3;
constexpr int kIoError = 4;

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string out;
  std::string scenario;
  unsigned jobs = 1;
};

ExperimentConfig load(const Common& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.has_seed) c.trace.seed = o.seed;
  if (!o.scenario.empty()) c.scenario = parse_scenario(o.scenario);
  if (!o.out.empty()) c.out_dir = o.out;
  validate(c);
  return c;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  if (const auto dir = fs::path(path).parent_path(); !dir.empty()) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  }
  harness_detail::write_file(path, j.dump(1) + "\n");
}

nlohmann::json grid_json(const Grid<double>& g) {
  auto j = nlohmann::json::array();
  for (std::size_t r = 0; r < g.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (std::size_t c = 0; c < g.cols(); ++c) row.push_back(g(r, c));
    j.push_back(row);
  }
  return j;
}

// (slot, owner, requester) entries that are nonzero.
nlohmann::json cube_json(const Cube<double>& q) {
  auto j = nlohmann::json::array();
  for (std::size_t n = 0; n < q.slots(); ++n)
    for (std::size_t x = 0; x < q.users(); ++x)
      for (std::size_t u = 0; u < q.users(); ++u)
        if (q(n, x, u) != 0.0) j.push_back({n, x, u, q(n, x, u)});
  return j;
}

// One policy on one trace; prints a summary and writes schedule.json.
int solve_one(const ExperimentConfig& c, const std::string& trace_path, Policy p, double capacity_override) {
  const DemandTrace trace = load_trace(trace_path);
  const double C = capacity_override >= 0.0 ? capacity_override : total_capacity(c, trace.catalog);
  const std::size_t U = trace.num_users;
  nlohmann::json out;
  out["policy"] = to_string(p);
  out["scenario"] = to_string(c.scenario);
  out["capacity_mnats"] = C;
  out["units"] = units_for(c.cost.kind);
  bool converged = true;
  if (c.scenario == Scenario::sbs) {
    const auto view = build_view(trace);
    const CostModel cost = link_cost(c.cost, c.cost.bandwidth_hz);
    const SbsInstance inst = SbsInstance::from_view(view, C);
    if (p == Policy::optimal) {
      SbsOptions opt;
      opt.tol = c.solver.sbs_tol;
      opt.max_iters = c.solver.sbs_max_iters;
      const auto s = solve_sbs(inst, cost, opt);
      out["rates"] = s.rates;
      out["cached"] = grid_json(s.cached);
      out["objective"] = s.objective;
      out["certificate"] = {{"dual_bound", s.certificate.dual_bound},
                            {"gap", s.certificate.gap},
                            {"iterations", s.certificate.iterations},
                            {"converged", s.certificate.converged},
                            {"polished", s.certificate.polished}};
      converged = s.certificate.converged;
    } else {
      const auto r = run_policy(p, view, cost, C);
      out["rates"] = r.rates;
      out["cached"] = grid_json(r.cached);
      out["objective"] = r.objective;
      out["occupancy"] = r.cache_trace;
    }
  } else {
    const CostModel mbs = link_cost(c.cost, c.cost.bandwidth_hz / static_cast<double>(U));
    const auto prob = build_problem(trace, std::vector<double>(U, C / static_cast<double>(U)), mbs,
                                    CostModel::linear_incentive(c.cost.incentive_per_mnat), c.cost.instantaneous_d2d);
    D2dOptions opt;
    opt.tol = c.solver.d2d_tol;
    opt.max_iters = c.solver.d2d_max_iters;
    const auto r = p == Policy::optimal ? d2d_optimal(prob, opt) : run_d2d_policy(p, prob);
    const auto& s = r.schedule;
    out["mbs_rates"] = grid_json(s.mbs_rates);
    out["d2d_data"] = cube_json(s.d2d_data);
    out["cached"] = cube_json(s.cached);
    out["objective"] = s.objective;
    out["occupancy"] = grid_json(r.cache_trace);
    const auto split = split_cost(prob, s);
    out["mbs_cost"] = split.mbs;
    out["link_cost"] = split.links;
    out["d2d_volume_mnats"] = split.volume;
    if (p == Policy::optimal) {
      out["certificate"] = {{"dual_bound", s.certificate.dual_bound},
                            {"gap", s.certificate.gap},
                            {"kkt_residual", s.certificate.kkt_residual},
                            {"iterations", s.certificate.iterations},
                            {"converged", s.certificate.converged}};
      converged = s.certificate.converged;
    }
  }
  std::printf("%s %s objective %.10g %s\n", std::string(to_string(c.scenario)).c_str(),
              std::string(to_string(p)).c_str(), out["objective"].get<double>(), units_for(c.cost.kind).c_str());
  write_json((fs::path(c.out_dir) / "schedule.json").string(), out);
  return converged ? kOk : kNonconverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint caching and transmission scheduling for edge networks"};
  app.require_subcommand(1);
  Common o;
  auto common = [&o](CLI::App* sub, bool with_jobs) {
    sub->add_option("--config", o.config, "experiment configuration (JSON)")->check(CLI::ExistingFile);
    sub->add_option_function<std::uint64_t>("--seed", [&o](std::uint64_t s) { o.seed = s, o.has_seed = true; },
                                            "master seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--scenario", o.scenario, "sbs or d2d")->check(CLI::IsMember({"sbs", "d2d"}));
    if (with_jobs) sub->add_option("--jobs", o.jobs, "worker threads, 0 for all cores");
  };

  auto* gen = app.add_subcommand("gen-trace", "sample traces of the configured experiment");
  common(gen, false);
  std::size_t count = 1;
  double sweep_value = -1.0;
  gen->add_option("--count", count, "number of traces")->check(CLI::PositiveNumber);
  gen->add_option("--sweep-value", sweep_value, "substitute this value of the sweep variable");

  auto* solve = app.add_subcommand("solve", "optimal schedule for one trace");
  auto* base = app.add_subcommand("baseline", "baseline schedule for one trace");
  std::string trace_path, policy_name = "lru";
  double capacity = -1.0;
  for (auto* sub : {solve, base}) {
    common(sub, false);
    sub->add_option("--trace", trace_path, "trace JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--capacity", capacity, "total cache capacity in Mnats (default from the config)");
  }
  base->add_option("--policy", policy_name, "no_caching, lru, pdca or lca");

  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep; writes results.csv, traces.csv, manifest.json");
  common(sweep, true);

  auto* summarize = app.add_subcommand("summarize", "savings of every policy against a reference");
  std::string results_path, reference = "no_caching";
  summarize->add_option("--results", results_path, "results.csv")->required()->check(CLI::ExistingFile);
  summarize->add_option("--reference", reference, "reference policy");
  summarize->add_option("--out", o.out, "also write savings.csv here");

  auto* plot = app.add_subcommand("plotdata", "plot-ready long-format CSV for one figure");
  std::string figure;
  double bandwidth = 1e7;
  plot->add_option("--results", results_path, "results.csv")->required()->check(CLI::ExistingFile);
  plot->add_option("--figure", figure, "fig5a, fig5b, fig6a, fig6b or fig7")
      ->required()
      ->check(CLI::IsMember({"fig5a", "fig5b", "fig6a", "fig6b", "fig7"}));
  plot->add_option("--bandwidth", bandwidth, "total bandwidth in Hz for the kJ/Hz normalization");
  plot->add_option("--out", o.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) {
      ExperimentConfig c = load(o);
      if (sweep_value >= 0.0) c = at_sweep_value(c, sweep_value);
      for (std::size_t i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "trace_%03zu.json", i);
        const auto path = fs::path(c.out_dir) / name;
        std::error_code ec;
        fs::create_directories(c.out_dir, ec);
        if (ec) throw IoError("cannot create " + c.out_dir + ": " + ec.message());
        save_trace(experiment_trace(c, i), path.string());
        std::printf("%s\n", path.string().c_str());
      }
      return kOk;
    }
    if (*solve) return solve_one(load(o), trace_path, Policy::optimal, capacity);
    if (*base) {
      Policy p;
      try {
        p = parse_policy(policy_name);
      } catch (const std::invalid_argument& e) {
        throw ParseError("policy", e.what());
      }
      return solve_one(load(o), trace_path, p, capacity);
    }
    if (*sweep) {
      const ExperimentConfig c = load(o);
      const auto t0 = std::chrono::steady_clock::now();
      const auto res = run_sweep(c, o.jobs);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      write_sweep(c, res, c.out_dir, wall, o.jobs);
      std::printf("%zu rows -> %s (%.1f s)\n", res.rows.size(), c.out_dir.c_str(), wall);
      if (res.nonconverged > 0) {
        std::fprintf(stderr, "warning: %zu solves did not converge; see the nonconverged column\n",
                     res.nonconverged);
        return kNonconverged;
      }
      return kOk;
    }
    if (*summarize) {
      const auto rows = load_results(results_path);
      std::string csv = "scenario,sweep_value,policy,savings_percent\n";
      for (const auto& s : savings(rows, reference)) {
        std::printf("%-4s %10s %-12s %8.2f%%\n", s.scenario.c_str(), format_real(s.sweep_value).c_str(),
                    s.policy.c_str(), s.percent);
        csv += s.scenario + ',' + format_real(s.sweep_value) + ',' + s.policy + ',' + format_real(s.percent) + '\n';
      }
      if (!o.out.empty()) {
        std::error_code ec;
        fs::create_directories(o.out, ec);
        if (ec) throw IoError("cannot create " + o.out + ": " + ec.message());
        harness_detail::write_file((fs::path(o.out) / "savings.csv").string(), csv);
      }
      return kOk;
    }
    if (*plot) {
      const auto pts = plot_points(load_results(results_path), parse_figure(figure), bandwidth);
      const std::string dir = o.out.empty() ? "." : o.out;
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
      const auto path = fs::path(dir) / (figure + ".csv");
      harness_detail::write_file(path.string(), plot_csv(pts));
      std::printf("%zu points -> %s\n", pts.size(), path.string().c_str());
      return kOk;
    }
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIoError;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kOk;
}
