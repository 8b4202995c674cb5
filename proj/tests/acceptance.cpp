// Acceptance run: prints PASS or FAIL for each of the ten criteria and exits
// nonzero if any fails. Takes tens of minutes on a single core.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgecache/edgecache.hpp"
#include "sbs_oracle.hpp"
#include "test_util.hpp"

using namespace edgecache;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::max(std::abs(a), std::abs(b))); }

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (notes.size() < 12) notes.push_back("violated: " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

const ResultRow& row(const std::vector<ResultRow>& rows, double value, std::string_view policy) {
  for (const auto& r : rows)
    if (r.sweep_value == value && r.policy == policy) return r;
  throw std::logic_error("missing row " + std::string(policy));
}

// ---- 1 ----

Outcome sbs_oracle_equivalence() {
  Outcome o;
  const auto t0 = Clock::now();
  const CostModel g = CostModel::energy(1.0);
  std::uint64_t seed = 10000;
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t N = 2 + static_cast<std::size_t>(i % 3);
    const std::size_t U = 1 + static_cast<std::size_t>(i % 2);
    const std::size_t F = 1 + static_cast<std::size_t>((i / 2) % 3);
    DemandTrace t;
    do t = test::random_trace(seed++, N, U, F);
    while (test::active_cells(build_view(t)).size() > 3);
    const auto v = build_view(t);
    const double C = 0.25 + 0.5 * (i % 7);
    const auto s = solve_sbs(v, C, g);
    const double want = test::grid_oracle(v, C, g, 50).objective;
    worst = std::max(worst, rel(s.objective, want));
    o.check(rel(s.objective, want) <= 1e-3, "instance " + std::to_string(i) + " off the grid oracle");
    o.check(s.certificate.converged, "instance " + std::to_string(i) + " not certified");
  }
  const double secs = seconds_since(t0);
  o.check(secs < 60.0, "runtime over one minute");
  o.note("50 instances, worst relative error " + fmt("%.2e", worst) + ", " + fmt("%.1f s", secs));
  return o;
}

// ---- 2 ----

Outcome d2d_oracle_equivalence() {
  Outcome o;
  const auto t0 = Clock::now();
  std::ifstream in(std::string(EDGECACHE_TEST_DATA) + "/d2d_oracle_cases.json");
  if (!in) {
    o.check(false, "oracle data missing");
    return o;
  }
  const auto doc = nlohmann::json::parse(in);
  std::size_t used = 0;
  double worst = 0.0, worst_kkt = 0.0;
  for (const auto& c : doc["cases"]) {
    const auto rows = c["requests"].get<std::vector<std::vector<int>>>();
    if (rows.front().size() != 2) continue;
    ++used;
    const auto t = test::make_trace(rows, c["lengths"].get<std::vector<double>>(), c["slot_seconds"].get<double>());
    const auto mbs = c["mbs"]["kind"] == "traffic" ? CostModel::traffic()
                                                    : CostModel::energy(c["mbs"]["bandwidth"].get<double>());
    const auto p = build_problem(t, c["capacities"].get<std::vector<double>>(), mbs,
                                 CostModel::linear_incentive(c["xi"].get<double>(), kNatsPerMnat),
                                 c["instantaneous"].get<bool>());
    const auto s = solve_d2d(p);
    const double want = c["objective"].get<double>();
    const double err = std::abs(s.objective - want) / std::max(1.0, std::abs(want));
    const double kkt = check_kkt(p, s).max();
    worst = std::max(worst, err);
    worst_kkt = std::max(worst_kkt, kkt);
    const std::string name = c["name"].get<std::string>();
    o.check(err <= 1e-3, name + " off the convex oracle");
    o.check(kkt <= 1e-4, name + " KKT residual " + fmt("%.2e", kkt));
  }
  const double secs = seconds_since(t0);
  o.check(used == 30, "expected 30 two-user cases, found " + std::to_string(used));
  o.check(secs < 120.0, "runtime over two minutes");
  o.note(std::to_string(used) + " instances, worst relative error " + fmt("%.2e", worst) + ", worst KKT " +
         fmt("%.2e", worst_kkt) + ", " + fmt("%.1f s", secs));
  return o;
}

// ---- 3 ----

Outcome duality_certificates() {
  Outcome o;
  ExperimentConfig c;
  double worst_gap = 0.0, slowest = 0.0;
  int solves = 0;
  for (double c_hat : {10.0, 25.0}) {
    c.c_hat = c_hat;
    for (std::size_t i = 0; i < 10; ++i) {
      const auto t = experiment_trace(c, i);
      const double C = total_capacity(c, t.catalog);
      auto t0 = Clock::now();
      const auto s = solve_sbs(build_view(t), C, link_cost(c.cost, c.cost.bandwidth_hz));
      slowest = std::max(slowest, seconds_since(t0));
      const double tol = 1e-9 * std::abs(s.objective);
      o.check(s.objective >= s.certificate.dual_bound - tol, "SBS objective below its dual bound");
      o.check(s.certificate.gap <= 1e-3 * s.objective, "SBS gap above 1e-3");
      worst_gap = std::max(worst_gap, s.certificate.gap / s.objective);

      const std::size_t U = t.num_users;
      const auto p = build_problem(t, std::vector<double>(U, C / static_cast<double>(U)),
                                   link_cost(c.cost, c.cost.bandwidth_hz / static_cast<double>(U)),
                                   CostModel::linear_incentive(0.0));
      t0 = Clock::now();
      const auto d = solve_d2d(p);
      slowest = std::max(slowest, seconds_since(t0));
      o.check(d.objective >= d.certificate.dual_bound - 1e-9 * std::abs(d.objective),
              "D2D objective below its dual bound");
      o.check(d.certificate.gap <= 1e-3 * d.objective, "D2D gap above 1e-3");
      o.check(d.certificate.converged, "D2D solve not converged");
      worst_gap = std::max(worst_gap, d.certificate.gap / d.objective);
      solves += 2;
    }
  }
  o.check(slowest < 5.0, "a single solve took " + fmt("%.2f s", slowest));
  o.note(std::to_string(solves) + " full-size solves, worst gap/objective " + fmt("%.2e", worst_gap) +
         ", slowest " + fmt("%.3f s", slowest));
  return o;
}

// ---- 4 ----

Outcome headline(Scenario s, double target) {
  Outcome o;
  const auto t0 = Clock::now();
  ExperimentConfig c;
  c.scenario = s;
  c.c_hat = 25.0;
  c.sweep_values = {25.0};
  c.trace.num_traces = 200;
  const auto res = run_sweep(c, 0);
  const auto& rows = res.rows;
  const double nc = row(rows, 25.0, "no_caching").mean;
  const double opt = row(rows, 25.0, "optimal").mean;
  const double pct = 100.0 * (1.0 - opt / nc);
  o.check(std::abs(pct - target) <= 8.0, "savings " + fmt("%.2f%%", pct) + " outside the band");
  for (const char* p : {"lca", "pdca", "lru"}) {
    const double m = row(rows, 25.0, p).mean;
    o.check(opt < m, std::string("optimal not below ") + p);
    o.check(m < nc, std::string(p) + " not below no_caching");
  }
  o.check(res.nonconverged == 0, std::to_string(res.nonconverged) + " nonconverged solves");
  std::string means;
  for (Policy p : kAllPolicies)
    means += std::string(to_string(p)) + "=" + fmt("%.4g", row(rows, 25.0, to_string(p)).mean) + " ";
  o.note(std::string(to_string(s)) + ": savings " + fmt("%.2f%%", pct) + " (target " + fmt("%.2f", target) +
         " +- 8), 200 traces, " + fmt("%.0f s", seconds_since(t0)));
  o.note("means (J): " + means);
  return o;
}

// ---- 5 ----

Outcome popularity_crossing() {
  Outcome o;
  const auto t0 = Clock::now();
  ExperimentConfig c;
  c.c_hat = 10.0;
  c.trace.num_traces = 100;
  c.sweep_var = SweepVar::gamma;
  c.sweep_values = {0.0, 0.5, 1.0, 1.5, 2.0};
  const auto rows = run_sweep(c, 0).rows;
  const double p0 = row(rows, 0.0, "pdca").mean, l0 = row(rows, 0.0, "lca").mean;
  const double p2 = row(rows, 2.0, "pdca").mean, l2 = row(rows, 2.0, "lca").mean;
  o.check(p0 < l0, "PDCA not below LCA at gamma 0");
  o.check(l2 < p2, "LCA not below PDCA at gamma 2");
  o.note("gamma 0: pdca " + fmt("%.4g", p0) + " lca " + fmt("%.4g", l0) + "; gamma 2: pdca " + fmt("%.4g", p2) +
         " lca " + fmt("%.4g", l2));

  // A single user sees no repeated requests within a slot, so neither policy can exploit skew.
  c.trace.num_users = 1;
  c.policies = {Policy::no_caching, Policy::pdca};
  const auto single = run_sweep(c, 0).rows;
  for (const char* p : {"no_caching", "pdca"}) {
    const auto& base = row(single, 0.0, p);
    double spread = 0.0;
    for (double g : c.sweep_values) {
      const auto& r = row(single, g, p);
      o.check(std::abs(r.mean - base.mean) <= r.ci95 + base.ci95,
              std::string(p) + " moves with gamma at U=1 (gamma " + fmt("%g", g) + ")");
      spread = std::max(spread, std::abs(r.mean - base.mean) / (r.ci95 + base.ci95));
    }
    o.note(std::string("U=1 ") + p + ": largest |mean shift| / (ci + ci) = " + fmt("%.2f", spread));
  }
  o.note(fmt("%.0f s", seconds_since(t0)));
  return o;
}

// ---- 6 ----

Outcome incentive_shape() {
  Outcome o;
  const auto t0 = Clock::now();
  ExperimentConfig c;
  c.scenario = Scenario::d2d;
  c.cost.kind = CostKind::energy_cost;
  c.cost.price_per_kwh = 0.3;
  c.c_hat = 10.0;
  c.trace.num_traces = 100;
  c.sweep_var = SweepVar::xi_user;
  c.sweep_values = {0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0};
  c.policies = {Policy::optimal};
  const auto pts = plot_points(run_sweep(c, 0).rows, Figure::fig7);
  std::map<std::string, std::vector<double>> y;
  for (const auto& p : pts) y[p.series].push_back(p.y);
  const auto& C = y["C"];
  const auto& I = y["I"];
  const auto& V = y["V"];
  const std::size_t K = c.sweep_values.size();
  o.check(C.size() == K && I.size() == K && V.size() == K, "missing series");
  if (!o.pass) return o;
  for (std::size_t k = 1; k < K; ++k) {
    o.check(C[k] >= C[k - 1] - 1e-6 * C[k], "C decreases at xi " + fmt("%g", c.sweep_values[k]));
    o.check(V[k] <= V[k - 1] + 1e-6 * V[0], "V increases at xi " + fmt("%g", c.sweep_values[k]));
  }
  o.check(*std::max_element(V.begin(), V.end()) == V[0], "relayed volume not maximal at xi 0");
  o.check(V[0] > 0.0, "no relaying at xi 0");
  o.check(rel(C[K - 1], C[K - 2]) <= 1e-6, "C not flat at large xi");
  o.check(I[K - 1] <= 1e-6 * C[K - 1], "incentives not zero at large xi");
  const auto peak = std::max_element(I.begin(), I.end()) - I.begin();
  std::string series;
  for (std::size_t k = 0; k < K; ++k)
    series += fmt("%g", c.sweep_values[k]) + ":" + fmt("%.1f", C[k]) + "/" + fmt("%.1f", I[k]) + "/" +
              fmt("%.1f", V[k]) + " ";
  o.note("xi:C/I/V " + series);
  o.note("incentives peak at xi " + fmt("%g", c.sweep_values[static_cast<std::size_t>(peak)]) + ", " +
         fmt("%.0f s", seconds_since(t0)));
  return o;
}

// ---- 7 ----

Outcome taut_string_correctness() {
  Outcome o;
  Rng rng(777);
  const auto g = CostModel::energy(2.0);
  int tunnels = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t N = 2 + static_cast<std::size_t>(trial % 12);
    std::vector<double> lo(N + 1, 0.0), hi(N + 1, 0.0);
    hi[0] = rng.uniform(0.0, 3.0);
    for (std::size_t n = 1; n <= N; ++n) {
      lo[n] = lo[n - 1] + (rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.0, 4.0));
      hi[n] = std::max(lo[n] + rng.uniform(0.0, 3.0), hi[n - 1]);
    }
    const CumulativeCurve L{lo, 1.0}, H{hi, 1.0};
    const auto ts = taut_string(L, H);
    const auto& D = ts.departure;
    const std::string id = "tunnel " + std::to_string(trial);
    o.check(std::abs(D[N] - lo[N]) <= 1e-9 && D[0] == 0.0, id + " ends not tied");
    for (std::size_t n = 1; n < N; ++n) {
      o.check(D[n] >= lo[n] - 1e-9 && D[n] <= hi[n] + 1e-9, id + " leaves the tunnel");
      const double dr = ts.rates[n] - ts.rates[n - 1];
      if (dr > 1e-9) o.check(std::abs(D[n] - hi[n]) <= 1e-9, id + " rate rises off the upper envelope");
      if (dr < -1e-9) o.check(std::abs(D[n] - lo[n]) <= 1e-9, id + " rate falls off the lower envelope");
    }
    const double best = schedule_cost(g, ts.rates, 1.0);
    std::vector<double> Dr(N + 1), r(N);
    for (int k = 0; k < 1000; ++k) {
      Dr[0] = 0.0;
      Dr[N] = lo[N];
      for (std::size_t n = 1; n < N; ++n) {
        const double a = std::max(lo[n], Dr[n - 1]);
        const double b = std::min(hi[n], lo[N]);
        Dr[n] = a + rng.uniform() * std::max(0.0, b - a);
      }
      for (std::size_t n = 0; n < N; ++n) r[n] = std::max(0.0, Dr[n + 1] - Dr[n]);
      if (best > schedule_cost(g, r, 1.0) + 1e-9) {
        o.check(false, id + " beaten by a random curve");
        break;
      }
    }
    ++tunnels;
  }
  o.note(std::to_string(tunnels) + " tunnels, 1000 random feasible curves each");
  return o;
}

// ---- 8 ----

Outcome sub_slot_refinement() {
  Outcome o;
  const auto g = CostModel::energy(1.0);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = test::random_trace(4000 + seed, 6, 1 + seed % 3, 4);
    const double C = 0.5 + static_cast<double>(seed % 5);
    const double base = solve_sbs(build_view(t), C, g).objective;
    for (std::size_t k : {2u, 4u}) {
      const double fine = solve_sbs(build_view(split_slots(t, k)), C, g).objective;
      worst = std::max(worst, rel(fine, base));
      o.check(rel(fine, base) <= 1e-4, "seed " + std::to_string(seed) + " k=" + std::to_string(k));
    }
  }
  o.note("20 instances, worst relative change " + fmt("%.2e", worst));
  return o;
}

// ---- 9 ----

Outcome structural_invariants() {
  Outcome o;
  const double W = 3.0;
  const auto sbs_cost = CostModel::energy(W);
  const auto free_links = CostModel::linear_incentive(0.0);
  auto d2d = [&](const DemandTrace& t, double C) {
    const std::size_t U = t.num_users;
    return build_problem(t, std::vector<double>(U, C / static_cast<double>(U)),
                         CostModel::energy(W / static_cast<double>(U)), free_links);
  };
  int checks = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto t = test::random_trace(7000 + i, 6, 2 + i % 2, 4, 0.5, 3.0, 1.0, 0.0, 1.0);
    const auto v = build_view(t);
    const std::string id = "trace " + std::to_string(i);

    double prev_s = INFINITY, prev_d = INFINITY;
    for (double C : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      const double s = solve_sbs(v, C, sbs_cost).objective;
      const double d = solve_d2d(d2d(t, C)).objective;
      o.check(s <= prev_s * (1 + 1e-6), id + " SBS optimum rises with capacity");
      o.check(d <= prev_d * (1 + 1e-6), id + " D2D optimum rises with capacity");
      o.check(s <= d * (1 + 1e-6), id + " SBS caching worse than user caching at C=" + fmt("%g", C));
      prev_s = s, prev_d = d;
      checks += 3;
    }

    for (double C : {0.0, 2.0}) {
      const double so = optimal(v, sbs_cost, C).objective;
      const double snc = no_caching(v, sbs_cost).objective;
      const auto prob = d2d(t, C);
      const double dopt = d2d_optimal(prob).schedule.objective;
      const double dnc = d2d_no_caching(prob).schedule.objective;
      for (Policy p : kAllPolicies) {
        const double sv = run_policy(p, v, sbs_cost, C).objective;
        const double dv = run_d2d_policy(p, prob).schedule.objective;
        o.check(so <= sv * (1 + 1e-6), id + " SBS optimal above " + std::string(to_string(p)));
        o.check(dopt <= dv * (1 + 1e-6), id + " D2D optimal above " + std::string(to_string(p)));
        if (C == 0.0) {
          o.check(rel(sv, snc) <= 1e-6, id + " SBS " + std::string(to_string(p)) + " differs at C=0");
          o.check(rel(dv, dnc) <= 1e-6, id + " D2D " + std::string(to_string(p)) + " differs at C=0");
        }
        checks += C == 0.0 ? 4 : 2;
      }
    }
  }
  o.note(std::to_string(checks) + " comparisons on 20 traces");
  return o;
}

// ---- 10 ----

int run_cli(const std::string& args) {
  const int status = std::system((std::string(EDGECACHE_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Outcome o;
  const auto dir = fs::temp_directory_path() / ("edgecache_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (Scenario s : {Scenario::sbs, Scenario::d2d}) {
    ExperimentConfig c;
    c.scenario = s;
    c.trace.num_traces = 12;
    c.sweep_values = {0.0, 10.0, 25.0};
    const auto cfg = dir / (std::string(to_string(s)) + ".json");
    std::ofstream(cfg) << config_to_json(c).dump(2);
    std::vector<std::string> outputs;
    for (const char* jobs : {"1", "4", "1", "3"}) {
      const auto out = dir / (std::string(to_string(s)) + "_" + std::to_string(outputs.size()));
      const int code = run_cli("sweep --config " + cfg.string() + " --jobs " + jobs + " --out " + out.string());
      o.check(code == 0, "sweep exited with " + std::to_string(code));
      outputs.push_back(slurp(out / "results.csv"));
    }
    for (const auto& x : outputs) o.check(!x.empty() && x == outputs[0], std::string(to_string(s)) + " CSVs differ");
    o.note(std::string(to_string(s)) + ": 4 runs with --jobs 1,4,1,3, " + std::to_string(outputs[0].size()) +
           " bytes each");
  }
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "oracle equivalence, SBS", sbs_oracle_equivalence},
      {2, "oracle equivalence, D2D", d2d_oracle_equivalence},
      {3, "duality certificate", duality_certificates},
      {4, "headline savings",
       [] {
         auto a = headline(Scenario::sbs, 53.59);
         const auto b = headline(Scenario::d2d, 61.78);
         a.pass = a.pass && b.pass;
         a.notes.insert(a.notes.end(), b.notes.begin(), b.notes.end());
         return a;
       }},
      {5, "popularity crossing", popularity_crossing},
      {6, "incentive sweep shape", incentive_shape},
      {7, "taut string", taut_string_correctness},
      {8, "sub-slot refinement", sub_slot_refinement},
      {9, "structural invariants", structural_invariants},
      {10, "determinism", determinism},
  };
  int failed = 0;
  const auto t0 = Clock::now();
  for (const auto& c : all) {
    const auto t1 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    std::printf("criterion %2d %-26s %s (%.1f s)\n", c.id, c.name, o.pass ? "PASS" : "FAIL", seconds_since(t1));
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed in %.0f s\n", static_cast<int>(all.size()) - failed, all.size(),
              seconds_since(t0));
  return failed == 0 ? 0 : 1;
}
