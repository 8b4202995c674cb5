#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "edgecache/convex_program.hpp"
#include "edgecache/cost.hpp"
#include "edgecache/demand.hpp"
#include "edgecache/envelope.hpp"

namespace edgecache {

// Holder cells with positive length, in slot order. Each entry may be the
// cached source for exactly one later entry (its successor in slot `next`).
struct SbsInstance {
  struct Entry {
    std::size_t slot = 0;
    std::size_t user = 0;
    double amount = 0.0;        // T_s s, Mnats
    int prev = -1;              // entry whose cached data reduces this demand
    std::size_t next = 0;       // successor slot, == num_slots when none
  };

  std::size_t num_slots = 0;
  std::size_t num_users = 0;
  double slot_seconds = 1.0;
  double capacity = 0.0;
  std::vector<double> slot_amount;  // sum_u T_s s_nu
  std::vector<double> cum_amount;   // S_n, prefix of slot_amount (size N)
  std::vector<Entry> entries;
  double rate_cap = 0.0;            // no feasible rate exceeds this

  static SbsInstance from_view(const DemandView& view, double capacity) {
    if (!(capacity >= 0.0) || !std::isfinite(capacity)) {
      throw std::invalid_argument("sbs: capacity must be finite and >= 0");
    }
    SbsInstance inst;
    inst.num_slots = view.num_slots;
    inst.num_users = view.num_users;
    inst.slot_seconds = view.slot_seconds;
    inst.capacity = capacity;
    inst.slot_amount.assign(view.num_slots, 0.0);
    Grid<int> index(view.num_slots, view.num_users, -1);
    for (std::size_t n = 0; n < view.num_slots; ++n) {
      for (std::size_t u = 0; u < view.num_users; ++u) {
        const double amount = view.amount(n, u);
        if (!view.is_holder(n, u) || amount <= 0.0) continue;
        Entry e;
        e.slot = n;
        e.user = u;
        e.amount = amount;
        e.next = static_cast<std::size_t>(view.next(n, u));
        const RequestRef p = view.prev(n, u);
        if (p.valid()) e.prev = index(static_cast<std::size_t>(p.slot), static_cast<std::size_t>(p.user));
        index(n, u) = static_cast<int>(inst.entries.size());
        inst.entries.push_back(e);
        inst.slot_amount[n] += amount;
      }
    }
    inst.cum_amount.resize(view.num_slots);
    double acc = 0.0;
    for (std::size_t n = 0; n < view.num_slots; ++n) inst.cum_amount[n] = acc += inst.slot_amount[n];
    inst.rate_cap = (capacity + acc) / view.slot_seconds;
    return inst;
  }

  double total_amount() const { return cum_amount.empty() ? 0.0 : cum_amount.back(); }

  Grid<double> to_grid(const std::vector<double>& q) const {
    Grid<double> g(num_slots, num_users, 0.0);
    for (std::size_t k = 0; k < entries.size(); ++k) g(entries[k].slot, entries[k].user) = q[k];
    return g;
  }

  std::vector<double> from_grid(const Grid<double>& g) const {
    std::vector<double> q(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) q[k] = g(entries[k].slot, entries[k].user);
    return q;
  }

  // Tunnel for cached amounts q (entry order).
  std::pair<CumulativeCurve, CumulativeCurve> tunnel(const std::vector<double>& q) const {
    CumulativeCurve a{std::vector<double>(num_slots + 1, 0.0), slot_seconds};
    CumulativeCurve b{std::vector<double>(num_slots + 1, capacity), slot_seconds};
    std::vector<double> a_inc(slot_amount), b_inc(slot_amount);
    for (std::size_t k = 0; k < entries.size(); ++k) {
      b_inc[entries[k].slot] -= q[k];
      if (entries[k].prev >= 0) a_inc[entries[k].slot] -= q[static_cast<std::size_t>(entries[k].prev)];
    }
    for (std::size_t n = 0; n < num_slots; ++n) {
      a.values[n + 1] = a.values[n] + a_inc[n];
      b.values[n + 1] = b.values[n] + b_inc[n];
    }
    return {std::move(a), std::move(b)};
  }
};

struct SbsCertificate {
  double dual_bound = -std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
  bool polished = false;  // interior-point refinement was needed
};

struct SbsSchedule {
  std::vector<double> rates;  // Mnats/s
  Grid<double> cached;        // Mnats, (slot, user)
  double objective = 0.0;
  bool feasible = false;
  SbsCertificate certificate;
};

enum class StepSchedule { inverse_sqrt, polyak };

struct SbsOptions {
  std::size_t max_iters = 200000;
  double tol = 1e-4;
  double step0 = 0.0;  // 0 selects the automatic scale
  StepSchedule schedule = StepSchedule::inverse_sqrt;
  std::size_t check_every = 1000;
  std::size_t stall_checks = 20;  // checks without a 10% gap reduction before polishing
  bool polish = true;
};

struct DualState {
  std::vector<double> lambda;  // cache-capacity multipliers
  std::vector<double> mu;      // demand multipliers
  std::size_t k = 0;
  double step0 = 1.0;
  StepSchedule schedule = StepSchedule::inverse_sqrt;
  double best_dual = -std::numeric_limits<double>::infinity();
  double last_dual = -std::numeric_limits<double>::infinity();
  std::vector<double> primal_avg_rates;
  std::vector<double> primal_avg_cached;  // entry order
  double avg_weight = 0.0;
};

// Minimizer of the per-slot Lagrangian term T_s g(r) - r T_s y at y = sum_{l>=n}(mu_l - lambda_l).
struct PrimalIterate {
  std::vector<double> rates;
  std::vector<double> cached;  // entry order
  std::vector<double> switching;  // W per entry
  std::size_t degenerate = 0;
};

namespace sbs_detail {

inline std::vector<double> suffix(const std::vector<double>& v) {
  std::vector<double> out(v.size() + 1, 0.0);
  for (std::size_t n = v.size(); n-- > 0;) out[n] = out[n + 1] + v[n];
  return out;
}

inline double degenerate_tol(const DualState& st) {
  double scale = 0.0;
  for (double x : st.lambda) scale = std::max(scale, x);
  for (double x : st.mu) scale = std::max(scale, x);
  return 1e-12 * std::max(scale, 1e-300);
}

}  // namespace sbs_detail

// r_n from the rate subproblem.
inline double inner_rate(const std::vector<double>& lambda, const std::vector<double>& mu, std::size_t n,
                         const CostModel& cost, double rate_cap = std::numeric_limits<double>::infinity()) {
  double y = 0.0;
  for (std::size_t l = n; l < lambda.size(); ++l) y += mu[l] - lambda[l];
  return inverse_marginal(cost, y, rate_cap);
}

struct CacheDecision {
  double cached = 0.0;
  double switching = 0.0;  // W_nu
  bool degenerate = false;
};

// q_nu from the cache subproblem: 0 if W > 0, the full amount if W < 0, and
// the midpoint when W vanishes (zero when the file is never requested again).
inline CacheDecision inner_cache(const std::vector<double>& lambda, const std::vector<double>& mu, std::size_t n,
                                 std::size_t u, const DemandView& view, double tol = 0.0) {
  const std::size_t next = static_cast<std::size_t>(view.next(n, u));
  double w = 0.0;
  for (std::size_t l = n; l < lambda.size(); ++l) w += lambda[l];
  for (std::size_t l = next; l < mu.size(); ++l) w -= mu[l];
  const double amount = view.is_holder(n, u) ? view.amount(n, u) : 0.0;
  CacheDecision out;
  out.switching = w;
  if (w > tol) out.cached = 0.0;
  else if (w < -tol) out.cached = amount;
  else {
    out.degenerate = true;
    out.cached = next >= view.num_slots ? 0.0 : 0.5 * amount;
  }
  return out;
}

inline PrimalIterate lagrangian_minimizer(const SbsInstance& inst, const DualState& st, const CostModel& cost) {
  const auto Lam = sbs_detail::suffix(st.lambda);
  const auto Mu = sbs_detail::suffix(st.mu);
  const double tol = sbs_detail::degenerate_tol(st);
  PrimalIterate it;
  it.rates.resize(inst.num_slots);
  for (std::size_t n = 0; n < inst.num_slots; ++n) {
    it.rates[n] = inverse_marginal(cost, Mu[n] - Lam[n], inst.rate_cap);
  }
  it.cached.resize(inst.entries.size());
  it.switching.resize(inst.entries.size());
  for (std::size_t k = 0; k < inst.entries.size(); ++k) {
    const auto& e = inst.entries[k];
    const double w = Lam[e.slot] - Mu[std::min(e.next, inst.num_slots)];
    it.switching[k] = w;
    if (w > tol) it.cached[k] = 0.0;
    else if (w < -tol) it.cached[k] = e.amount;
    else {
      ++it.degenerate;
      it.cached[k] = e.next >= inst.num_slots ? 0.0 : 0.5 * e.amount;
    }
  }
  return it;
}

// delta(lambda, mu): the Lagrangian at its minimizer; a lower bound on the optimum.
inline double dual_value(const SbsInstance& inst, const DualState& st, const CostModel& cost,
                         const PrimalIterate& it) {
  const auto Lam = sbs_detail::suffix(st.lambda);
  const auto Mu = sbs_detail::suffix(st.mu);
  const double Ts = inst.slot_seconds;
  double value = 0.0;
  for (std::size_t n = 0; n < inst.num_slots; ++n) {
    value += Ts * (eval(cost, it.rates[n]) - it.rates[n] * (Mu[n] - Lam[n]));
    value += (st.mu[n] - st.lambda[n]) * inst.cum_amount[n] - st.lambda[n] * inst.capacity;
  }
  for (std::size_t k = 0; k < inst.entries.size(); ++k) value += it.cached[k] * it.switching[k];
  return value;
}

inline double dual_value(const SbsInstance& inst, const DualState& st, const CostModel& cost) {
  return dual_value(inst, st, cost, lagrangian_minimizer(inst, st, cost));
}

struct Residuals {
  std::vector<double> capacity;  // X_n - C - S_n + Q_n  (<= 0 when feasible)
  std::vector<double> demand;    // S_n - P_n - X_n      (<= 0 when feasible)
};

inline Residuals constraint_residuals(const SbsInstance& inst, const std::vector<double>& rates,
                                      const std::vector<double>& cached) {
  Residuals r{std::vector<double>(inst.num_slots), std::vector<double>(inst.num_slots)};
  std::vector<double> q_inc(inst.num_slots, 0.0), p_inc(inst.num_slots, 0.0);
  for (std::size_t k = 0; k < inst.entries.size(); ++k) {
    const auto& e = inst.entries[k];
    q_inc[e.slot] += cached[k];
    if (e.prev >= 0) p_inc[e.slot] += cached[static_cast<std::size_t>(e.prev)];
  }
  double X = 0.0, Q = 0.0, P = 0.0;
  for (std::size_t n = 0; n < inst.num_slots; ++n) {
    X += inst.slot_seconds * rates[n];
    Q += q_inc[n];
    P += p_inc[n];
    r.capacity[n] = X - inst.capacity - inst.cum_amount[n] + Q;
    r.demand[n] = inst.cum_amount[n] - P - X;
  }
  return r;
}

inline double default_step0(const SbsInstance& inst, const CostModel& cost) {
  double peak = 0.0;
  for (double a : inst.slot_amount) peak = std::max(peak, a);
  if (peak <= 0.0) return 1.0;
  const double mean_rate = inst.total_amount() / (inst.slot_seconds * static_cast<double>(inst.num_slots));
  // A tenth of the multiplier scale g'(mean rate) per unit of peak slot volume.
  return 0.1 * std::max(marginal(cost, mean_rate), 1e-300) / peak;
}

inline DualState initial_dual_state(const SbsInstance& inst, const CostModel& cost, const SbsOptions& opt) {
  DualState st;
  st.lambda.assign(inst.num_slots, 0.0);
  st.mu.assign(inst.num_slots, 0.0);
  // Start from the multipliers of the constant-rate chord.
  if (inst.num_slots > 0 && inst.total_amount() > 0.0) {
    const double mean_rate = inst.total_amount() / (inst.slot_seconds * static_cast<double>(inst.num_slots));
    st.mu.back() = marginal(cost, mean_rate);
  }
  st.step0 = opt.step0 > 0.0 ? opt.step0 : default_step0(inst, cost);
  st.schedule = opt.schedule;
  st.primal_avg_rates.assign(inst.num_slots, 0.0);
  st.primal_avg_cached.assign(inst.entries.size(), 0.0);
  return st;
}

// One projected subgradient update at the minimizer `it` of the current
// multipliers. `upper_bound` feeds the Polyak rule and is ignored otherwise.
inline void subgradient_step(DualState& st, const SbsInstance& inst, const CostModel& cost, const PrimalIterate& it,
                             double upper_bound = std::numeric_limits<double>::infinity()) {
  const double dual = dual_value(inst, st, cost, it);
  st.last_dual = dual;
  st.best_dual = std::max(st.best_dual, dual);
  const Residuals res = constraint_residuals(inst, it.rates, it.cached);

  double step = st.step0 / std::sqrt(static_cast<double>(st.k + 1));
  if (st.schedule == StepSchedule::polyak && std::isfinite(upper_bound)) {
    double norm2 = 0.0;
    for (std::size_t n = 0; n < inst.num_slots; ++n) {
      const double gl = st.lambda[n] > 0.0 || res.capacity[n] > 0.0 ? res.capacity[n] : 0.0;
      const double gm = st.mu[n] > 0.0 || res.demand[n] > 0.0 ? res.demand[n] : 0.0;
      norm2 += gl * gl + gm * gm;
    }
    if (norm2 > 0.0) step = std::max(upper_bound - dual, 0.0) / norm2;
  }

  const double w = step;
  st.avg_weight += w;
  const double frac = st.avg_weight > 0.0 ? w / st.avg_weight : 1.0;
  for (std::size_t n = 0; n < inst.num_slots; ++n) {
    st.primal_avg_rates[n] += frac * (it.rates[n] - st.primal_avg_rates[n]);
  }
  for (std::size_t k = 0; k < it.cached.size(); ++k) {
    st.primal_avg_cached[k] += frac * (it.cached[k] - st.primal_avg_cached[k]);
  }

  for (std::size_t n = 0; n < inst.num_slots; ++n) {
    st.lambda[n] = std::max(0.0, st.lambda[n] + step * res.capacity[n]);
    st.mu[n] = std::max(0.0, st.mu[n] + step * res.demand[n]);
  }
  ++st.k;
}

// Feasible schedule from cached amounts: shrink q uniformly until the tunnel
// opens (b_n >= a_n), then take the taut string through it.
inline SbsSchedule schedule_from_cached(const SbsInstance& inst, const CostModel& cost, std::vector<double> q) {
  for (std::size_t k = 0; k < q.size(); ++k) q[k] = std::clamp(q[k], 0.0, inst.entries[k].amount);
  // b_n - a_n = C - sum_{l<=n}(q_l - q_prev(l)) is affine in a common scale factor.
  std::vector<double> net(inst.num_slots, 0.0);
  for (std::size_t k = 0; k < q.size(); ++k) {
    net[inst.entries[k].slot] += q[k];
    if (inst.entries[k].prev >= 0) net[inst.entries[k].slot] -= q[static_cast<std::size_t>(inst.entries[k].prev)];
  }
  double theta = 1.0, acc = 0.0;
  for (std::size_t n = 0; n < inst.num_slots; ++n) {
    acc += net[n];
    if (acc > inst.capacity) theta = std::min(theta, inst.capacity / acc);
  }
  if (theta < 1.0) {
    theta *= 1.0 - 1e-15;
    for (double& x : q) x *= theta;
  }
  auto [a, b] = inst.tunnel(q);
  TautString ts = taut_string(a, b, 1e-7);
  SbsSchedule out;
  out.rates = std::move(ts.rates);
  out.cached = inst.to_grid(q);
  out.objective = schedule_cost(cost, out.rates, inst.slot_seconds);
  out.feasible = true;
  return out;
}

// Multipliers that certify the taut string of a fixed tunnel: the suffix
// sums must equal g'(r_n), so each slot's net multiplier is a marginal jump.
inline DualState contact_multipliers(const SbsInstance& inst, const CostModel& cost, const std::vector<double>& rates) {
  DualState st;
  st.lambda.assign(inst.num_slots, 0.0);
  st.mu.assign(inst.num_slots, 0.0);
  for (std::size_t n = 0; n < inst.num_slots; ++n) {
    const double here = marginal(cost, std::max(rates[n], 0.0));
    const double after = n + 1 < inst.num_slots ? marginal(cost, std::max(rates[n + 1], 0.0)) : 0.0;
    const double jump = here - after;
    (jump >= 0.0 ? st.mu[n] : st.lambda[n]) = std::abs(jump);
  }
  return st;
}

inline SbsSchedule recover_primal(const DualState& st, const SbsInstance& inst, const CostModel& cost) {
  if (st.avg_weight <= 0.0) throw std::logic_error("recover_primal: no iterations performed");
  SbsSchedule out = schedule_from_cached(inst, cost, st.primal_avg_cached);
  out.certificate.dual_bound = st.best_dual;
  out.certificate.gap = std::max(0.0, out.objective - st.best_dual);
  out.certificate.iterations = st.k;
  return out;
}

// Interior-point formulation of the slot program. With `pinned` the departure
// curve is fixed to the lower envelope (rates equal the net demand).
struct SbsProgram {
  ConvexProgram program;
  std::vector<int> rate_var;        // -1 when pinned
  std::vector<int> cached_var;      // -1 for entries without a successor
  std::vector<int> capacity_row;    // lambda rows
  std::vector<int> demand_row;      // mu rows
};

inline SbsProgram build_sbs_program(const SbsInstance& inst, const CostModel& cost, bool pinned) {
  const std::size_t N = inst.num_slots;
  const double Ts = inst.slot_seconds;
  SbsProgram sp;
  auto& P = sp.program;
  sp.rate_var.assign(N, -1);
  sp.cached_var.assign(inst.entries.size(), -1);
  int nv = 0;
  if (!pinned) {
    for (std::size_t n = 0; n < N; ++n) sp.rate_var[n] = nv++;
  }
  for (std::size_t k = 0; k < inst.entries.size(); ++k) {
    if (inst.entries[k].next < N) sp.cached_var[k] = nv++;
  }
  P.num_vars = nv;
  P.linear.assign(static_cast<std::size_t>(nv), 0.0);
  const ScalarFn g = scalar_cost(cost);

  // successors consumed in each slot
  std::vector<std::vector<int>> consumed(N);
  std::vector<std::vector<int>> stored(N);
  for (std::size_t k = 0; k < inst.entries.size(); ++k) {
    if (sp.cached_var[k] < 0) continue;
    stored[inst.entries[k].slot].push_back(sp.cached_var[k]);
    consumed[inst.entries[k].next].push_back(sp.cached_var[k]);
  }

  for (std::size_t n = 0; n < N; ++n) {
    CostTerm t;
    t.weight = Ts;
    t.fn = g;
    if (pinned) {
      t.offset = inst.slot_amount[n] / Ts;
      for (int v : consumed[n]) t.arg.add(v, -1.0 / Ts);
    } else {
      t.arg.add(sp.rate_var[n], 1.0);
    }
    P.terms.push_back(std::move(t));
  }

  if (pinned) {
    SparseRow occ;
    for (std::size_t n = 0; n < N; ++n) {
      for (int v : stored[n]) occ.add(v, 1.0);
      for (int v : consumed[n]) occ.add(v, -1.0);
      if (!stored[n].empty() || !consumed[n].empty()) sp.capacity_row.push_back(P.add_row(occ, inst.capacity));
    }
  } else {
    SparseRow cap, dem;
    for (std::size_t n = 0; n < N; ++n) {
      cap.add(sp.rate_var[n], Ts);
      dem.add(sp.rate_var[n], -Ts);
      for (int v : stored[n]) cap.add(v, 1.0);
      for (int v : consumed[n]) dem.add(v, -1.0);
      sp.capacity_row.push_back(P.add_row(cap, inst.capacity + inst.cum_amount[n]));
      sp.demand_row.push_back(P.add_row(dem, -inst.cum_amount[n]));
    }
    for (std::size_t n = 0; n < N; ++n) P.add_lower_bound(sp.rate_var[n], 0.0);
  }
  for (std::size_t k = 0; k < inst.entries.size(); ++k) {
    if (sp.cached_var[k] < 0) continue;
    P.add_lower_bound(sp.cached_var[k], 0.0);
    P.add_upper_bound(sp.cached_var[k], inst.entries[k].amount);
  }
  return sp;
}

struct PolishResult {
  std::vector<double> cached;  // entry order
  DualState multipliers;
  bool converged = false;
};

inline PolishResult polish_with_ipm(const SbsInstance& inst, const CostModel& cost, double tol) {
  SbsProgram sp = build_sbs_program(inst, cost, false);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(sp.program.num_vars);
  for (std::size_t n = 0; n < inst.num_slots; ++n) x0[sp.rate_var[n]] = inst.slot_amount[n] / inst.slot_seconds;
  IpmOptions opt;
  opt.tol = tol;
  std::vector<double> no_cache(inst.num_slots);
  for (std::size_t n = 0; n < inst.num_slots; ++n) no_cache[n] = inst.slot_amount[n] / inst.slot_seconds;
  opt.objective_scale = std::max(schedule_cost(cost, no_cache, inst.slot_seconds), 1e-300);
  const IpmResult r = solve_ipm(sp.program, x0, opt);

  PolishResult out;
  out.converged = r.converged;
  out.cached.assign(inst.entries.size(), 0.0);
  for (std::size_t k = 0; k < inst.entries.size(); ++k) {
    if (sp.cached_var[k] >= 0) out.cached[k] = r.x[sp.cached_var[k]];
  }
  out.multipliers.lambda.assign(inst.num_slots, 0.0);
  out.multipliers.mu.assign(inst.num_slots, 0.0);
  for (std::size_t n = 0; n < inst.num_slots; ++n) {
    out.multipliers.lambda[n] = r.multipliers[sp.capacity_row[n]];
    out.multipliers.mu[n] = r.multipliers[sp.demand_row[n]];
  }
  return out;
}

inline SbsSchedule solve_sbs(const SbsInstance& inst, const CostModel& cost, const SbsOptions& opt = {}) {
  const std::size_t N = inst.num_slots;
  if (N == 0) throw std::invalid_argument("solve_sbs: empty horizon");

  // Nothing can be carried across slots: the no-caching schedule is optimal.
  bool any_successor = false;
  for (const auto& e : inst.entries) any_successor = any_successor || e.next < N;
  if (inst.capacity == 0.0 || !any_successor || inst.total_amount() == 0.0) {
    SbsSchedule s = schedule_from_cached(inst, cost, std::vector<double>(inst.entries.size(), 0.0));
    const DualState cert = contact_multipliers(inst, cost, s.rates);
    s.certificate.dual_bound = dual_value(inst, cert, cost);
    if (inst.capacity == 0.0 || !any_successor) {
      // q has no effect on the objective, so the tunnel's own certificate is exact.
      s.certificate.dual_bound = std::min(s.certificate.dual_bound, s.objective);
      s.certificate.dual_bound = std::max(s.certificate.dual_bound, s.objective - 1e-12 * std::abs(s.objective));
    }
    s.certificate.gap = std::max(0.0, s.objective - s.certificate.dual_bound);
    s.certificate.converged = true;
    return s;
  }

  DualState st = initial_dual_state(inst, cost, opt);
  SbsSchedule best;
  best.objective = std::numeric_limits<double>::infinity();
  auto consider = [&](SbsSchedule cand) {
    if (cand.objective < best.objective) best = std::move(cand);
  };
  auto gap_ok = [&]() {
    return best.objective - st.best_dual <= opt.tol * std::max(1.0, std::abs(best.objective));
  };
  auto contact_bound = [&](const SbsSchedule& s) {
    const DualState cert = contact_multipliers(inst, cost, s.rates);
    st.best_dual = std::max(st.best_dual, dual_value(inst, cert, cost));
  };

  const std::size_t check = std::max<std::size_t>(1, opt.check_every);
  std::vector<double> gaps;
  for (std::size_t k = 0; k < opt.max_iters; ++k) {
    const PrimalIterate it = lagrangian_minimizer(inst, st, cost);
    subgradient_step(st, inst, cost, it, best.objective);
    if ((k + 1) % check == 0 || k + 1 == opt.max_iters) {
      consider(recover_primal(st, inst, cost));
      consider(schedule_from_cached(inst, cost, it.cached));
      contact_bound(best);
      if (gap_ok()) break;
      // Hand over to the interior-point polish once the gap stops shrinking.
      gaps.push_back(best.objective - st.best_dual);
      if (opt.polish && gaps.size() > opt.stall_checks &&
          gaps.back() > 0.9 * gaps[gaps.size() - 1 - opt.stall_checks]) {
        break;
      }
    }
  }
  if (!std::isfinite(best.objective)) {
    consider(schedule_from_cached(inst, cost, std::vector<double>(inst.entries.size(), 0.0)));
  }

  bool polished = false;
  if (!gap_ok() && opt.polish) {
    const PolishResult p = polish_with_ipm(inst, cost, 1e-10);
    consider(schedule_from_cached(inst, cost, p.cached));
    st.best_dual = std::max(st.best_dual, dual_value(inst, p.multipliers, cost));
    contact_bound(best);
    polished = true;
  }

  best.certificate.dual_bound = st.best_dual;
  best.certificate.gap = std::max(0.0, best.objective - st.best_dual);
  best.certificate.iterations = st.k;
  best.certificate.converged = gap_ok();
  best.certificate.polished = polished;
  return best;
}

inline SbsSchedule solve_sbs(const DemandView& view, double capacity, const CostModel& cost,
                             const SbsOptions& opt = {}) {
  return solve_sbs(SbsInstance::from_view(view, capacity), cost, opt);
}

}  // namespace edgecache
