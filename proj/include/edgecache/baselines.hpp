#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "edgecache/d2d_solver.hpp"
#include "edgecache/sbs_solver.hpp"

namespace edgecache {

enum class Policy { optimal, no_caching, lru, pdca, lca };

inline std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::optimal: return "optimal";
    case Policy::no_caching: return "no_caching";
    case Policy::lru: return "lru";
    case Policy::pdca: return "pdca";
    case Policy::lca: return "lca";
  }
  return "?";
}

inline Policy parse_policy(std::string_view s) {
  if (s == "optimal") return Policy::optimal;
  if (s == "none" || s == "no_caching") return Policy::no_caching;
  if (s == "lru") return Policy::lru;
  if (s == "pdca") return Policy::pdca;
  if (s == "lca") return Policy::lca;
  throw std::invalid_argument("unknown policy '" + std::string(s) + "'");
}

inline constexpr Policy kAllPolicies[] = {Policy::optimal, Policy::no_caching, Policy::lru, Policy::pdca, Policy::lca};

struct BaselineResult {
  Policy policy = Policy::no_caching;
  std::vector<double> rates;        // MBS rate per slot, Mnats/s
  Grid<double> cached;              // holder cells, Mnats
  double objective = 0.0;
  std::vector<double> cache_trace;  // occupancy at the end of each slot, Mnats
  bool converged = true;            // only the optimal policy can fail to certify
};

namespace baseline_detail {

inline BaselineResult finish(Policy p, const SbsInstance& inst, const CostModel& cost, std::vector<double> rates,
                             const std::vector<double>& q) {
  BaselineResult r;
  r.policy = p;
  r.objective = schedule_cost(cost, rates, inst.slot_seconds);
  r.cached = inst.to_grid(q);
  // Buffer content: pre-downloaded data X_n - a_n plus cached data C - (b_n - a_n).
  const auto [a, b] = inst.tunnel(q);
  r.cache_trace.resize(inst.num_slots);
  double X = 0.0;
  for (std::size_t n = 0; n < inst.num_slots; ++n) {
    X += inst.slot_seconds * rates[n];
    r.cache_trace[n] = std::max(0.0, X - b[n + 1] + inst.capacity);
  }
  r.rates = std::move(rates);
  return r;
}

inline std::vector<double> net_rates(const SbsInstance& inst, const std::vector<double>& q) {
  std::vector<double> r(inst.slot_amount);
  for (const auto& e : inst.entries) {
    if (e.prev >= 0) r[e.slot] -= q[static_cast<std::size_t>(e.prev)];
  }
  for (double& x : r) x = std::max(0.0, x) / inst.slot_seconds;
  return r;
}

// Whole-file LRU store. Files touched in the current slot are never evicted;
// among the rest the oldest goes first, smaller file id on ties.
class LruStore {
 public:
  explicit LruStore(double capacity) : capacity_(capacity) {}

  bool contains(int file) const { return files_.count(file) != 0; }
  // Stored by the end of an earlier slot.
  bool holds_before(int file, int slot) const {
    const auto it = files_.find(file);
    return it != files_.end() && it->second.since < slot;
  }
  void touch(int file, int slot) { files_.at(file).stamp = slot; }
  double used() const { return used_; }

  // Admits `file` if room can be made; returns whether it was stored.
  bool admit(int file, double length, int slot) {
    if (length > capacity_ || contains(file)) return false;
    double freeable = capacity_ - used_;
    std::vector<std::pair<int, int>> order;  // (stamp, id)
    for (const auto& [id, e] : files_) {
      if (e.stamp < slot) {
        order.emplace_back(e.stamp, id);
        freeable += e.length;
      }
    }
    if (freeable < length) return false;
    std::sort(order.begin(), order.end());
    for (std::size_t k = 0; used_ + length > capacity_ && k < order.size(); ++k) {
      used_ -= files_.at(order[k].second).length;
      files_.erase(order[k].second);
    }
    files_[file] = {length, slot, slot};
    used_ += length;
    return true;
  }

 private:
  struct Entry {
    double length;
    int stamp;
    int since;
  };
  double capacity_;
  double used_ = 0.0;
  std::map<int, Entry> files_;
};

}  // namespace baseline_detail

inline BaselineResult no_caching(const DemandView& view, const CostModel& cost) {
  const SbsInstance inst = SbsInstance::from_view(view, 0.0);
  std::vector<double> rates(inst.num_slots);
  for (std::size_t n = 0; n < inst.num_slots; ++n) rates[n] = inst.slot_amount[n] / inst.slot_seconds;
  return baseline_detail::finish(Policy::no_caching, inst, cost, std::move(rates),
                                 std::vector<double>(inst.entries.size(), 0.0));
}

inline BaselineResult lru(const DemandView& view, const CostModel& cost, double capacity) {
  const SbsInstance inst = SbsInstance::from_view(view, capacity);
  const std::size_t N = inst.num_slots;
  baseline_detail::LruStore store(capacity);
  std::vector<double> miss(N, 0.0);
  std::vector<bool> hit(inst.entries.size(), false);
  std::vector<double> occupancy(N, 0.0);
  std::size_t k = 0;
  for (std::size_t n = 0; n < N; ++n) {
    const int slot = static_cast<int>(n);
    for (; k < inst.entries.size() && inst.entries[k].slot == n; ++k) {
      const auto& e = inst.entries[k];
      const int file = view.file(e.slot, e.user);
      if (store.contains(file)) {
        hit[k] = true;
        store.touch(file, slot);
      } else {
        miss[n] += e.amount;
        store.admit(file, e.amount, slot);
      }
    }
    occupancy[n] = store.used();
  }
  // A request's data counts as cached exactly when its successor is a hit.
  std::vector<double> q(inst.entries.size(), 0.0);
  for (std::size_t j = 0; j < inst.entries.size(); ++j) {
    if (hit[j]) q[static_cast<std::size_t>(inst.entries[j].prev)] = inst.entries[j].amount;
  }
  std::vector<double> rates(N);
  for (std::size_t n = 0; n < N; ++n) rates[n] = miss[n] / inst.slot_seconds;
  auto r = baseline_detail::finish(Policy::lru, inst, cost, std::move(rates), q);
  r.cache_trace = std::move(occupancy);
  return r;
}

inline BaselineResult pdca(const DemandView& view, const CostModel& cost, double capacity) {
  const SbsInstance inst = SbsInstance::from_view(view, capacity);
  const std::vector<double> q(inst.entries.size(), 0.0);
  auto [a, b] = inst.tunnel(q);
  auto ts = taut_string(a, b);
  return baseline_detail::finish(Policy::pdca, inst, cost, std::move(ts.rates), q);
}

// Local caching only: the departure is pinned to the net demand.
inline BaselineResult lca(const DemandView& view, const CostModel& cost, double capacity, double tol = 1e-10) {
  const SbsInstance inst = SbsInstance::from_view(view, capacity);
  std::vector<double> q(inst.entries.size(), 0.0);
  bool any_successor = false;
  for (const auto& e : inst.entries) any_successor = any_successor || e.next < inst.num_slots;
  if (capacity > 0.0 && any_successor) {
    const SbsProgram sp = build_sbs_program(inst, cost, true);
    double scale = 0.0;
    for (double x : inst.slot_amount) scale += inst.slot_seconds * eval(cost, x / inst.slot_seconds);
    IpmOptions io;
    io.tol = tol;
    io.objective_scale = scale > 0.0 ? scale : 1.0;
    const IpmResult r = solve_ipm(sp.program, Eigen::VectorXd::Zero(sp.program.num_vars), io);
    for (std::size_t k = 0; k < q.size(); ++k) {
      if (sp.cached_var[k] >= 0) q[k] = std::clamp(r.x[sp.cached_var[k]], 0.0, inst.entries[k].amount);
    }
    double theta = 1.0, occ = 0.0;
    std::vector<double> net(inst.num_slots, 0.0);
    for (std::size_t k = 0; k < q.size(); ++k) {
      const auto& e = inst.entries[k];
      net[e.slot] += q[k];
      if (e.prev >= 0) net[e.slot] -= q[static_cast<std::size_t>(e.prev)];
    }
    for (double x : net) {
      occ += x;
      if (occ > capacity) theta = std::min(theta, capacity / occ);
    }
    if (theta < 1.0) {
      for (double& x : q) x *= theta * (1.0 - 1e-15);
    }
  }
  return baseline_detail::finish(Policy::lca, inst, cost, baseline_detail::net_rates(inst, q), q);
}

inline BaselineResult optimal(const DemandView& view, const CostModel& cost, double capacity,
                              const SbsOptions& opt = {}) {
  const SbsInstance inst = SbsInstance::from_view(view, capacity);
  SbsSchedule s = solve_sbs(inst, cost, opt);
  const bool ok = s.certificate.converged;
  auto r = baseline_detail::finish(Policy::optimal, inst, cost, std::move(s.rates), inst.from_grid(s.cached));
  r.converged = ok;
  return r;
}

inline BaselineResult run_policy(Policy p, const DemandView& view, const CostModel& cost, double capacity) {
  switch (p) {
    case Policy::optimal: return optimal(view, cost, capacity);
    case Policy::no_caching: return no_caching(view, cost);
    case Policy::lru: return lru(view, cost, capacity);
    case Policy::pdca: return pdca(view, cost, capacity);
    case Policy::lca: return lca(view, cost, capacity);
  }
  throw std::invalid_argument("unknown policy");
}

// ---- user caching ----

struct D2dBaselineResult {
  Policy policy = Policy::no_caching;
  D2dSchedule schedule;
  Grid<double> cache_trace;  // (slot, user) occupancy at the end of each slot, Mnats
};

// Buffer content per user: pre-downloaded data plus cached data.
inline Grid<double> d2d_occupancy(const D2dProblem& prob, const D2dSchedule& s) {
  const auto& v = prob.view;
  const std::size_t N = v.num_slots, U = v.num_users;
  Grid<double> occ(N, U, 0.0);
  for (std::size_t w = 0; w < U; ++w) {
    const auto [A, B] = user_tunnel(prob, s.cached, s.d2d_data, w);
    double X = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      X += v.slot_seconds * s.mbs_rates(n, w);
      occ(n, w) = std::max(0.0, X - B[n + 1] + prob.capacities[w]);
    }
  }
  return occ;
}

namespace baseline_detail {

inline D2dBaselineResult finish_d2d(Policy p, const D2dProblem& prob, D2dSchedule s) {
  s.objective = d2d_objective(prob, s);
  s.certificate.feasible = true;
  D2dBaselineResult r;
  r.policy = p;
  r.cache_trace = d2d_occupancy(prob, s);
  r.schedule = std::move(s);
  return r;
}

inline D2dSchedule empty_schedule(const D2dProblem& prob) {
  const std::size_t N = prob.view.num_slots, U = prob.view.num_users;
  D2dSchedule s;
  s.mbs_rates = Grid<double>(N, U, 0.0);
  s.cached = Cube<double>(N, U, 0.0);
  s.d2d_data = Cube<double>(N, U, 0.0);
  return s;
}

}  // namespace baseline_detail

inline D2dBaselineResult d2d_no_caching(const D2dProblem& prob) {
  D2dSchedule s = baseline_detail::empty_schedule(prob);
  s.mbs_rates = prob.view.d;
  return baseline_detail::finish_d2d(Policy::no_caching, prob, std::move(s));
}

inline D2dBaselineResult d2d_pdca(const D2dProblem& prob) {
  const auto& v = prob.view;
  D2dSchedule s = baseline_detail::empty_schedule(prob);
  for (std::size_t w = 0; w < v.num_users; ++w) {
    auto [A, B] = user_tunnel(prob, s.cached, s.d2d_data, w);
    const auto ts = taut_string(A, B);
    for (std::size_t n = 0; n < v.num_slots; ++n) s.mbs_rates(n, w) = ts.rates[n];
  }
  return baseline_detail::finish_d2d(Policy::pdca, prob, std::move(s));
}

inline D2dBaselineResult d2d_lca(const D2dProblem& prob, const D2dOptions& opt = {}) {
  D2dSchedule s = solve_d2d_program(prob, true, opt);
  return baseline_detail::finish_d2d(Policy::lca, prob, std::move(s));
}

// One LRU store per user. A request is served by the requester's own cache
// first, then by the lowest-index user holding the file; a miss downloads from
// the MBS and is admitted at the requester (holders only) unless some user
// already stores the file. The store never relays within a slot; when the
// problem allows instantaneous transfers, same-slot duplicates are therefore
// fetched from the MBS.
inline D2dBaselineResult d2d_lru(const D2dProblem& prob) {
  const auto& v = prob.view;
  const std::size_t N = v.num_slots, U = v.num_users;
  const double Ts = v.slot_seconds;
  std::vector<baseline_detail::LruStore> stores;
  for (std::size_t w = 0; w < U; ++w) stores.emplace_back(prob.capacities[w]);
  D2dSchedule s = baseline_detail::empty_schedule(prob);
  Grid<int> server(N, U, -1);
  Grid<double> trace(N, U, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    const int slot = static_cast<int>(n);
    for (std::size_t u = 0; u < U; ++u) {
      const double len = Ts * v.d(n, u);
      s.mbs_rates(n, u) = v.d(n, u);
      if (len <= 0.0) continue;
      const int file = v.file(n, u);
      int owner = stores[u].holds_before(file, slot) ? static_cast<int>(u) : -1;
      for (std::size_t x = 0; owner < 0 && x < U; ++x)
        if (stores[x].holds_before(file, slot)) owner = static_cast<int>(x);
      const RequestRef p = v.prev(n, u);
      if (owner >= 0 && p.valid() && p.slot < slot) {
        stores[static_cast<std::size_t>(owner)].touch(file, slot);
        server(n, u) = owner;
        s.d2d_data(n, static_cast<std::size_t>(owner), u) = len;
        s.mbs_rates(n, u) = 0.0;
      } else {
        bool stored = false;
        for (std::size_t x = 0; x < U; ++x) stored = stored || stores[x].contains(file);
        if (!stored && v.is_holder(n, u)) stores[u].admit(file, len, slot);
      }
    }
    for (std::size_t w = 0; w < U; ++w) trace(n, w) = stores[w].used();
  }
  // Keep a request's copy exactly when the owner serves that file's next request.
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t u = 0; u < U; ++u) {
      if (server(n, u) < 0) continue;
      const RequestRef p = v.prev(n, u);
      s.cached(static_cast<std::size_t>(p.slot), static_cast<std::size_t>(server(n, u)), static_cast<std::size_t>(p.user)) =
          Ts * v.d(n, u);
    }
  }
  auto r = baseline_detail::finish_d2d(Policy::lru, prob, std::move(s));
  r.cache_trace = std::move(trace);
  return r;
}

inline D2dBaselineResult d2d_optimal(const D2dProblem& prob, const D2dOptions& opt = {}) {
  D2dSchedule s = solve_d2d(prob, opt);
  auto cert = s.certificate;
  auto r = baseline_detail::finish_d2d(Policy::optimal, prob, std::move(s));
  r.schedule.certificate = cert;
  return r;
}

inline D2dBaselineResult run_d2d_policy(Policy p, const D2dProblem& prob) {
  switch (p) {
    case Policy::optimal: return d2d_optimal(prob);
    case Policy::no_caching: return d2d_no_caching(prob);
    case Policy::lru: return d2d_lru(prob);
    case Policy::pdca: return d2d_pdca(prob);
    case Policy::lca: return d2d_lca(prob);
  }
  throw std::invalid_argument("unknown policy");
}

}  // namespace edgecache
