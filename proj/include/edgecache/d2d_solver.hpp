#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "edgecache/convex_program.hpp"
#include "edgecache/cost.hpp"
#include "edgecache/demand.hpp"
#include "edgecache/envelope.hpp"

namespace edgecache {

struct D2dProblem {
  DemandView view;  // every user downloads its own demand d; prev spans all users
  std::vector<double> capacities;
  std::vector<CostModel> mbs_costs;
  std::vector<CostModel> d2d_costs;  // owner * U + requester; the diagonal is never charged
  bool instantaneous_d2d = false;

  std::size_t num_users() const { return view.num_users; }
  const CostModel& d2d_cost(std::size_t owner, std::size_t requester) const {
    return d2d_costs[owner * view.num_users + requester];
  }
};

inline D2dProblem build_problem(const DemandTrace& trace, std::vector<double> capacities,
                                std::vector<CostModel> mbs_costs, std::vector<CostModel> d2d_costs,
                                bool instantaneous_d2d = false) {
  const std::size_t U = trace.num_users;
  if (capacities.size() != U) throw std::invalid_argument("d2d: need one capacity per user");
  if (mbs_costs.size() != U) throw std::invalid_argument("d2d: need one MBS cost per user");
  if (d2d_costs.size() != U * U) throw std::invalid_argument("d2d: need a U x U table of link costs");
  for (double c : capacities) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("d2d: capacities must be finite and >= 0");
  }
  D2dProblem p;
  p.view = build_view(trace, instantaneous_d2d ? PrevMode::instantaneous : PrevMode::earlier_slots);
  p.capacities = std::move(capacities);
  p.mbs_costs = std::move(mbs_costs);
  p.d2d_costs = std::move(d2d_costs);
  p.instantaneous_d2d = instantaneous_d2d;
  return p;
}

// Same MBS cost for every user, same cost on every D2D link.
inline D2dProblem build_problem(const DemandTrace& trace, std::vector<double> capacities, const CostModel& mbs,
                                const CostModel& d2d, bool instantaneous_d2d = false) {
  const std::size_t U = trace.num_users;
  return build_problem(trace, std::move(capacities), std::vector<CostModel>(U, mbs),
                       std::vector<CostModel>(U * U, d2d), instantaneous_d2d);
}

struct D2dCertificate {
  double dual_bound = -std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  double kkt_residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool feasible = false;
  bool converged = false;
};

struct D2dSchedule {
  Grid<double> mbs_rates;  // (slot, user), Mnats/s
  Cube<double> d2d_data;   // (slot, owner, requester), Mnats; diagonal is local reuse
  Cube<double> cached;     // (slot, owner, requester), Mnats
  double objective = 0.0;
  D2dCertificate certificate;
};

struct D2dOptions {
  double tol = 1e-9;
  int max_iters = 300;
};

// Variable indices of the discrete program; -1 marks a structural zero.
struct D2dLayout {
  std::size_t num_slots = 0;
  std::size_t num_users = 0;
  bool pinned = false;
  std::vector<bool> pinned_user;  // departure fixed to the net demand
  Grid<int> rate;
  Cube<int> cached;
  Cube<int> d2d;
  int num_vars = 0;
};

namespace d2d_detail {

inline Grid<int> successor_count(const DemandView& v) {
  Grid<int> count(v.num_slots, v.num_users, 0);
  for (std::size_t n = 0; n < v.num_slots; ++n) {
    for (std::size_t u = 0; u < v.num_users; ++u) {
      const RequestRef p = v.prev(n, u);
      if (v.d(n, u) > 0.0 && p.valid()) ++count(static_cast<std::size_t>(p.slot), static_cast<std::size_t>(p.user));
    }
  }
  return count;
}

inline std::size_t ps(const RequestRef& p) { return static_cast<std::size_t>(p.slot); }
inline std::size_t pu(const RequestRef& p) { return static_cast<std::size_t>(p.user); }

}  // namespace d2d_detail

// With `audit` every variable an arbitrary schedule may use is kept. Otherwise
// cached amounts without a later request are dropped, and a user without cache
// gets no cache variables and a pinned departure (its two cumulative rows
// would coincide and leave the feasible set without interior).
inline D2dLayout make_layout(const D2dProblem& prob, bool pinned, bool audit = false) {
  const auto& v = prob.view;
  const std::size_t N = v.num_slots, U = v.num_users;
  D2dLayout L;
  L.num_slots = N;
  L.num_users = U;
  L.pinned = pinned;
  L.pinned_user.assign(U, pinned);
  std::vector<bool> owns(U, true);
  for (std::size_t w = 0; w < U; ++w) {
    if (!audit && prob.capacities[w] <= 0.0) {
      L.pinned_user[w] = true;
      owns[w] = false;
    }
  }
  L.rate = Grid<int>(N, U, -1);
  L.cached = Cube<int>(N, U, -1);
  L.d2d = Cube<int>(N, U, -1);
  const Grid<int> succ = d2d_detail::successor_count(v);
  int nv = 0;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t u = 0; u < U; ++u)
      if (!L.pinned_user[u]) L.rate(n, u) = nv++;
  // (slot, user) order visits every prev before its successors.
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t u = 0; u < U; ++u) {
      if (v.d(n, u) <= 0.0) continue;
      const RequestRef p = v.prev(n, u);
      const bool useful = audit || succ(n, u) > 0;
      for (std::size_t x = 0; x < U; ++x) {
        const bool upstream = p.valid() && L.cached(d2d_detail::ps(p), x, d2d_detail::pu(p)) >= 0;
        if (useful && owns[x] && (x == u || upstream)) L.cached(n, x, u) = nv++;
        if (upstream) L.d2d(n, x, u) = nv++;
      }
    }
  }
  L.num_vars = nv;
  return L;
}

struct D2dRows {
  ConvexProgram program;
  Grid<int> capacity_row;  // (slot, user)
  Grid<int> demand_row;    // (slot, user), -1 when pinned
};

inline D2dRows build_d2d_program(const D2dProblem& prob, const D2dLayout& L) {
  const auto& v = prob.view;
  const std::size_t N = L.num_slots, U = L.num_users;
  const double Ts = v.slot_seconds;
  D2dRows out;
  auto& P = out.program;
  P.num_vars = L.num_vars;
  P.linear.assign(static_cast<std::size_t>(L.num_vars), 0.0);
  out.capacity_row = Grid<int>(N, U, -1);
  out.demand_row = Grid<int>(N, U, -1);

  std::vector<ScalarFn> mbs(U);
  for (std::size_t u = 0; u < U; ++u) mbs[u] = scalar_cost(prob.mbs_costs[u]);

  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t u = 0; u < U; ++u) {
      CostTerm t;
      t.weight = Ts;
      t.fn = mbs[u];
      if (L.pinned_user[u]) {
        t.offset = v.d(n, u);
        for (std::size_t x = 0; x < U; ++x)
          if (L.d2d(n, x, u) >= 0) t.arg.add(L.d2d(n, x, u), -1.0 / Ts);
      } else {
        t.arg.add(L.rate(n, u), 1.0);
      }
      P.terms.push_back(std::move(t));
      for (std::size_t x = 0; x < U; ++x) {
        if (x == u || L.d2d(n, x, u) < 0) continue;
        CostTerm link;
        link.weight = Ts;
        link.fn = scalar_cost(prob.d2d_cost(x, u));
        link.arg.add(L.d2d(n, x, u), 1.0 / Ts);
        P.terms.push_back(std::move(link));
      }
    }
  }

  // Cumulative rows per user.
  for (std::size_t w = 0; w < U; ++w) {
    SparseRow cap, dem;
    double demand = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      demand += Ts * v.d(n, w);
      const bool pin = L.pinned_user[w];
      if (!pin) {
        cap.add(L.rate(n, w), Ts);
        dem.add(L.rate(n, w), -Ts);
      }
      for (std::size_t x = 0; x < U; ++x) {
        if (L.cached(n, w, x) >= 0) cap.add(L.cached(n, w, x), 1.0);
        if (L.d2d(n, w, x) >= 0 && v.is_holder(n, x)) cap.add(L.d2d(n, w, x), -1.0);
        if (L.d2d(n, x, w) >= 0) {
          if (!pin) cap.add(L.d2d(n, x, w), 1.0);
          dem.add(L.d2d(n, x, w), -1.0);
        }
      }
      if (pin) {
        if (!cap.idx.empty()) out.capacity_row(n, w) = P.add_row(cap, prob.capacities[w]);
      } else {
        out.capacity_row(n, w) = P.add_row(cap, prob.capacities[w] + demand);
        out.demand_row(n, w) = P.add_row(dem, -demand);
      }
    }
  }

  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t u = 0; u < U; ++u) {
      SparseRow overlap;
      for (std::size_t x = 0; x < U; ++x)
        if (L.cached(n, x, u) >= 0) overlap.add(L.cached(n, x, u), 1.0);
      if (!overlap.idx.empty()) P.add_row(overlap, Ts * v.d(n, u));
      const RequestRef p = v.prev(n, u);
      for (std::size_t x = 0; x < U; ++x) {
        const int src = p.valid() ? L.cached(d2d_detail::ps(p), x, d2d_detail::pu(p)) : -1;
        if (x != u && L.cached(n, x, u) >= 0) {
          SparseRow chain;
          chain.add(L.cached(n, x, u), 1.0);
          chain.add(src, -1.0);
          P.add_row(chain, 0.0);
        }
        if (L.d2d(n, x, u) >= 0) {
          SparseRow chain;
          chain.add(L.d2d(n, x, u), 1.0);
          chain.add(src, -1.0);
          P.add_row(chain, 0.0);
        }
      }
    }
  }
  for (int i = 0; i < L.num_vars; ++i) P.add_lower_bound(i, 0.0);
  return out;
}

inline double d2d_objective(const D2dProblem& prob, const D2dSchedule& s) {
  const auto& v = prob.view;
  const std::size_t U = v.num_users;
  const double Ts = v.slot_seconds;
  double total = 0.0;
  for (std::size_t n = 0; n < v.num_slots; ++n) {
    for (std::size_t u = 0; u < U; ++u) {
      total += Ts * eval(prob.mbs_costs[u], std::max(0.0, s.mbs_rates(n, u)));
      for (std::size_t x = 0; x < U; ++x) {
        if (x != u) total += Ts * eval(prob.d2d_cost(x, u), std::max(0.0, s.d2d_data(n, x, u)) / Ts);
      }
    }
  }
  return total;
}

namespace d2d_detail {

// Makes (q, b) satisfy box, chain and non-overlap exactly, then shrinks all
// of them by a common factor until no user cache overflows.
inline void repair(const D2dProblem& prob, const D2dLayout& L, Cube<double>& q, Cube<double>& b) {
  const auto& v = prob.view;
  const std::size_t N = L.num_slots, U = L.num_users;
  const double Ts = v.slot_seconds;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t u = 0; u < U; ++u) {
      const RequestRef p = v.prev(n, u);
      double total = 0.0;
      for (std::size_t x = 0; x < U; ++x) {
        const double src = p.valid() ? q(ps(p), x, pu(p)) : 0.0;
        double& qx = q(n, x, u);
        double& bx = b(n, x, u);
        qx = L.cached(n, x, u) < 0 ? 0.0 : std::max(0.0, qx);
        if (x != u) qx = std::min(qx, src);
        bx = L.d2d(n, x, u) < 0 ? 0.0 : std::clamp(bx, 0.0, src);
        total += qx;
      }
      const double cap = Ts * v.d(n, u);
      if (total > cap) {
        for (std::size_t x = 0; x < U; ++x) q(n, x, u) *= cap / total;
      }
    }
  }
  double theta = 1.0;
  for (std::size_t w = 0; w < U; ++w) {
    double occ = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t x = 0; x < U; ++x) occ += q(n, w, x) - (v.is_holder(n, x) ? b(n, w, x) : 0.0);
      if (occ > prob.capacities[w]) theta = std::min(theta, prob.capacities[w] / occ);
    }
  }
  if (theta < 1.0) {
    theta *= 1.0 - 1e-15;
    for (double& x : q.data()) x *= theta;
    for (double& x : b.data()) x *= theta;
  }
}

}  // namespace d2d_detail

// Per-user tunnel for fixed (q, b):
//   A_w(n) = sum_{l<=n} (T_s d - sum_x b_x(l,w))
//   B_w(n) = C_w + sum_{l<=n} (T_s d + sum_x [sigma(l,x) b_w(l,x) - b_x(l,w) - q_w(l,x)])
// Only a transfer to the chain successor (the slot's holder) frees cache
// space; copies sent to same-slot duplicates leave the cached data in place.
inline std::pair<CumulativeCurve, CumulativeCurve> user_tunnel(const D2dProblem& prob, const Cube<double>& q,
                                                               const Cube<double>& b, std::size_t w) {
  const auto& v = prob.view;
  const std::size_t N = v.num_slots, U = v.num_users;
  const double Ts = v.slot_seconds;
  CumulativeCurve A{std::vector<double>(N + 1, 0.0), Ts};
  CumulativeCurve B{std::vector<double>(N + 1, prob.capacities[w]), Ts};
  for (std::size_t n = 0; n < N; ++n) {
    double da = Ts * v.d(n, w), db = Ts * v.d(n, w);
    for (std::size_t x = 0; x < U; ++x) {
      da -= b(n, x, w);
      db += (v.is_holder(n, x) ? b(n, w, x) : 0.0) - b(n, x, w) - q(n, w, x);
    }
    A.values[n + 1] = A.values[n] + da;
    B.values[n + 1] = B.values[n] + db;
  }
  return {std::move(A), std::move(B)};
}

// Complete schedule for fixed (q, b): taut-string rates per user, or the net
// demand when the departure is pinned to the lower envelope.
inline D2dSchedule d2d_schedule_from(const D2dProblem& prob, const D2dLayout& L, Cube<double> q, Cube<double> b) {
  const auto& v = prob.view;
  const std::size_t N = v.num_slots, U = v.num_users;
  d2d_detail::repair(prob, L, q, b);
  D2dSchedule s;
  s.mbs_rates = Grid<double>(N, U, 0.0);
  for (std::size_t w = 0; w < U; ++w) {
    auto [A, B] = user_tunnel(prob, q, b, w);
    if (L.pinned_user[w]) {
      for (std::size_t n = 0; n < N; ++n) s.mbs_rates(n, w) = std::max(0.0, (A[n + 1] - A[n]) / v.slot_seconds);
    } else {
      const auto ts = taut_string(A, B, 1e-6 * (1.0 + prob.capacities[w] + A[N]));
      for (std::size_t n = 0; n < N; ++n) s.mbs_rates(n, w) = ts.rates[n];
    }
  }
  s.cached = std::move(q);
  s.d2d_data = std::move(b);
  s.objective = d2d_objective(prob, s);
  s.certificate.feasible = true;
  return s;
}

inline D2dSchedule solve_d2d_program(const D2dProblem& prob, bool pinned, const D2dOptions& opt = {}) {
  const auto& v = prob.view;
  const std::size_t N = v.num_slots, U = v.num_users;
  if (N == 0 || U == 0) throw std::invalid_argument("d2d: empty problem");
  const D2dLayout L = make_layout(prob, pinned);
  const D2dRows R = build_d2d_program(prob, L);

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(L.num_vars);
  double baseline = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t u = 0; u < U; ++u) {
      if (L.rate(n, u) >= 0) x0[L.rate(n, u)] = v.d(n, u);
      baseline += v.slot_seconds * eval(prob.mbs_costs[u], v.d(n, u));
    }
  }

  Cube<double> q(N, U, 0.0), b(N, U, 0.0);
  D2dCertificate cert;
  if (L.num_vars > 0) {
    IpmOptions io;
    io.tol = opt.tol;
    io.max_iters = opt.max_iters;
    io.objective_scale = baseline > 0.0 ? baseline : 1.0;
    const IpmResult r = solve_ipm(R.program, x0, io);
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t x = 0; x < U; ++x) {
        for (std::size_t u = 0; u < U; ++u) {
          if (L.cached(n, x, u) >= 0) q(n, x, u) = r.x[L.cached(n, x, u)];
          if (L.d2d(n, x, u) >= 0) b(n, x, u) = r.x[L.d2d(n, x, u)];
        }
      }
    }
    cert.iterations = r.iterations;
    cert.converged = r.converged;
    cert.dual_bound = r.objective - r.complementarity;
    const double gscale = std::max(1.0, R.program.gradient(r.x).lpNorm<Eigen::Infinity>());
    cert.kkt_residual = std::max({r.primal_residual, r.dual_residual * io.objective_scale / gscale,
                                  r.complementarity / std::max(1.0, std::abs(r.objective))});
  } else {
    cert.converged = true;
    cert.kkt_residual = 0.0;
  }

  D2dSchedule s = d2d_schedule_from(prob, L, std::move(q), std::move(b));
  if (L.num_vars == 0) cert.dual_bound = s.objective;
  cert.feasible = true;
  cert.gap = std::max(0.0, s.objective - cert.dual_bound);
  if (cert.gap > 1e-6 * std::max(1.0, std::abs(s.objective))) cert.converged = false;
  s.certificate = cert;
  return s;
}

inline D2dSchedule solve_d2d(const D2dProblem& prob, const D2dOptions& opt = {}) {
  return solve_d2d_program(prob, false, opt);
}

struct KktReport {
  double primal_residual = 0.0;    // Mnats, max constraint violation
  double dual_residual = 0.0;      // stationarity, relative to the gradient scale
  double complementarity = 0.0;    // relative to the gradient scale
  double max() const { return std::max({primal_residual, dual_residual, complementarity}); }
};

// Nonnegative least squares min ||A z - y||, z >= 0 (Lawson-Hanson).
inline Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, int max_iters = 0) {
  const Eigen::Index k = A.cols();
  Eigen::VectorXd z = Eigen::VectorXd::Zero(k);
  if (k == 0) return z;
  if (max_iters <= 0) max_iters = static_cast<int>(3 * k + 10);
  std::vector<bool> passive(static_cast<std::size_t>(k), false);
  const double tol = 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff() * y.cwiseAbs().maxCoeff());

  auto solve_passive = [&](Eigen::VectorXd& out) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < k; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    out = Eigen::VectorXd::Zero(k);
    if (idx.empty()) return;
    Eigen::MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) Ap.col(static_cast<Eigen::Index>(c)) = A.col(idx[c]);
    const Eigen::VectorXd sol = Ap.colPivHouseholderQr().solve(y);
    for (std::size_t c = 0; c < idx.size(); ++c) out[idx[c]] = sol[static_cast<Eigen::Index>(c)];
  };

  for (int it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd w = A.transpose() * (y - A * z);
    Eigen::Index best = -1;
    double wmax = tol;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w[j] > wmax) {
        wmax = w[j];
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;
    for (int inner = 0; inner < max_iters; ++inner) {
      Eigen::VectorXd s;
      solve_passive(s);
      bool ok = true;
      for (Eigen::Index j = 0; j < k; ++j)
        if (passive[static_cast<std::size_t>(j)] && s[j] <= 0.0) ok = false;
      if (ok) {
        z = s;
        break;
      }
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (passive[static_cast<std::size_t>(j)] && s[j] <= 0.0) alpha = std::min(alpha, z[j] / (z[j] - s[j]));
      }
      z += alpha * (s - z);
      for (Eigen::Index j = 0; j < k; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 1e-15 * std::max(1.0, z.cwiseAbs().maxCoeff())) {
          passive[static_cast<std::size_t>(j)] = false;
          z[j] = 0.0;
        }
      }
    }
  }
  return z;
}

// First-order optimality audit of an arbitrary schedule for the (unpinned)
// discrete program. Multipliers are fitted by nonnegative least squares on
// the constraints that are active within `active_tol`.
inline KktReport check_kkt(const D2dProblem& prob, const D2dSchedule& s, double active_tol = 1e-6) {
  const auto& v = prob.view;
  const std::size_t N = v.num_slots, U = v.num_users;
  const D2dLayout L = make_layout(prob, false, true);
  const D2dRows R = build_d2d_program(prob, L);
  KktReport rep;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(L.num_vars);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t u = 0; u < U; ++u) {
      x[L.rate(n, u)] = s.mbs_rates(n, u);
      for (std::size_t o = 0; o < U; ++o) {
        const double qv = s.cached(n, o, u), bv = s.d2d_data(n, o, u);
        if (L.cached(n, o, u) >= 0) x[L.cached(n, o, u)] = qv;
        else rep.primal_residual = std::max(rep.primal_residual, std::abs(qv));
        if (L.d2d(n, o, u) >= 0) x[L.d2d(n, o, u)] = bv;
        else rep.primal_residual = std::max(rep.primal_residual, std::abs(bv));
      }
    }
  }
  const auto& P = R.program;
  const Eigen::VectorXd gx = P.row_values(x);
  std::vector<int> active;
  for (std::size_t i = 0; i < P.rows.size(); ++i) {
    const double slack = P.rhs[i] - gx[static_cast<Eigen::Index>(i)];
    rep.primal_residual = std::max(rep.primal_residual, -slack);
    if (slack <= active_tol * (1.0 + std::abs(P.rhs[i]))) active.push_back(static_cast<int>(i));
  }
  if (L.num_vars == 0) return rep;

  // The objective is only defined for nonnegative arguments; clip for the gradient.
  Eigen::VectorXd xc = x.cwiseMax(0.0);
  const Eigen::VectorXd grad = P.gradient(xc);
  const double scale = std::max(grad.lpNorm<Eigen::Infinity>(), 1e-300);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(L.num_vars, static_cast<Eigen::Index>(active.size()));
  for (std::size_t c = 0; c < active.size(); ++c) {
    const auto& row = P.rows[static_cast<std::size_t>(active[c])];
    for (std::size_t k = 0; k < row.idx.size(); ++k) A(row.idx[k], static_cast<Eigen::Index>(c)) += row.val[k];
  }
  const Eigen::VectorXd target = -grad / scale;
  const Eigen::VectorXd nu = nnls(A, target);
  rep.dual_residual = (A * nu - target).lpNorm<Eigen::Infinity>();
  for (std::size_t c = 0; c < active.size(); ++c) {
    const auto i = static_cast<std::size_t>(active[c]);
    const double slack = std::max(0.0, P.rhs[i] - gx[static_cast<Eigen::Index>(i)]);
    rep.complementarity = std::max(rep.complementarity, nu[static_cast<Eigen::Index>(c)] * slack);
  }
  return rep;
}

struct Economics {
  double electricity = 0.0;  // ξ_MBS units (e.g. $)
  double incentives = 0.0;   // ξ_U units
  double total = 0.0;
  double d2d_mnats = 0.0;    // off-diagonal volume
};

// Electricity bill of the per-user Shannon links (bandwidth W/U each) plus
// the incentive paid per Mnat relayed between distinct users.
inline Economics economics(const D2dSchedule& s, double slot_seconds, double price_per_kwh, double incentive_per_mnat,
                           double total_bandwidth_hz, double nats_per_unit = kNatsPerMnat) {
  const std::size_t N = s.mbs_rates.rows(), U = s.mbs_rates.cols();
  CostModel link = CostModel::energy(total_bandwidth_hz / static_cast<double>(U), nats_per_unit);
  link.kind = CostKind::energy_cost;
  link.price_per_kwh = price_per_kwh;
  Economics e;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t u = 0; u < U; ++u) {
      e.electricity += slot_seconds * eval(link, std::max(0.0, s.mbs_rates(n, u)));
      for (std::size_t x = 0; x < U; ++x)
        if (x != u) e.d2d_mnats += s.d2d_data(n, x, u);
    }
  }
  e.incentives = incentive_per_mnat * e.d2d_mnats;
  e.total = e.electricity + e.incentives;
  return e;
}

}  // namespace edgecache
