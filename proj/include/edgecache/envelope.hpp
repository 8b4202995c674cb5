#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgecache/cost.hpp"
#include "edgecache/demand.hpp"

namespace edgecache {

// Cumulative data (Mnats) sampled at the slot boundaries 0, T_s, ..., N T_s.
struct CumulativeCurve {
  std::vector<double> values;
  double slot_seconds = 1.0;

  std::size_t num_slots() const noexcept { return values.empty() ? 0 : values.size() - 1; }
  double operator[](std::size_t n) const { return values[n]; }
};

inline constexpr double kTunnelTolerance = 1e-9;

namespace detail {

inline void check_cached(const DemandView& view, const Grid<double>& cached, double tol) {
  if (cached.rows() != view.num_slots || cached.cols() != view.num_users) {
    throw std::invalid_argument("cached amounts have the wrong shape");
  }
  for (std::size_t n = 0; n < view.num_slots; ++n) {
    for (std::size_t u = 0; u < view.num_users; ++u) {
      const double q = cached(n, u);
      if (!(q >= -tol) || q > view.amount(n, u) + tol) {
        throw std::invalid_argument("cached amount out of [0, T_s s] at slot " + std::to_string(n) + ", user " +
                                    std::to_string(u));
      }
    }
  }
}

}  // namespace detail

// a_n = sum_{l<=n} sum_u (T_s s_lu - q_prev(l,u)); only holder cells carry demand.
inline CumulativeCurve min_departure(const DemandView& view, const Grid<double>& cached,
                                     double tol = kTunnelTolerance) {
  detail::check_cached(view, cached, tol);
  CumulativeCurve a{std::vector<double>(view.num_slots + 1, 0.0), view.slot_seconds};
  for (std::size_t n = 0; n < view.num_slots; ++n) {
    double inc = 0.0;
    for (std::size_t u = 0; u < view.num_users; ++u) {
      if (!view.is_holder(n, u)) continue;
      inc += view.amount(n, u);
      const RequestRef p = view.prev(n, u);
      if (p.valid()) inc -= cached(static_cast<std::size_t>(p.slot), static_cast<std::size_t>(p.user));
    }
    a.values[n + 1] = a.values[n] + inc;
  }
  return a;
}

// b_n = C + sum_{l<=n} sum_u (T_s s_lu - q_lu)
inline CumulativeCurve max_departure(const DemandView& view, const Grid<double>& cached, double capacity,
                                     double tol = kTunnelTolerance) {
  if (!(capacity >= 0.0)) throw std::invalid_argument("max_departure: capacity must be >= 0");
  detail::check_cached(view, cached, tol);
  CumulativeCurve b{std::vector<double>(view.num_slots + 1, capacity), view.slot_seconds};
  for (std::size_t n = 0; n < view.num_slots; ++n) {
    double inc = 0.0;
    for (std::size_t u = 0; u < view.num_users; ++u) inc += view.amount(n, u) - cached(n, u);
    b.values[n + 1] = b.values[n] + inc;
  }
  return b;
}

struct TautString {
  std::vector<double> rates;  // Mnats/s, one per slot
  CumulativeCurve departure;
};

// Shortest curve from (0, 0) to (N T_s, lower[N]) inside [lower, upper].
// Funnel sweep: extend the feasible slope cone from the current anchor and
// fix a vertex at the binding contact when the cone empties.
inline TautString taut_string(const CumulativeCurve& lower, const CumulativeCurve& upper,
                              double tol = kTunnelTolerance) {
  const std::size_t N = lower.num_slots();
  if (upper.values.size() != lower.values.size()) throw std::invalid_argument("taut_string: curve sizes differ");
  if (N == 0) throw std::invalid_argument("taut_string: empty horizon");
  const double Ts = lower.slot_seconds;
  if (!(lower[0] <= tol && lower[0] >= -tol) || upper[0] < -tol) {
    throw std::invalid_argument("taut_string: tunnel must contain the origin");
  }
  for (std::size_t n = 0; n <= N; ++n) {
    if (lower[n] > upper[n] + tol) {
      throw InfeasibleError(n, "taut_string: tunnel crossing at boundary " + std::to_string(n) + " (lower " +
                                   std::to_string(lower[n]) + " > upper " + std::to_string(upper[n]) + ")");
    }
  }

  auto hi = [&](std::size_t n) { return n == N ? lower[N] : std::max(upper[n], lower[n]); };
  auto lo = [&](std::size_t n) { return lower[n]; };

  std::vector<double> D(N + 1, 0.0);
  std::size_t anchor = 0;
  double ya = 0.0;
  while (anchor < N) {
    double smin = -std::numeric_limits<double>::infinity();
    double smax = std::numeric_limits<double>::infinity();
    std::size_t kmin = anchor, kmax = anchor;
    std::size_t next_anchor = N;
    double slope = 0.0;
    bool bent = false;
    bool at_upper = false;
    for (std::size_t n = anchor + 1; n <= N; ++n) {
      const double dx = static_cast<double>(n - anchor);
      const double lo_s = (lo(n) - ya) / dx;
      const double hi_s = (hi(n) - ya) / dx;
      if (lo_s > smax) {
        next_anchor = kmax;
        slope = smax;
        bent = true;
        at_upper = true;
        break;
      }
      if (hi_s < smin) {
        next_anchor = kmin;
        slope = smin;
        bent = true;
        break;
      }
      if (lo_s >= smin) {
        smin = lo_s;
        kmin = n;
      }
      if (hi_s <= smax) {
        smax = hi_s;
        kmax = n;
      }
    }
    if (!bent) slope = (lower[N] - ya) / static_cast<double>(N - anchor);
    for (std::size_t m = anchor + 1; m <= next_anchor; ++m) D[m] = ya + slope * static_cast<double>(m - anchor);
    if (bent) D[next_anchor] = at_upper ? hi(next_anchor) : lo(next_anchor);
    else D[N] = lower[N];
    anchor = next_anchor;
    ya = D[anchor];
  }

  TautString out;
  out.departure = CumulativeCurve{std::move(D), Ts};
  out.rates.resize(N);
  for (std::size_t n = 0; n < N; ++n) {
    out.rates[n] = std::max(0.0, (out.departure[n + 1] - out.departure[n]) / Ts);
  }
  return out;
}

// sum_n T_s g(r_n), constants included.
inline double schedule_cost(const CostModel& cost, std::span<const double> rates, double slot_seconds) {
  double total = 0.0;
  for (double r : rates) total += slot_seconds * eval(cost, std::max(0.0, r));
  return total;
}

}  // namespace edgecache
