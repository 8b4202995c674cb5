#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include "edgecache/common.hpp"

namespace edgecache {

enum class CostKind { energy, energy_cost, bandwidth, traffic, linear_incentive };

inline constexpr double kJoulesPerKwh = 3.6e6;
inline constexpr double kNatsPerMnat = 1e6;

inline std::string_view to_string(CostKind k) {
  switch (k) {
    case CostKind::energy: return "energy";
    case CostKind::energy_cost: return "energy_cost";
    case CostKind::bandwidth: return "bandwidth";
    case CostKind::traffic: return "traffic";
    case CostKind::linear_incentive: return "linear_incentive";
  }
  return "?";
}

inline CostKind cost_kind_from_string(std::string_view s) {
  if (s == "energy") return CostKind::energy;
  if (s == "energy_cost") return CostKind::energy_cost;
  if (s == "bandwidth") return CostKind::bandwidth;
  if (s == "traffic") return CostKind::traffic;
  if (s == "linear_incentive") return CostKind::linear_incentive;
  throw std::invalid_argument("unknown cost kind '" + std::string(s) + "'");
}

// Convex increasing cost-rate g(r). Rates enter in solver units and are
// multiplied by `nats_per_unit` at the Shannon boundary (1e6 when the solver
// works in Mnats/s, 1 for unit-free tests).
struct CostModel {
  CostKind kind = CostKind::energy;
  double bandwidth_hz = 1.0;
  double channel_gain = 1.0;
  double static_power_w = 0.0;
  double side_power_w = 0.0;
  double price_per_kwh = 0.0;
  double incentive_per_mnat = 0.0;
  double fixed_power_w = 1.0;
  double nats_per_unit = 1.0;

  static CostModel energy(double bandwidth_hz, double nats_per_unit = 1.0, double channel_gain = 1.0) {
    CostModel m;
    m.kind = CostKind::energy;
    m.bandwidth_hz = bandwidth_hz;
    m.channel_gain = channel_gain;
    m.nats_per_unit = nats_per_unit;
    return m;
  }
  static CostModel traffic() {
    CostModel m;
    m.kind = CostKind::traffic;
    return m;
  }
  static CostModel linear_incentive(double per_mnat, double nats_per_unit = kNatsPerMnat) {
    CostModel m;
    m.kind = CostKind::linear_incentive;
    m.incentive_per_mnat = per_mnat;
    m.nats_per_unit = nats_per_unit;
    return m;
  }
};

namespace detail {

inline double price_factor(const CostModel& m) {
  return m.kind == CostKind::energy_cost ? m.price_per_kwh / kJoulesPerKwh : 1.0;
}

inline void check_rate(double rate) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) throw std::invalid_argument("cost: rate must be finite and >= 0");
}

// Shannon rate for bandwidth w at fixed power: w * ln(1 + a / w), a = P h.
inline double shannon(double w, double a) { return w <= 0.0 ? 0.0 : w * std::log1p(a / w); }
inline double shannon_slope(double w, double a) { return std::log1p(a / w) - a / (w + a); }

inline double bandwidth_for_rate(double nats, double a) {
  if (nats <= 0.0) return 0.0;
  if (nats >= a) {
    throw NumericError("bandwidth cost: rate " + std::to_string(nats) + " nats/s is not reachable with P*h = " +
                       std::to_string(a));
  }
  // ln(1+t) >= t - t^2/2 gives shannon(hi) >= nats.
  double hi = std::max(nats, a * a / (2.0 * (a - nats)));
  double lo = nats;
  for (int i = 0; shannon(lo, a) > nats; ++i) {
    lo *= 0.5;
    if (i > 2000) throw NumericError("bandwidth cost: bracket search failed");
  }
  for (int i = 0; i < 400 && hi - lo > 1e-13 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (shannon(mid, a) < nats ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Additive constants (static and side power) in cost units per second.
inline double constant_term(const CostModel& m) {
  if (m.kind == CostKind::energy || m.kind == CostKind::energy_cost) {
    return detail::price_factor(m) * (m.static_power_w + m.side_power_w);
  }
  return 0.0;
}

// g(r) without the additive constants.
inline double variable_cost(const CostModel& m, double rate) {
  detail::check_rate(rate);
  const double x = rate * m.nats_per_unit;
  switch (m.kind) {
    case CostKind::energy:
    case CostKind::energy_cost:
      return detail::price_factor(m) * m.bandwidth_hz * std::expm1(x / m.bandwidth_hz) / m.channel_gain;
    case CostKind::bandwidth:
      return detail::bandwidth_for_rate(x, m.fixed_power_w * m.channel_gain);
    case CostKind::traffic:
      return rate;
    case CostKind::linear_incentive:
      return m.incentive_per_mnat * x / kNatsPerMnat;
  }
  return 0.0;
}

inline double eval(const CostModel& m, double rate) { return variable_cost(m, rate) + constant_term(m); }

inline double marginal(const CostModel& m, double rate) {
  detail::check_rate(rate);
  const double k = m.nats_per_unit;
  const double x = rate * k;
  switch (m.kind) {
    case CostKind::energy:
    case CostKind::energy_cost:
      return detail::price_factor(m) * k * std::exp(x / m.bandwidth_hz) / m.channel_gain;
    case CostKind::bandwidth: {
      if (x <= 0.0) return 0.0;
      const double a = m.fixed_power_w * m.channel_gain;
      return k / detail::shannon_slope(detail::bandwidth_for_rate(x, a), a);
    }
    case CostKind::traffic:
      return 1.0;
    case CostKind::linear_incentive:
      return m.incentive_per_mnat * k / kNatsPerMnat;
  }
  return 0.0;
}

inline double second_derivative(const CostModel& m, double rate) {
  detail::check_rate(rate);
  const double k = m.nats_per_unit;
  const double x = rate * k;
  switch (m.kind) {
    case CostKind::energy:
    case CostKind::energy_cost:
      return detail::price_factor(m) * k * k * std::exp(x / m.bandwidth_hz) / (m.channel_gain * m.bandwidth_hz);
    case CostKind::bandwidth: {
      const double a = m.fixed_power_w * m.channel_gain;
      if (x <= 0.0) return 0.0;
      const double w = detail::bandwidth_for_rate(x, a);
      const double slope = detail::shannon_slope(w, a);
      return k * k * a * a / (w * (w + a) * (w + a) * slope * slope * slope);
    }
    case CostKind::traffic:
    case CostKind::linear_incentive:
      return 0.0;
  }
  return 0.0;
}

// argmin_{0 <= r <= upper} g(r) - target * r. For linear kinds the minimizer
// is unbounded when target exceeds the slope; `upper` is returned then.
inline double inverse_marginal(const CostModel& m, double target,
                               double upper = std::numeric_limits<double>::infinity()) {
  if (std::isnan(target)) throw std::invalid_argument("inverse_marginal: NaN target");
  const double k = m.nats_per_unit;
  double r = 0.0;
  switch (m.kind) {
    case CostKind::energy:
    case CostKind::energy_cost: {
      const double scaled = target * m.channel_gain / (detail::price_factor(m) * k);
      if (!(scaled > 1.0)) return 0.0;
      r = m.bandwidth_hz * std::log(scaled) / k;
      break;
    }
    case CostKind::bandwidth: {
      if (!(target > 0.0)) return 0.0;
      // marginal = k / slope(w); slope decreases from +inf to 0.
      const double a = m.fixed_power_w * m.channel_gain;
      const double want = k / target;
      double lo = a * 1e-12, hi = a;
      while (detail::shannon_slope(lo, a) < want) lo *= 0.5;
      for (int i = 0; detail::shannon_slope(hi, a) > want; ++i) {
        hi *= 2.0;
        if (i > 2000) throw NumericError("inverse_marginal: bracket search failed");
      }
      for (int i = 0; i < 400 && hi - lo > 1e-14 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (detail::shannon_slope(mid, a) > want ? lo : hi) = mid;
      }
      r = detail::shannon(0.5 * (lo + hi), a) / k;
      break;
    }
    case CostKind::traffic:
    case CostKind::linear_incentive: {
      const double slope = marginal(m, 0.0);
      return target > slope ? upper : 0.0;
    }
  }
  return std::min(r, upper);
}

}  // namespace edgecache
