#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "edgecache/envelope.hpp"
#include "test_util.hpp"

using namespace edgecache;

namespace {

CumulativeCurve curve(std::vector<double> v, double Ts = 1.0) { return CumulativeCurve{std::move(v), Ts}; }

// Random tunnel with nondecreasing lower curve and lower <= upper.
std::pair<CumulativeCurve, CumulativeCurve> random_tunnel(Rng& rng, std::size_t N) {
  std::vector<double> lo(N + 1, 0.0), hi(N + 1, 0.0);
  hi[0] = rng.uniform(0.0, 3.0);
  for (std::size_t n = 1; n <= N; ++n) {
    lo[n] = lo[n - 1] + (rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.0, 4.0));
    hi[n] = std::max(lo[n] + rng.uniform(0.0, 3.0), hi[n - 1]);
  }
  return {curve(lo), curve(hi)};
}

// Projected Gauss-Seidel on sum (D_n - D_{n-1})^2 inside the tunnel. The
// quadratic and every convex separable cost share the taut-string minimizer.
std::vector<double> quadratic_oracle(const CumulativeCurve& lo, const CumulativeCurve& hi) {
  const std::size_t N = lo.num_slots();
  std::vector<double> D(N + 1);
  for (std::size_t n = 0; n <= N; ++n) D[n] = lo[n];
  for (int sweep = 0; sweep < 200000; ++sweep) {
    double moved = 0.0;
    for (std::size_t n = 1; n < N; ++n) {
      const double v = std::clamp(0.5 * (D[n - 1] + D[n + 1]), lo[n], hi[n]);
      moved = std::max(moved, std::abs(v - D[n]));
      D[n] = v;
    }
    if (moved < 1e-14) break;
  }
  return D;
}

}  // namespace

TEST(Envelopes, NoCachingGivesDemandAndConstantGap) {
  const auto v = build_view(test::figure_two_trace());
  const Grid<double> q(4, 2, 0.0);
  const auto a = min_departure(v, q);
  const auto b = max_departure(v, q, 2.5);
  double acc = 0.0;
  EXPECT_EQ(a[0], 0.0);
  EXPECT_EQ(b[0], 2.5);
  for (std::size_t n = 0; n < 4; ++n) {
    acc += v.amount(n, 0) + v.amount(n, 1);
    EXPECT_DOUBLE_EQ(a[n + 1], acc);
    EXPECT_DOUBLE_EQ(b[n + 1], a[n + 1] + 2.5);
  }
  const auto b0 = max_departure(v, q, 0.0);
  EXPECT_EQ(b0.values, a.values);
}

TEST(Envelopes, CachingTheRepeatedFileEmptiesItsSlot) {
  const auto v = build_view(test::figure_two_trace());
  Grid<double> q(4, 2, 0.0);
  q(1, 0) = 2.0;  // f2 served to user 0 in slot 1 is kept
  const auto a = min_departure(v, q);
  const auto b = max_departure(v, q, 2.0);
  EXPECT_DOUBLE_EQ(a[3] - a[2], 0.0);
  // brute-force occupancy: the cache holds f2 from the end of slot 1 until slot 2 consumes it
  double occupancy = 0.0;
  std::vector<double> occ_after(5, 0.0);
  for (std::size_t n = 0; n < 4; ++n) {
    for (std::size_t u = 0; u < 2; ++u) {
      occupancy += q(n, u);
      const RequestRef p = v.prev(n, u);
      if (v.is_holder(n, u) && p.valid()) occupancy -= q(static_cast<std::size_t>(p.slot), static_cast<std::size_t>(p.user));
    }
    occ_after[n + 1] = occupancy;
  }
  for (std::size_t n = 0; n <= 4; ++n) EXPECT_NEAR(b[n] - a[n], 2.0 - occ_after[n], 1e-12);
}

TEST(Envelopes, HalfCachedFileHalvesTheRepeat) {
  const auto t = test::make_trace({{1}, {0}, {1}}, {6.0});
  const auto v = build_view(t);
  Grid<double> q(3, 1, 0.0);
  q(0, 0) = 3.0;
  const auto a = min_departure(v, q);
  EXPECT_DOUBLE_EQ(a[3] - a[2], 3.0);
}

TEST(Envelopes, RejectsOutOfBoxCaching) {
  const auto v = build_view(test::figure_two_trace());
  Grid<double> q(4, 2, 0.0);
  q(0, 0) = 1.5;
  EXPECT_THROW(min_departure(v, q), std::invalid_argument);
  q(0, 0) = -0.1;
  EXPECT_THROW(max_departure(v, q, 1.0), std::invalid_argument);
  q(0, 0) = 0.0;
  q(3, 1) = 0.5;  // duplicate cell has no SBS demand
  EXPECT_THROW(min_departure(v, q), std::invalid_argument);
}

TEST(TautString, ForcedPath) {
  const auto lo = curve({0, 1, 3, 3, 7}, 2.0);
  const auto ts = taut_string(lo, lo);
  EXPECT_EQ(ts.rates, (std::vector<double>{0.5, 1.0, 0.0, 2.0}));
}

TEST(TautString, SmallTunnel) {
  const auto lo = curve({0, 2, 2, 4});
  std::vector<double> up = lo.values;
  for (double& x : up) x += 1.0;
  const auto ts = taut_string(lo, curve(up));
  ASSERT_EQ(ts.rates.size(), 3u);
  EXPECT_NEAR(ts.rates[0], 2.0, 1e-12);
  EXPECT_NEAR(ts.rates[1], 1.0, 1e-12);
  EXPECT_NEAR(ts.rates[2], 1.0, 1e-12);
  const auto oracle = quadratic_oracle(lo, curve(up));
  for (std::size_t n = 0; n <= 3; ++n) EXPECT_NEAR(ts.departure[n], oracle[n], 1e-9);
}

TEST(TautString, ChordWhenUnconstrained) {
  const auto lo = curve({0, 0, 0, 0, 8});
  const auto hi = curve({5, 10, 10, 10, 10});
  const auto ts = taut_string(lo, hi);
  for (double r : ts.rates) EXPECT_NEAR(r, 2.0, 1e-12);
}

TEST(TautString, CrossingReportsSlot) {
  const auto lo = curve({0, 1, 5, 6});
  const auto hi = curve({1, 2, 4, 7});
  try {
    taut_string(lo, hi);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.slot(), 2u);
  }
}

TEST(TautString, TimeRescalingKeepsTheCurve) {
  Rng rng(5);
  auto [lo, hi] = random_tunnel(rng, 7);
  const auto a = taut_string(lo, hi);
  lo.slot_seconds = hi.slot_seconds = 4.0;
  const auto b = taut_string(lo, hi);
  for (std::size_t n = 0; n < 7; ++n) EXPECT_NEAR(b.rates[n] * 4.0, a.rates[n], 1e-12);
  EXPECT_EQ(a.departure.values, b.departure.values);
}

TEST(TautString, MatchesQuadraticOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t N = 1 + trial % 9;
    auto [lo, hi] = random_tunnel(rng, N);
    const auto ts = taut_string(lo, hi);
    const auto oracle = quadratic_oracle(lo, hi);
    for (std::size_t n = 0; n <= N; ++n) ASSERT_NEAR(ts.departure[n], oracle[n], 1e-7) << trial;
  }
}

TEST(TautString, TouchConditions) {
  Rng rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t N = 2 + trial % 12;
    auto [lo, hi] = random_tunnel(rng, N);
    const auto ts = taut_string(lo, hi);
    const auto& D = ts.departure;
    ASSERT_NEAR(D[0], 0.0, 0.0);
    ASSERT_NEAR(D[N], lo[N], 1e-12);
    for (std::size_t n = 0; n <= N; ++n) {
      ASSERT_GE(D[n], lo[n] - 1e-9);
      ASSERT_LE(D[n], hi[n] + 1e-9);
    }
    for (std::size_t n = 1; n < N; ++n) {
      const double dr = ts.rates[n] - ts.rates[n - 1];
      if (dr > 1e-9) {
        ASSERT_NEAR(D[n], hi[n], 1e-9) << trial << " slot " << n;
      }
      if (dr < -1e-9) {
        ASSERT_NEAR(D[n], lo[n], 1e-9) << trial << " slot " << n;
      }
    }
  }
}

TEST(TautString, BeatsRandomFeasibleCurves) {
  Rng rng(29);
  const auto g = CostModel::energy(2.0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t N = 2 + trial % 7;
    auto [lo, hi] = random_tunnel(rng, N);
    const auto ts = taut_string(lo, hi);
    const double best = schedule_cost(g, ts.rates, 1.0);
    for (int k = 0; k < 1000; ++k) {
      // random monotone curve inside the tunnel ending at lo[N]
      std::vector<double> D(N + 1, 0.0);
      D[N] = lo[N];
      for (std::size_t n = 1; n < N; ++n) {
        const double a = std::max(lo[n], D[n - 1]);
        const double b = std::min(hi[n], lo[N]);
        D[n] = a + rng.uniform() * std::max(0.0, b - a);
      }
      std::vector<double> r(N);
      for (std::size_t n = 0; n < N; ++n) r[n] = std::max(0.0, D[n + 1] - D[n]);
      ASSERT_LE(best, schedule_cost(g, r, 1.0) + 1e-9);
    }
  }
}

TEST(ScheduleCost, IncludesConstants) {
  CostModel m = CostModel::energy(1.0);
  m.static_power_w = 1.0;
  const std::vector<double> r{0.0, 0.0};
  EXPECT_DOUBLE_EQ(schedule_cost(m, r, 10.0), 20.0);
}
