#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "edgecache/cost.hpp"

namespace edgecache {

// Value and first two derivatives of a scalar convex function.
struct ScalarEval {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

using ScalarFn = std::function<ScalarEval(double)>;

// g(t) for t >= 0, continued by its second-order expansion at 0 for t < 0 so
// infeasible interior-point iterates stay finite.
inline ScalarFn scalar_cost(const CostModel& model) {
  const double g1 = marginal(model, 0.0);
  double g2 = second_derivative(model, 0.0);
  if (!std::isfinite(g2)) g2 = 0.0;
  return [model, g1, g2](double t) {
    if (t >= 0.0) return ScalarEval{variable_cost(model, t), marginal(model, t), second_derivative(model, t)};
    return ScalarEval{g1 * t + 0.5 * g2 * t * t, g1 + g2 * t, g2};
  };
}

struct SparseRow {
  std::vector<int> idx;
  std::vector<double> val;

  void add(int i, double v) {
    idx.push_back(i);
    val.push_back(v);
  }
  double dot(const Eigen::VectorXd& x) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) acc += val[k] * x[idx[k]];
    return acc;
  }
};

// weight * fn(offset + arg . x)
struct CostTerm {
  SparseRow arg;
  double offset = 0.0;
  double weight = 1.0;
  ScalarFn fn;
};

// min sum(terms) + linear . x  subject to rows . x <= rhs
struct ConvexProgram {
  int num_vars = 0;
  std::vector<CostTerm> terms;
  std::vector<double> linear;
  std::vector<SparseRow> rows;
  std::vector<double> rhs;

  int add_row(SparseRow row, double bound) {
    rows.push_back(std::move(row));
    rhs.push_back(bound);
    return static_cast<int>(rows.size()) - 1;
  }
  int add_upper_bound(int var, double bound) {
    SparseRow r;
    r.add(var, 1.0);
    return add_row(std::move(r), bound);
  }
  int add_lower_bound(int var, double bound) {
    SparseRow r;
    r.add(var, -1.0);
    return add_row(std::move(r), -bound);
  }

  double objective(const Eigen::VectorXd& x) const {
    double f = 0.0;
    for (const auto& t : terms) f += t.weight * t.fn(t.offset + t.arg.dot(x)).value;
    for (int i = 0; i < num_vars && i < static_cast<int>(linear.size()); ++i) f += linear[i] * x[i];
    return f;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(num_vars);
    for (const auto& t : terms) {
      const double d1 = t.weight * t.fn(t.offset + t.arg.dot(x)).d1;
      for (std::size_t k = 0; k < t.arg.idx.size(); ++k) g[t.arg.idx[k]] += d1 * t.arg.val[k];
    }
    for (int i = 0; i < num_vars && i < static_cast<int>(linear.size()); ++i) g[i] += linear[i];
    return g;
  }

  Eigen::VectorXd row_values(const Eigen::VectorXd& x) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) v[static_cast<Eigen::Index>(i)] = rows[i].dot(x);
    return v;
  }
};

struct IpmOptions {
  double tol = 1e-9;
  int max_iters = 300;
  // Objective divisor; keeps multipliers and residuals O(1).
  double objective_scale = 1.0;
};

struct IpmResult {
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;  // one per row, in objective units
  Eigen::VectorXd slack;
  double objective = 0.0;
  double complementarity = 0.0;  // s . z in objective units
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Infeasible-start primal-dual interior point with Mehrotra correction.
inline IpmResult solve_ipm(const ConvexProgram& prog, const Eigen::VectorXd& x0, const IpmOptions& opt = {}) {
  const int n = prog.num_vars;
  const auto m = static_cast<Eigen::Index>(prog.rows.size());
  if (x0.size() != n) throw std::invalid_argument("solve_ipm: starting point has the wrong size");
  const double scale = opt.objective_scale > 0.0 ? opt.objective_scale : 1.0;

  Eigen::VectorXd h(m);
  for (Eigen::Index i = 0; i < m; ++i) h[i] = prog.rhs[static_cast<std::size_t>(i)];
  const double h_norm = m > 0 ? h.lpNorm<Eigen::Infinity>() : 0.0;

  auto objective = [&](const Eigen::VectorXd& x) { return prog.objective(x) / scale; };

  auto gradient_hessian = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g, Eigen::MatrixXd& H) {
    g = Eigen::VectorXd::Zero(n);
    H = Eigen::MatrixXd::Zero(n, n);
    for (const auto& t : prog.terms) {
      const ScalarEval e = t.fn(t.offset + t.arg.dot(x));
      const double w1 = t.weight * e.d1 / scale;
      const double w2 = t.weight * e.d2 / scale;
      const auto& ix = t.arg.idx;
      const auto& vx = t.arg.val;
      for (std::size_t a = 0; a < ix.size(); ++a) {
        g[ix[a]] += w1 * vx[a];
        if (w2 == 0.0) continue;
        for (std::size_t b = 0; b < ix.size(); ++b) H(ix[a], ix[b]) += w2 * vx[a] * vx[b];
      }
    }
    for (int i = 0; i < n && i < static_cast<int>(prog.linear.size()); ++i) g[i] += prog.linear[i] / scale;
  };

  auto apply_gt = [&](const Eigen::VectorXd& y) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& r = prog.rows[static_cast<std::size_t>(i)];
      for (std::size_t k = 0; k < r.idx.size(); ++k) out[r.idx[k]] += r.val[k] * y[i];
    }
    return out;
  };
  auto apply_g = [&](const Eigen::VectorXd& x) { return prog.row_values(x); };

  IpmResult res;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd gx = apply_g(x);
  Eigen::VectorXd s(m), z(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    s[i] = std::max(h[i] - gx[i], 1.0);
    z[i] = 1.0;
  }

  auto max_step = [](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
    }
    return alpha;
  };

  Eigen::VectorXd g;
  Eigen::MatrixXd H;
  for (int it = 0; it < opt.max_iters; ++it) {
    res.iterations = it;
    gradient_hessian(x, g, H);
    gx = apply_g(x);
    const Eigen::VectorXd rd = g + apply_gt(z);
    const Eigen::VectorXd rp = gx + s - h;
    const double f = objective(x);
    if (!std::isfinite(f)) throw NumericError("solve_ipm: objective is not finite");
    const double sz = m > 0 ? s.dot(z) : 0.0;
    const double mu = m > 0 ? sz / static_cast<double>(m) : 0.0;
    res.primal_residual = m > 0 ? rp.lpNorm<Eigen::Infinity>() : 0.0;
    res.dual_residual = rd.lpNorm<Eigen::Infinity>();
    if (res.primal_residual <= opt.tol * (1.0 + h_norm) &&
        res.dual_residual <= opt.tol * (1.0 + g.lpNorm<Eigen::Infinity>()) && sz <= opt.tol * (1.0 + std::abs(f))) {
      res.converged = true;
      break;
    }

    const Eigen::VectorXd d = z.cwiseQuotient(s);
    Eigen::MatrixXd K = H;
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& r = prog.rows[static_cast<std::size_t>(i)];
      for (std::size_t a = 0; a < r.idx.size(); ++a) {
        for (std::size_t b = 0; b < r.idx.size(); ++b) K(r.idx[a], r.idx[b]) += d[i] * r.val[a] * r.val[b];
      }
    }
    const double diag_max = n > 0 ? K.diagonal().cwiseAbs().maxCoeff() : 1.0;
    Eigen::MatrixXd Kreg = K;
    Kreg.diagonal().array() += 1e-13 * std::max(diag_max, 1.0);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Kreg);
    if (ldlt.info() != Eigen::Success) throw NumericError("solve_ipm: KKT factorization failed");
    // Near the optimum z/s spans many decades; refinement against the exact
    // matrix recovers the accuracy the regularized factorization loses.
    auto kkt_solve = [&](const Eigen::VectorXd& rhs) {
      Eigen::VectorXd sol = ldlt.solve(rhs);
      for (int pass = 0; pass < 3; ++pass) sol += ldlt.solve(rhs - K * sol);
      return sol;
    };

    auto newton = [&](const Eigen::VectorXd& comp, Eigen::VectorXd& dx, Eigen::VectorXd& ds, Eigen::VectorXd& dz) {
      const Eigen::VectorXd w = d.cwiseProduct(rp) + comp.cwiseQuotient(s);
      dx = kkt_solve(-rd - apply_gt(w));
      ds = -rp - apply_g(dx);
      dz = (comp - z.cwiseProduct(ds)).cwiseQuotient(s);
    };

    Eigen::VectorXd dx, ds, dz;
    const Eigen::VectorXd comp_aff = -s.cwiseProduct(z);
    newton(comp_aff, dx, ds, dz);
    const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
    double sigma = 0.0;
    if (m > 0 && mu > 0.0) {
      const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(m);
      sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
    }
    // Never aim below the complementarity the stopping rule asks for; collapsing
    // s.z first leaves the dual residual stuck on an ill-conditioned system.
    const double mu_floor = m > 0 ? 0.1 * opt.tol * (1.0 + std::abs(f)) / static_cast<double>(m) : 0.0;
    const double target = std::max(sigma * mu, std::min(mu, mu_floor));
    const Eigen::VectorXd comp = Eigen::VectorXd::Constant(m, target) - s.cwiseProduct(z) - ds.cwiseProduct(dz);
    newton(comp, dx, ds, dz);

    double alpha = std::min(1.0, 0.995 * std::min(max_step(s, ds), max_step(z, dz)));
    for (int bt = 0; bt < 60 && !std::isfinite(objective(x + alpha * dx)); ++bt) alpha *= 0.5;
    x += alpha * dx;
    s += alpha * ds;
    z += alpha * dz;
    for (Eigen::Index i = 0; i < m; ++i) {
      s[i] = std::max(s[i], 1e-300);
      z[i] = std::max(z[i], 1e-300);
    }
    res.iterations = it + 1;
  }

  res.x = x;
  res.slack = s;
  res.multipliers = z * scale;
  res.objective = prog.objective(x);
  res.complementarity = (m > 0 ? s.dot(z) : 0.0) * scale;
  return res;
}

}  // namespace edgecache
