#include "psmooth/second_order.hpp"

#include "psmooth/linalg.hpp"
#include "psmooth/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace psmooth {

LagrangianData lagrangian_at(const FunctionModel& fm, const Vector& x, const Vector& v) {
  require_subgradient(fm, x, v);
  LagrangianData lag;
  lag.x = x;
  lag.v = v;
  lag.manifold = fm.active_manifold(x);
  const ManifoldChart& chart = lag.manifold.chart;
  const SmoothFunction& rep = lag.manifold.representative;
  lag.mu = solve_multiplier(chart, x, v - rep.gradient(x));
  lag.hessian = symmetrized(rep.hessian(x) + multiplier_hessian(chart, x, lag.mu));
  lag.tangent = tangent_basis(chart, x);
  lag.normal = normal_basis(chart, x);
  return lag;
}

double difference_quotient(const FunctionModel& fm, const Vector& x, const Vector& v, double t,
                           const Vector& w) {
  require(t > 0.0, ErrorKind::ConfigInvalid, "difference_quotient needs t > 0");
  const double fy = fm.value(x + t * w);
  if (!std::isfinite(fy)) return kInf;
  return (fy - fm.value(x) - t * v.dot(w)) / (0.5 * t * t);
}

bool is_tangent(const Matrix& tangent_basis, const Vector& w, double tol) {
  Vector r = w;
  if (tangent_basis.cols() > 0) r -= tangent_basis * (tangent_basis.transpose() * w);
  return r.norm() <= tol * w.norm();
}

namespace {

void require_ri(const FunctionModel& fm, const Vector& x, const Vector& v) {
  const RiTest ri = relative_interior_test(fm.subdifferential(x), v);
  require(ri.inside, ErrorKind::RiViolated, "v is not in the relative interior of df(x)");
}

}  // namespace

double second_subderivative(const LagrangianData& lag, const Vector& w) {
  require(w.size() == lag.x.size(), ErrorKind::DimensionMismatch, "direction size");
  if (!is_tangent(lag.tangent.basis, w)) return kInf;
  return w.dot(lag.hessian * w);
}

double second_subderivative(const FunctionModel& fm, const Vector& x, const Vector& v, const Vector& w) {
  require_subgradient(fm, x, v);
  require_ri(fm, x, v);
  return second_subderivative(lagrangian_at(fm, x, v), w);
}

Matrix reduced_hessian(const LagrangianData& lag) {
  const Matrix& t = lag.tangent.basis;
  return symmetrized(t.transpose() * lag.hessian * t);
}

namespace {

struct LevelResult {
  double value = kInf;
  double rounding = 0.0;
};

Vector project_ball(const Vector& y, const Vector& center, double radius) {
  const Vector d = y - center;
  const double nd = d.norm();
  return nd <= radius ? y : Vector(center + (radius / nd) * d);
}

// Minimum of the difference quotient at t over the ball B(w, rho): sampled
// starts followed by a projected compass search.
LevelResult minimize_level(const FunctionModel& fm, const Vector& x, const Vector& v, double fx,
                           const Vector& w, double t, double rho, const NumericD2Options& opt,
                           int level) {
  const Index n = x.size();
  auto quotient = [&](const Vector& y) {
    const double fy = fm.value(x + t * y);
    if (!std::isfinite(fy)) return kInf;
    return (fy - fx - t * v.dot(y)) / (0.5 * t * t);
  };
  RandomStream rng(opt.seed, static_cast<std::uint32_t>(level), 0x64327100u);
  std::vector<Vector> dirs;
  for (Index i = 0; i < n; ++i) {
    dirs.push_back(Vector::Unit(n, i));
    dirs.push_back(-Vector::Unit(n, i));
  }
  Vector best = w;
  double best_val = quotient(w);
  for (int k = 0; k < opt.ball_samples; ++k) {
    Vector u = rng.normal_vector(n);
    const double nu = u.norm();
    if (nu == 0.0) continue;
    u /= nu;
    if (k < 8 && n > 1) {
      dirs.push_back(u);
      dirs.push_back(-u);
    }
    const double scale = rho * std::pow(rng.uniform(), 1.0 / static_cast<double>(n));
    const Vector y = w + scale * u;
    const double q = quotient(y);
    if (q < best_val) {
      best_val = q;
      best = y;
    }
  }
  // Random directions are redrawn after every failed poll and the step is
  // halved after two failures in a row; a pattern move follows each success.
  // Both help the search follow curved valleys of the nonsmooth quotient.
  const std::size_t fixed = static_cast<std::size_t>(2 * n);
  double step = 0.25 * rho;
  int fails = 0;
  for (int it = 0; it < opt.refine_iters && step > 1e-10 * rho; ++it) {
    Vector cand_best = best;
    double cand_val = best_val;
    for (const Vector& d : dirs) {
      const Vector y = project_ball(best + step * d, w, rho);
      const double q = quotient(y);
      if (q < cand_val) {
        cand_val = q;
        cand_best = y;
      }
    }
    if (cand_val < best_val) {
      const Vector shift = cand_best - best;
      best_val = cand_val;
      best = cand_best;
      const Vector y = project_ball(best + shift, w, rho);
      const double q = quotient(y);
      if (q < best_val) {
        best_val = q;
        best = y;
      }
      fails = 0;
    } else {
      for (std::size_t k = fixed; k + 1 < dirs.size(); k += 2) {
        Vector u = rng.normal_vector(n);
        u /= u.norm();
        dirs[k] = u;
        dirs[k + 1] = -u;
      }
      if (++fails >= 2 || dirs.size() == fixed) {
        step *= 0.5;
        fails = 0;
      }
    }
  }
  LevelResult out;
  out.value = best_val;
  if (std::isfinite(best_val)) {
    const double eps = std::numeric_limits<double>::epsilon();
    const double fy = fm.value(x + t * best);
    out.rounding = 4.0 * eps * (std::abs(fx) + std::abs(fy) + t * std::abs(v.dot(best))) / (0.5 * t * t);
  }
  return out;
}

}  // namespace

NumericD2 second_subderivative_numeric(const FunctionModel& fm, const Vector& x, const Vector& v,
                                       const Vector& w, const NumericD2Options& opt) {
  require(x.size() == fm.dim() && v.size() == fm.dim() && w.size() == fm.dim(),
          ErrorKind::DimensionMismatch, "second_subderivative_numeric sizes");
  const double fx = fm.value(x);
  require(std::isfinite(fx), ErrorKind::PointOutsideDomain, "f(x) must be finite");
  const int levels = std::max(opt.levels, 3);
  std::vector<LevelResult> lv(static_cast<std::size_t>(levels + 1));
  NumericD2 out;
  for (int j = 0; j <= levels; ++j) {
    const double scale = std::ldexp(1.0, -j);
    lv[static_cast<std::size_t>(j)] =
        minimize_level(fm, x, v, fx, w, opt.t0 * scale, opt.ball_radius * scale, opt, j);
    out.per_level.push_back(std::min(lv[static_cast<std::size_t>(j)].value, kNumericCap));
  }
  const double finest = lv.back().value;
  if (!std::isfinite(finest) || finest >= kNumericCap) {
    out.value = kNumericCap;
    out.infinite = true;
    out.level = levels;
    out.converged = true;
    return out;
  }
  if (finest > kDomainThreshold) {
    // Quotients that grow like 1/t: report the finest level as is.
    out.value = finest;
    out.level = levels;
    out.converged = true;
    return out;
  }
  // Romberg extrapolation in the level index: the ball and the step shrink
  // together, so level values behave like L + c1 2^-j + c2 4^-j.
  std::vector<double> e(static_cast<std::size_t>(levels + 1), kInf);
  for (int j = 2; j <= levels; ++j) {
    const double a = lv[static_cast<std::size_t>(j)].value;
    const double b = lv[static_cast<std::size_t>(j - 1)].value;
    const double c = lv[static_cast<std::size_t>(j - 2)].value;
    if (std::isfinite(a) && std::isfinite(b) && std::isfinite(c))
      e[static_cast<std::size_t>(j)] = (8.0 * a - 6.0 * b + c) / 3.0;
  }
  double best_err = kInf;
  // Three consecutive extrapolants must agree: the search error in single
  // levels makes one difference an unreliable error estimate.
  for (int j = 4; j <= levels; ++j) {
    const double ej = e[static_cast<std::size_t>(j)];
    const double ep = e[static_cast<std::size_t>(j - 1)];
    const double epp = e[static_cast<std::size_t>(j - 2)];
    if (!std::isfinite(ej) || !std::isfinite(ep) || !std::isfinite(epp)) continue;
    double round = 0.0;
    for (int k = j - 4; k <= j; ++k) round = std::max(round, lv[static_cast<std::size_t>(k)].rounding);
    const double err = 5.0 * round + std::max(std::abs(ej - ep), std::abs(ep - epp));
    if (err < best_err) {
      best_err = err;
      out.level = j;
      out.value = ej;
    }
  }
  if (!std::isfinite(best_err)) {
    out.value = std::min(finest, kNumericCap);
    out.level = levels;
    out.converged = false;
    return out;
  }
  out.converged = best_err <= opt.oracle_tol * (1.0 + std::abs(out.value));
  return out;
}

GraphicalDerivative graphical_derivative(const FunctionModel& fm, const Vector& x, const Vector& v,
                                         const Vector& w) {
  require_subgradient(fm, x, v);
  require_ri(fm, x, v);
  const LagrangianData lag = lagrangian_at(fm, x, v);
  GraphicalDerivative out;
  out.normal = lag.normal;
  if (!is_tangent(lag.tangent.basis, w)) {
    out.empty = true;
    return out;
  }
  const Matrix& t = lag.tangent.basis;
  const Vector hw = lag.hessian * w;
  out.base = t.cols() > 0 ? Vector(t * (t.transpose() * hw)) : Vector(Vector::Zero(x.size()));
  return out;
}

namespace {

struct GraphPair {
  Vector x;
  Vector v;
};

// Newton projection onto { phi = 0 } along the row space of the Jacobian.
bool project_to_chart(const ManifoldChart& chart, Vector& y) {
  for (int it = 0; it < 50 && chart.codim > 0; ++it) {
    const Vector phi = chart.phi(y);
    if (phi.norm() <= 1e-14 * (1.0 + y.norm())) return true;
    const Matrix j = chart.jacobian(y);
    y -= j.transpose() * (j * j.transpose()).ldlt().solve(phi);
  }
  return chart.codim == 0 || chart.on_manifold(y);
}

std::vector<GraphPair> sample_pairs(const FunctionModel& fm, const Vector& x, const Vector& v,
                                    double rho, int num_random, RandomStream& rng) {
  const Index n = x.size();
  std::vector<GraphPair> pairs;
  auto accept = [&](const Vector& xp, const Vector& vp) {
    if (!std::isfinite(fm.value(xp))) return;
    if (inf_norm(vp - v) > 10.0 * rho) return;
    pairs.push_back({xp, vp});
  };
  auto nearest = [&](const Vector& xp) {
    const SubdifferentialRep s = fm.subdifferential(xp);
    if (s.empty) return;
    accept(xp, project_inf(s, v).point);
  };
  // Pairs off the manifold: axis and random displacements with the nearest subgradient.
  for (Index i = 0; i < n; ++i) {
    nearest(x + rho * Vector::Unit(n, i));
    nearest(x - rho * Vector::Unit(n, i));
  }
  for (int k = 0; k < num_random; ++k) {
    Vector u = rng.normal_vector(n);
    u *= rho * rng.uniform() / std::max(u.norm(), 1e-300);
    nearest(x + u);
  }
  // Pairs on the manifold: x' in M, v' = grad f_hat(x') + grad phi(x')^T mu'.
  try {
    const ActiveManifold am = fm.active_manifold(x);
    const Vector mu = solve_multiplier(am.chart, x, v - am.representative.gradient(x));
    const Matrix t = tangent_basis(am.chart, x).basis;
    for (int k = 0; k < num_random; ++k) {
      Vector xp = x;
      if (t.cols() > 0) xp += t * (rho * rng.uniform() * rng.normal_vector(t.cols()).normalized());
      if (!project_to_chart(am.chart, xp)) continue;
      Vector mup = mu;
      if (mu.size() > 0) mup += rho * rng.uniform() * rng.normal_vector(mu.size()).normalized();
      Vector vp = am.representative.gradient(xp);
      if (am.chart.codim > 0) vp += am.chart.jacobian(xp).transpose() * mup;
      if (contains(fm.subdifferential(xp), vp, 1e-9)) accept(xp, vp);
    }
  } catch (const Error&) {
    // Without a usable chart only the off-manifold pairs are probed.
  }
  return pairs;
}

}  // namespace

ProbeReport strict_ted_probe(const FunctionModel& fm, const Vector& x, const Vector& v,
                             const ProbeOptions& opt) {
  require_subgradient(fm, x, v);
  const Index n = x.size();
  std::vector<Vector> dirs = opt.directions;
  if (dirs.empty())
    for (Index i = 0; i < n; ++i) {
      dirs.push_back(Vector::Unit(n, i));
      dirs.push_back(-Vector::Unit(n, i));
    }
  std::vector<double> ref;
  for (const Vector& d : dirs) ref.push_back(second_subderivative_numeric(fm, x, v, d, opt.oracle).value);

  ProbeReport rep;
  RandomStream rng(opt.seed, 0, 0x74656400u);
  for (int k = 0; k <= opt.radius_levels; ++k) {
    rng.seek(static_cast<std::uint32_t>(k));
    const double rho = opt.neighborhood_radius * std::ldexp(1.0, -k);
    const bool finest = k == opt.radius_levels;
    double worst = 0.0;
    for (const GraphPair& p : sample_pairs(fm, x, v, rho, opt.num_pairs, rng)) {
      ++rep.pairs_tested;
      for (std::size_t d = 0; d < dirs.size(); ++d) {
        const double val = second_subderivative_numeric(fm, p.x, p.v, dirs[d], opt.oracle).value;
        const bool in_a = val < opt.domain_threshold;
        const bool in_b = ref[d] < opt.domain_threshold;
        const bool jump = in_a != in_b;
        const double disc = jump ? kInf : (in_a ? std::abs(val - ref[d]) : 0.0);
        if (disc > worst) worst = disc;
        if (finest && disc > rep.worst_discrepancy) {
          rep.worst_discrepancy = disc;
          rep.domain_jump = rep.domain_jump || jump;
          rep.offending_pair = ProbePair{p.x, p.v, rho, dirs[d], val, ref[d], jump};
        }
      }
    }
    rep.worst_by_radius.push_back(worst);
  }
  rep.stable = rep.worst_discrepancy <= opt.probe_tol;
  if (rep.stable) rep.offending_pair.reset();
  return rep;
}

GrowthReport quadratic_growth_check(const FunctionModel& fm, const Vector& x) {
  const Vector zero = Vector::Zero(fm.dim());
  require_subgradient(fm, x, zero);
  require_ri(fm, x, zero);
  const LagrangianData lag = lagrangian_at(fm, x, zero);
  GrowthReport g;
  if (lag.tangent.basis.cols() == 0) {
    g.holds = true;
    g.min_eigenvalue = kInf;
    return g;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(reduced_hessian(lag));
  g.min_eigenvalue = es.eigenvalues().minCoeff();
  g.holds = g.min_eigenvalue > 0.0;
  return g;
}

}  // namespace psmooth
