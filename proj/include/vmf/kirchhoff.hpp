#pragma once
// Point-vortex Hamiltonian H_N = sum_i r_i^2 H(x_i,x_i) + sum_{i!=j} r_i r_j
// G(x_i,x_j), its gradient, critical-configuration search, and the
// stationarity residual of peak sets produced by the blow-up diagnostics.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "vmf/blowup.hpp"
#include "vmf/greens.hpp"

namespace vmf {

struct VortexConfig {
  std::vector<Vec2> points;
  std::vector<double> intensities;
};

inline bool point_interior(const Domain& d, Vec2 p) {
  switch (d.kind) {
    case DomainKind::UnitDisk:
      return p.x * p.x + p.y * p.y < 1.0;
    case DomainKind::Rectangle:
      return p.x > 0.0 && p.x < d.lx && p.y > 0.0 && p.y < d.ly;
    default:
      return true;  // the torus has no boundary
  }
}

inline double config_distance(const Domain& d, Vec2 a, Vec2 b) {
  double dx = b.x - a.x, dy = b.y - a.y;
  if (d.kind == DomainKind::FlatTorus) {
    dx -= d.lx * std::round(dx / d.lx);
    dy -= d.ly * std::round(dy / d.ly);
  }
  return std::hypot(dx, dy);
}

namespace detail {

inline bool config_valid(const Domain& d, const VortexConfig& c) {
  if (c.points.empty() || c.points.size() != c.intensities.size()) return false;
  for (Vec2 p : c.points)
    if (!point_interior(d, p)) return false;
  for (std::size_t i = 0; i < c.points.size(); ++i)
    for (std::size_t j = i + 1; j < c.points.size(); ++j)
      if (config_distance(d, c.points[i], c.points[j]) <= 1e-8) return false;
  return true;
}

}  // namespace detail

inline void validate_config(const Domain& d, const VortexConfig& c) {
  if (c.points.empty()) throw std::invalid_argument("vortex config: at least one vortex required");
  if (c.points.size() != c.intensities.size())
    throw std::invalid_argument("vortex config: points/intensities length mismatch");
  for (Vec2 p : c.points)
    if (!point_interior(d, p))
      throw std::invalid_argument("vortex config: point outside the domain interior");
  for (std::size_t i = 0; i < c.points.size(); ++i)
    for (std::size_t j = i + 1; j < c.points.size(); ++j)
      if (config_distance(d, c.points[i], c.points[j]) <= 1e-8)
        throw std::invalid_argument("vortex config: coincident points");
}

inline double hamiltonian(const VortexConfig& c, const GreensEvaluator& green) {
  validate_config(green.domain(), c);
  const std::size_t n = c.points.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    s += c.intensities[i] * c.intensities[i] * green.H_diag(c.points[i]);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) s += c.intensities[i] * c.intensities[j] * green.G(c.points[i], c.points[j]);
  return s;
}

// Per-vortex gradient of H_N. The diagonal term differentiates x -> H(x,x),
// which by symmetry of H is twice the coincidence-partial the evaluator
// provides.
inline std::vector<Vec2> gradient(const VortexConfig& c, const GreensEvaluator& green) {
  validate_config(green.domain(), c);
  const std::size_t n = c.points.size();
  std::vector<Vec2> g(n);
  for (std::size_t k = 0; k < n; ++k) {
    Vec2 hd = green.grad_H_diag(c.points[k]);
    double gx = 2.0 * c.intensities[k] * c.intensities[k] * hd.x;
    double gy = 2.0 * c.intensities[k] * c.intensities[k] * hd.y;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == k) continue;
      Vec2 gg = green.grad_G(c.points[k], c.points[j]);
      gx += 2.0 * c.intensities[k] * c.intensities[j] * gg.x;
      gy += 2.0 * c.intensities[k] * c.intensities[j] * gg.y;
    }
    g[k] = {gx, gy};
  }
  return g;
}

struct CriticalityReport {
  double gradient_norm = 0.0;
  std::vector<Vec2> gradients;
  bool converged = false;
  bool degenerate = false;  // torus with a single vortex: H_N is constant
  int iterations = 0;
  std::string message;
};

struct FindCriticalOptions {
  double tol = 1e-9;
  int max_iter = 500;
  double hessian_step = 1e-5;
};

namespace detail {

inline double gradient_norm(const std::vector<Vec2>& g) {
  double s = 0.0;
  for (Vec2 v : g) s += v.x * v.x + v.y * v.y;
  return std::sqrt(s);
}

inline Eigen::VectorXd flatten(const std::vector<Vec2>& g) {
  Eigen::VectorXd out(2 * g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    out[2 * i] = g[i].x;
    out[2 * i + 1] = g[i].y;
  }
  return out;
}

inline VortexConfig shifted(const VortexConfig& c, const Eigen::VectorXd& step, double t) {
  VortexConfig out = c;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    out.points[i].x += t * step[2 * i];
    out.points[i].y += t * step[2 * i + 1];
  }
  return out;
}

}  // namespace detail

// Damped Newton on the gradient; the Hessian comes from central differences
// of the gradient. Rank-deficient Hessians (rotation orbits on the disk,
// translations on the torus) fall back to the minimal-norm least-squares
// step, and failing that to plain gradient descent. Steps that would push a
// vortex out of the domain or collide two vortices are rejected and halved.
inline CriticalityReport find_critical(VortexConfig& c, const GreensEvaluator& green,
                                       const FindCriticalOptions& opt = {}) {
  const Domain& d = green.domain();
  validate_config(d, c);
  const int n = static_cast<int>(c.points.size());
  const int dim = 2 * n;

  CriticalityReport rep;
  rep.degenerate = d.kind == DomainKind::FlatTorus && n == 1;

  std::vector<Vec2> g = gradient(c, green);
  double gn = detail::gradient_norm(g);
  for (int iter = 0; iter < opt.max_iter; ++iter) {
    if (gn <= opt.tol) {
      rep.converged = true;
      break;
    }
    rep.iterations = iter + 1;

    Eigen::MatrixXd H(dim, dim);
    const double hs = opt.hessian_step;
    for (int m = 0; m < dim; ++m) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
      e[m] = 1.0;
      std::vector<Vec2> gp = gradient(detail::shifted(c, e, hs), green);
      std::vector<Vec2> gm = gradient(detail::shifted(c, e, -hs), green);
      H.col(m) = (detail::flatten(gp) - detail::flatten(gm)) / (2.0 * hs);
    }

    Eigen::VectorXd gv = detail::flatten(g);
    // Continuous symmetries (rotation orbits, torus translations) make the
    // Hessian rank-deficient; the rank threshold keeps finite-difference
    // noise out of the null-space decision, and the minimal-norm solve stays
    // transverse to the orbit.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(1e-3);
    cod.compute(H);
    Eigen::VectorXd delta = cod.solve(-gv);
    if (!delta.allFinite()) delta = -gv;
    const double cap = 0.5 * std::min(d.lx, d.ly);
    if (delta.norm() > cap) delta *= cap / delta.norm();

    auto try_direction = [&](const Eigen::VectorXd& dir, VortexConfig& out_c,
                             std::vector<Vec2>& out_g, double& out_gn) {
      double t = 1.0;
      for (int h = 0; h < 30; ++h, t *= 0.5) {
        VortexConfig trial = detail::shifted(c, dir, t);
        if (!detail::config_valid(d, trial)) continue;
        std::vector<Vec2> tg = gradient(trial, green);
        double tn = detail::gradient_norm(tg);
        if (tn < out_gn) {
          out_c = std::move(trial);
          out_g = std::move(tg);
          out_gn = tn;
          return true;
        }
      }
      return false;
    };

    VortexConfig next = c;
    std::vector<Vec2> next_g = g;
    double next_gn = gn;
    bool moved = try_direction(delta, next, next_g, next_gn);
    // Gradient flow fallback, both orientations: the sought critical point
    // may be a maximum or saddle of H_N.
    if (!moved) moved = try_direction(-gv, next, next_g, next_gn);
    if (!moved) moved = try_direction(gv, next, next_g, next_gn);
    if (!moved) {
      rep.message = "line search stalled";
      break;
    }
    c = std::move(next);
    g = std::move(next_g);
    gn = next_gn;
  }
  if (!rep.converged && rep.message.empty()) rep.message = "maximum iterations exceeded";
  if (rep.converged) rep.message = "converged";
  rep.gradients = g;
  rep.gradient_norm = gn;
  return rep;
}

// Stationarity defect of each peak x0: the norm of
//   grad_x [ H(x,x0) + sum_{x0' != x0} (net(x0')/net(x0)) G(x,x0') ]  at x0.
// net is the signed concentration mass m+ - m-.
inline std::vector<double> location_residual(const std::vector<Vec2>& points,
                                             const std::vector<double>& net_mass,
                                             const GreensEvaluator& green) {
  if (points.empty()) throw std::invalid_argument("location_residual: no peaks");
  if (points.size() != net_mass.size())
    throw std::invalid_argument("location_residual: one net mass per peak required");
  for (double m : net_mass)
    if (m == 0.0)
      throw std::invalid_argument(
          "location_residual: zero net mass at a peak (mass relation violated)");

  std::vector<double> out(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    Vec2 grad = green.grad_H_diag(points[k]);
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (j == k) continue;
      double ratio = net_mass[j] / net_mass[k];
      Vec2 gg = green.grad_G(points[k], points[j]);
      grad.x += ratio * gg.x;
      grad.y += ratio * gg.y;
    }
    out[k] = std::hypot(grad.x, grad.y);
  }
  return out;
}

// Fills the per-peak location residuals of a blow-up report, using the same
// mass mode the report used for its Green-profile comparison.
inline void annotate_location_residuals(BlowupReport& rep, const GreensEvaluator& green) {
  if (rep.peaks.empty()) return;
  std::vector<Vec2> pts;
  std::vector<double> net;
  bool limit = rep.rv_mass_mode == "limit";
  for (const PeakReport& p : rep.peaks) {
    pts.push_back({p.peak.x, p.peak.y});
    net.push_back(limit ? p.m_plus_limit - p.m_minus_limit : p.m_plus - p.m_minus);
  }
  std::vector<double> res = location_residual(pts, net, green);
  for (std::size_t i = 0; i < rep.peaks.size(); ++i) rep.peaks[i].location_residual = res[i];
}

}  // namespace vmf
