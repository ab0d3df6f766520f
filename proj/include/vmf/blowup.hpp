#pragma once
// Diagnostics extracted from a computed solution: concentration peaks, local
// vortex masses m+/m-, the quadratic mass relation, the Green-profile
// comparison away from peaks, interior Pohozaev defects, and the
// Brezis-Merle exponential-integrability bound.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "vmf/domain.hpp"
#include "vmf/greens.hpp"
#include "vmf/measure.hpp"
#include "vmf/solver.hpp"

namespace vmf {

struct Peak {
  double x = 0.0, y = 0.0;
  int node = -1;
  int sign = 0;         // sign of v at the peak
  double height = 0.0;  // |v| there
};

// Strict local maxima of |v| over the 8 surrounding lattice sites (missing
// sites carry the Dirichlet value 0), greedily thinned keep-higher so no two
// survivors are closer than min_separation.
inline std::vector<Peak> detect_peaks(const Grid& g, const Field& v, double threshold,
                                      double min_separation) {
  if (static_cast<int>(v.size()) != g.count())
    throw std::invalid_argument("detect_peaks: field size mismatch");
  if (!(threshold > 0.0)) throw std::invalid_argument("detect_peaks: threshold must be positive");
  if (min_separation < 0.0)
    throw std::invalid_argument("detect_peaks: min_separation must be nonnegative");

  std::vector<Peak> cand;
  for (int p = 0; p < g.count(); ++p) {
    double a = std::abs(v[p]);
    if (a < threshold) continue;
    int i = static_cast<int>(std::lround((g.xs[p] - g.ox) / g.h));
    int j = static_cast<int>(std::lround((g.ys[p] - g.oy) / g.h));
    bool strict = true;
    for (int dj = -1; dj <= 1 && strict; ++dj)
      for (int di = -1; di <= 1; ++di) {
        if (di == 0 && dj == 0) continue;
        int q = g.node_of_site(i + di, j + dj);
        double nb = q >= 0 ? std::abs(v[q]) : 0.0;
        if (nb >= a) {
          strict = false;
          break;
        }
      }
    if (strict) cand.push_back({g.xs[p], g.ys[p], p, v[p] > 0.0 ? 1 : -1, a});
  }

  std::sort(cand.begin(), cand.end(), [](const Peak& a, const Peak& b) {
    if (a.height != b.height) return a.height > b.height;
    return a.node < b.node;
  });
  std::vector<Peak> out;
  for (const Peak& c : cand) {
    bool keep = true;
    for (const Peak& o : out)
      if (g.distance(c.x, c.y, o.x, o.y) < min_separation) {
        keep = false;
        break;
      }
    if (keep) out.push_back(c);
  }
  return out;
}

struct LocalMasses {
  double m_plus = 0.0;
  double m_minus = 0.0;
};

namespace detail {

inline void require_ball_inside(const Grid& g, double cx, double cy, double r,
                                const char* who) {
  if (!(r > 0.0)) throw std::invalid_argument(std::string(who) + ": radius must be positive");
  if (g.periodic) {
    if (2.0 * r >= std::min(g.domain.lx, g.domain.ly))
      throw std::invalid_argument(std::string(who) + ": ball wraps around the torus");
  } else if (boundary_distance(g.domain, cx, cy) < r) {
    throw std::invalid_argument(std::string(who) + ": ball exits the domain");
  }
}

}  // namespace detail

// Integrals of the signed nonlinearity densities over B_r(c).
inline LocalMasses local_masses(const Grid& g, const Nonlinearity& nl, double cx, double cy,
                                double r) {
  detail::require_ball_inside(g, cx, cy, r, "local_masses");
  std::vector<double> wb = ball_weights(g, cx, cy, r);
  LocalMasses m;
  for (int p = 0; p < g.count(); ++p) {
    m.m_plus += wb[p] * nl.plus[p];
    m.m_minus += wb[p] * nl.minus[p];
  }
  return m;
}

inline LocalMasses local_masses(const Grid& g, const MeanFieldProblem& p, const Field& v,
                                const Peak& peak, double r) {
  return local_masses(g, nonlinearity(g, p, v), peak.x, peak.y, r);
}

struct MassPair {
  double s = 0.0;  // m_plus
  double t = 0.0;  // m_minus
};

// |(m+ - m-)^2 - 8 pi (beta+ m+ + beta- m-)|, the concentration-mass identity.
inline double mass_relation_residual(const MassPair& m, const BetaCoefficients& beta) {
  double d = m.s - m.t;
  return std::abs(d * d - 8.0 * kPi * (beta.beta_plus * m.s + beta.beta_minus * m.t));
}

enum class MassRegion { DPlus, DMinus, Both, Neither };

inline const char* mass_region_name(MassRegion r) {
  switch (r) {
    case MassRegion::DPlus: return "D+";
    case MassRegion::DMinus: return "D-";
    case MassRegion::Both: return "both";
    default: return "neither";
  }
}

// Strict half-plane membership: s - t > 4 pi beta+ and/or t - s > 4 pi beta-.
inline MassRegion classify_mass_pair(const MassPair& m, const BetaCoefficients& beta) {
  bool dp = m.s - m.t > 4.0 * kPi * beta.beta_plus;
  bool dm = m.t - m.s > 4.0 * kPi * beta.beta_minus;
  if (dp && dm) return MassRegion::Both;
  if (dp) return MassRegion::DPlus;
  if (dm) return MassRegion::DMinus;
  return MassRegion::Neither;
}

// Points of the zero set (s-t)^2 = 8 pi (beta+ s + beta- t), parametrized by
// s >= 0. The lower branch leaves the quadrant t >= 0 for small s.
inline MassPair curve_mass_pair(double s, const BetaCoefficients& beta, bool upper) {
  if (s < 0.0) throw std::invalid_argument("curve_mass_pair: s must be nonnegative");
  double disc = 8.0 * kPi * (beta.beta_plus + beta.beta_minus) * s +
                16.0 * kPi * kPi * beta.beta_minus * beta.beta_minus;
  double root = std::sqrt(std::max(disc, 0.0));
  double t = s + 4.0 * kPi * beta.beta_minus + (upper ? root : -root);
  if (t < -1e-9 * std::max(1.0, s))
    throw std::domain_error("curve_mass_pair: lower branch undefined at this s");
  return {s, std::max(t, 0.0)};
}

// sup over nodes outside all exclusion balls of |v - sum_j net_j G(., x_j)|.
inline double residual_vanishing_error(const Grid& g, const Field& v,
                                       const std::vector<Peak>& peaks,
                                       const std::vector<double>& net_mass,
                                       const GreensEvaluator& green, double exclusion_radius) {
  if (peaks.empty()) throw std::invalid_argument("residual_vanishing_error: no peaks");
  if (net_mass.size() != peaks.size())
    throw std::invalid_argument("residual_vanishing_error: one net mass per peak required");
  if (!(exclusion_radius > 0.0))
    throw std::invalid_argument("residual_vanishing_error: exclusion radius must be positive");
  if (static_cast<int>(v.size()) != g.count())
    throw std::invalid_argument("residual_vanishing_error: field size mismatch");

  double sup = 0.0;
  for (int p = 0; p < g.count(); ++p) {
    bool excluded = false;
    for (const Peak& pk : peaks)
      if (g.distance(g.xs[p], g.ys[p], pk.x, pk.y) < exclusion_radius) {
        excluded = true;
        break;
      }
    if (excluded) continue;
    double v0 = 0.0;
    for (std::size_t j = 0; j < peaks.size(); ++j)
      if (net_mass[j] != 0.0)
        v0 += net_mass[j] * green.G({g.xs[p], g.ys[p]}, {peaks[j].x, peaks[j].y});
    sup = std::max(sup, std::abs(v[p] - v0));
  }
  return sup;
}

// Min distance from any peak to the Dirichlet boundary; +inf on the torus or
// with no peaks.
inline double boundary_distance(const Domain& d, const std::vector<Peak>& peaks) {
  if (d.kind == DomainKind::FlatTorus || peaks.empty())
    return std::numeric_limits<double>::infinity();
  double mind = std::numeric_limits<double>::infinity();
  for (const Peak& p : peaks) mind = std::min(mind, boundary_distance(d, p.x, p.y));
  return mind;
}

// Antiderivative in v of the equation's right-hand side, one value per node.
// The additive constant is immaterial: it cancels between the surface and
// volume terms of the ball identity in the continuum.
inline Field pohozaev_primitive(const Grid& g, const MeanFieldProblem& p, const Field& v) {
  const int N = g.count();
  Field W(N, 0.0);
  if (p.variant == Variant::SS) {
    const auto& atoms = p.measure.atoms();
    std::vector<double> e(N);
    for (const Atom& a : atoms) {
      double Di = 0.0;
      for (int q = 0; q < N; ++q) {
        e[q] = std::exp(a.alpha * v[q]);
        Di += g.w[q] * e[q];
      }
      for (int q = 0; q < N; ++q) W[q] += p.lambda * a.weight * e[q] / Di;
    }
    return W;
  }
  double D = 0.0;
  Field m0(N), m1(N);
  for (int q = 0; q < N; ++q) {
    ExpMoments m = p.measure.exp_moments(v[q]);
    m0[q] = m.m0;
    m1[q] = m.m1;
    D += g.w[q] * m.m0;
  }
  double shift = 0.0;
  if (p.variant == Variant::TorusNeri)
    shift = p.lambda * (integrate(g, m1) / g.domain.area()) / D;
  for (int q = 0; q < N; ++q) W[q] = p.lambda * m0[q] / D - shift * v[q];
  return W;
}

// Absolute defect of the interior-ball identity
//   r oint(|grad v|^2/2 - (n.grad v)^2) - r oint W + 2 int_B W = 0
// for solutions of -lap v = W'(v). Surface terms use midpoint quadrature on
// the circle with bilinearly interpolated central-difference gradients.
inline double pohozaev_residual(const Grid& g, const MeanFieldProblem& p, const Field& v,
                                double cx, double cy, double r) {
  validate_problem(g.domain, p);
  detail::require_ball_inside(g, cx, cy, r + 2.0 * g.h, "pohozaev_residual");
  Field W = pohozaev_primitive(g, p, v);
  Field gx, gy;
  node_gradient(g, v, gx, gy);

  int M = std::max(64, 8 * static_cast<int>(std::ceil(r / g.h)));
  double surf_kin = 0.0, surf_w = 0.0;
  double dtheta = kTwoPi / M;
  for (int k = 0; k < M; ++k) {
    double th = (k + 0.5) * dtheta;
    double nx = std::cos(th), ny = std::sin(th);
    double px = cx + r * nx, py = cy + r * ny;
    double vx = bilinear_value(g, gx, px, py);
    double vy = bilinear_value(g, gy, px, py);
    double nn = nx * vx + ny * vy;
    surf_kin += (0.5 * (vx * vx + vy * vy) - nn * nn) * r * dtheta;
    surf_w += bilinear_value(g, W, px, py) * r * dtheta;
  }

  std::vector<double> wb = ball_weights(g, cx, cy, r);
  double vol_w = 0.0;
  for (int q = 0; q < g.count(); ++q) vol_w += wb[q] * W[q];

  return std::abs(r * surf_kin - r * surf_w + 2.0 * vol_w);
}

struct BrezisMerleReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double delta = 0.0;
  double f_l1 = 0.0;
  bool holds = false;
};

// Exponential integrability of the Dirichlet Poisson solution:
// int exp((4 pi - delta)|u| / ||f||_1) <= (4 pi^2 / delta) diam^2.
inline BrezisMerleReport brezis_merle_check(const Grid& g, const Field& f, double delta) {
  if (g.domain.kind == DomainKind::FlatTorus)
    throw std::invalid_argument("brezis_merle_check: Dirichlet domain required");
  if (!(delta > 0.0 && delta < 4.0 * kPi))
    throw std::invalid_argument("brezis_merle_check: delta must lie in (0, 4*pi)");
  if (static_cast<int>(f.size()) != g.count())
    throw std::invalid_argument("brezis_merle_check: field size mismatch");
  double l1 = 0.0;
  for (int q = 0; q < g.count(); ++q) l1 += g.w[q] * std::abs(f[q]);
  if (!(l1 > 0.0)) throw std::invalid_argument("brezis_merle_check: source has zero mass");

  Field u = poisson_solve(g, f);
  double a = (4.0 * kPi - delta) / l1;
  BrezisMerleReport rep;
  rep.delta = delta;
  rep.f_l1 = l1;
  for (int q = 0; q < g.count(); ++q) rep.lhs += g.w[q] * std::exp(a * std::abs(u[q]));
  double diam = g.domain.diameter();
  rep.rhs = (4.0 * kPi * kPi / delta) * diam * diam;
  rep.holds = rep.lhs <= rep.rhs;
  return rep;
}

// Concentrating-profile extrapolation: families with ball mass
// m(r) = M k r^2 / (1 + k r^2) are determined by two radii. Degenerate pairs
// (mass scaling like the area, i.e. no concentration) fall back to the
// larger-ball value.
inline double limit_mass(double m1, double m2, double r1, double r2) {
  if (!(0.0 < r1 && r1 < r2)) throw std::invalid_argument("limit_mass: need 0 < r1 < r2");
  if (m1 < 0.0 || m2 < 0.0) throw std::invalid_argument("limit_mass: masses must be nonnegative");
  double den = m1 * r2 * r2 - m2 * r1 * r1;
  double scale = m1 * r2 * r2 + m2 * r1 * r1;
  if (den <= 1e-10 * scale) return m2;
  return m1 * m2 * (r2 * r2 - r1 * r1) / den;
}

struct PeakReport {
  Peak peak;
  double radius = 0.0;      // primary mass ball
  double alt_radius = 0.0;  // wider ball feeding the limit fit
  double m_plus = 0.0, m_minus = 0.0;
  double m_plus_alt = 0.0, m_minus_alt = 0.0;
  double m_plus_limit = 0.0, m_minus_limit = 0.0;
  double mass_relation_residual = 0.0;  // from the primary ball masses
  double location_residual = -1.0;      // filled by the point-vortex layer
  std::string region;                   // classification of the limit masses
};

struct BlowupReport {
  std::string variant;
  double lambda = 0.0;
  std::vector<PeakReport> peaks;
  double rv_sup_error = 0.0;
  double rv_exclusion_radius = 0.0;
  std::string rv_mass_mode;  // "limit" or "ball"
  double min_boundary_distance = std::numeric_limits<double>::infinity();
  std::vector<double> pohozaev_radii;
  std::vector<double> pohozaev;  // defects aligned with pohozaev_radii
  std::string pohozaev_form = "interior-ball";
  double denominator = 0.0;
  std::vector<double> atom_denominators;
};

struct BlowupOptions {
  double peak_threshold = 6.0;
  double peak_min_separation = 0.2;
  double ball_radius = 0.0;  // <= 0: 0.25 * min(peak separation, boundary distance)
  double alt_radius_factor = 1.4;
  double rv_radius = 0.3;
  bool rv_use_limit_mass = true;
  std::vector<double> pohozaev_radii = {0.3, 0.5};
};

namespace detail {

inline double auto_mass_radius(const Grid& g, const std::vector<Peak>& peaks) {
  double sep = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < peaks.size(); ++i)
    for (std::size_t j = i + 1; j < peaks.size(); ++j)
      sep = std::min(sep, g.distance(peaks[i].x, peaks[i].y, peaks[j].x, peaks[j].y));
  double bd = boundary_distance(g.domain, peaks);
  double r = 0.25 * std::min(sep, bd);
  if (g.periodic) {
    // Both limits can be infinite on the torus with a single peak.
    double cap = 0.2 * std::min(g.domain.lx, g.domain.ly);
    r = std::min(r, cap);
  }
  if (!std::isfinite(r) || r <= 0.0)
    throw std::invalid_argument("make_blowup_report: cannot choose a mass radius");
  return r;
}

}  // namespace detail

inline BlowupReport make_blowup_report(const Grid& g, const MeanFieldProblem& p, const Field& v,
                                       const GreensEvaluator& green, const BlowupOptions& opt) {
  validate_problem(g.domain, p);
  BlowupReport rep;
  rep.variant = variant_name(p.variant);
  rep.lambda = p.lambda;
  rep.rv_exclusion_radius = opt.rv_radius;
  rep.rv_mass_mode = opt.rv_use_limit_mass ? "limit" : "ball";

  Nonlinearity nl = nonlinearity(g, p, v);
  rep.denominator = nl.denominator;
  rep.atom_denominators = nl.atom_denominators;

  std::vector<Peak> peaks = detect_peaks(g, v, opt.peak_threshold, opt.peak_min_separation);
  rep.min_boundary_distance = boundary_distance(g.domain, peaks);
  if (peaks.empty()) return rep;

  double r = opt.ball_radius > 0.0 ? opt.ball_radius : detail::auto_mass_radius(g, peaks);
  double r_alt = opt.alt_radius_factor * r;

  SupportExtrema se = p.measure.support_extrema();
  BetaCoefficients beta = beta_pm(p.measure, se.alpha_plus > 0.0, se.alpha_minus < 0.0);

  std::vector<double> net(peaks.size(), 0.0);
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    PeakReport pr;
    pr.peak = peaks[i];
    pr.radius = r;
    pr.alt_radius = r_alt;
    LocalMasses m = local_masses(g, nl, peaks[i].x, peaks[i].y, r);
    LocalMasses ma = local_masses(g, nl, peaks[i].x, peaks[i].y, r_alt);
    pr.m_plus = m.m_plus;
    pr.m_minus = m.m_minus;
    pr.m_plus_alt = ma.m_plus;
    pr.m_minus_alt = ma.m_minus;
    pr.m_plus_limit = limit_mass(m.m_plus, ma.m_plus, r, r_alt);
    pr.m_minus_limit = limit_mass(m.m_minus, ma.m_minus, r, r_alt);
    pr.mass_relation_residual = mass_relation_residual({m.m_plus, m.m_minus}, beta);
    pr.region = mass_region_name(classify_mass_pair({pr.m_plus_limit, pr.m_minus_limit}, beta));
    net[i] = opt.rv_use_limit_mass ? pr.m_plus_limit - pr.m_minus_limit
                                   : pr.m_plus - pr.m_minus;
    rep.peaks.push_back(std::move(pr));
  }

  rep.rv_sup_error = residual_vanishing_error(g, v, peaks, net, green, opt.rv_radius);

  // Pohozaev balls are centered on the dominant peak; radii that do not fit
  // in the domain are skipped.
  for (double pr : opt.pohozaev_radii) {
    try {
      double defect = pohozaev_residual(g, p, v, peaks[0].x, peaks[0].y, pr);
      rep.pohozaev_radii.push_back(pr);
      rep.pohozaev.push_back(defect);
    } catch (const std::invalid_argument&) {
    }
  }
  return rep;
}

}  // namespace vmf
