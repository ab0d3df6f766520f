#pragma once
// Uniform Cartesian grids on the three supported domains, a Shortley-Weller
// cut-cell Laplacian on the unit disk, quadrature weights forming a
// nearest-node partition of the domain, and Poisson solves.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace vmf {

using Field = std::vector<double>;

enum class DomainKind { Rectangle, UnitDisk, FlatTorus };

struct Domain {
  DomainKind kind = DomainKind::UnitDisk;
  double lx = 2.0;  // rectangle width / torus period; the disk spans [-1,1]^2
  double ly = 2.0;

  static Domain rectangle(double w, double h) {
    if (!(w > 0.0) || !(h > 0.0)) throw std::invalid_argument("rectangle: nonpositive dimensions");
    return {DomainKind::Rectangle, w, h};
  }
  static Domain unit_disk() { return {DomainKind::UnitDisk, 2.0, 2.0}; }
  static Domain flat_torus(double l1, double l2) {
    if (!(l1 > 0.0) || !(l2 > 0.0)) throw std::invalid_argument("torus: nonpositive periods");
    return {DomainKind::FlatTorus, l1, l2};
  }

  double area() const {
    const double pi = 3.14159265358979323846;
    return kind == DomainKind::UnitDisk ? pi : lx * ly;
  }
  double diameter() const {
    if (kind == DomainKind::UnitDisk) return 2.0;
    return std::sqrt(lx * lx + ly * ly);  // rectangle diagonal; torus: chart diameter
  }
};

// Distance from p to the boundary; +inf on the torus (no boundary).
inline double boundary_distance(const Domain& d, double px, double py) {
  switch (d.kind) {
    case DomainKind::UnitDisk:
      return 1.0 - std::sqrt(px * px + py * py);
    case DomainKind::Rectangle:
      return std::min(std::min(px, d.lx - px), std::min(py, d.ly - py));
    case DomainKind::FlatTorus:
    default:
      return std::numeric_limits<double>::infinity();
  }
}

struct Stencil {
  int nb[4];       // E, W, N, S node indices; -1 across a Dirichlet boundary
  double arm[4];   // arm lengths, h on uncut arms
};

struct Grid {
  Domain domain;
  int n = 0;
  double h = 0.0;
  int mx = 0, my = 0;          // lattice sites per axis (torus: cells per axis)
  double ox = 0.0, oy = 0.0;   // lattice origin
  bool periodic = false;
  std::vector<int> site;       // lattice site -> node index or -1
  std::vector<double> xs, ys;  // node coordinates
  std::vector<Stencil> st;
  std::vector<double> w;       // quadrature weights; sum approximates |Omega|

  int count() const { return static_cast<int>(xs.size()); }
  int site_index(int i, int j) const { return j * mx + i; }

  int node_of_site(int i, int j) const {
    if (periodic) {
      i = ((i % mx) + mx) % mx;
      j = ((j % my) + my) % my;
      return site[site_index(i, j)];
    }
    if (i < 0 || i >= mx || j < 0 || j >= my) return -1;
    return site[site_index(i, j)];
  }

  // Shortest displacement from a to b respecting periodicity.
  void delta(double ax, double ay, double bx, double by, double& dx, double& dy) const {
    dx = bx - ax;
    dy = by - ay;
    if (periodic) {
      dx -= domain.lx * std::round(dx / domain.lx);
      dy -= domain.ly * std::round(dy / domain.ly);
    }
  }
  double distance(double ax, double ay, double bx, double by) const {
    double dx, dy;
    delta(ax, ay, bx, by, dx, dy);
    return std::hypot(dx, dy);
  }

  int nearest_node(double px, double py) const {
    int best = -1;
    double bd = std::numeric_limits<double>::max();
    for (int k = 0; k < count(); ++k) {
      double d = distance(px, py, xs[k], ys[k]);
      if (d < bd) {
        bd = d;
        best = k;
      }
    }
    return best;
  }
};

namespace detail {

inline bool inside_disk(double x, double y) { return x * x + y * y < 1.0; }

// Crossing distance from (x,y) to the unit circle along (dx,dy), |(dx,dy)|=1.
inline double circle_crossing(double x, double y, double dx, double dy) {
  double b = x * dx + y * dy;
  double c = x * x + y * y - 1.0;
  double disc = b * b - c;
  if (disc < 0.0) disc = 0.0;
  return -b + std::sqrt(disc);
}

inline void build_disk(Grid& g) {
  const int m = g.n + 1;  // sites 0..n per axis
  g.mx = m;
  g.my = m;
  g.ox = -1.0;
  g.oy = -1.0;
  g.site.assign(m * m, -1);
  const double h = g.h;
  std::vector<char> interior(m * m, 0);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      double x = g.ox + i * h, y = g.oy + j * h;
      if (inside_disk(x, y)) interior[g.site_index(i, j)] = 1;
    }
  // Demote nodes whose cut arm would be shorter than 1e-3 h.
  const int di[4] = {1, -1, 0, 0};
  const int dj[4] = {0, 0, 1, -1};
  std::vector<char> keep = interior;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      if (!interior[g.site_index(i, j)]) continue;
      double x = g.ox + i * h, y = g.oy + j * h;
      for (int d = 0; d < 4; ++d) {
        int ii = i + di[d], jj = j + dj[d];
        bool nb_in = ii >= 0 && ii < m && jj >= 0 && jj < m && interior[g.site_index(ii, jj)];
        if (!nb_in) {
          double a = circle_crossing(x, y, di[d], dj[d]);
          if (a < 1e-3 * h) {
            keep[g.site_index(i, j)] = 0;
            break;
          }
        }
      }
    }
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i)
      if (keep[g.site_index(i, j)]) {
        g.site[g.site_index(i, j)] = static_cast<int>(g.xs.size());
        g.xs.push_back(g.ox + i * h);
        g.ys.push_back(g.oy + j * h);
      }
  g.st.resize(g.xs.size());
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      int p = g.site[g.site_index(i, j)];
      if (p < 0) continue;
      double x = g.xs[p], y = g.ys[p];
      for (int d = 0; d < 4; ++d) {
        int q = g.node_of_site(i + di[d], j + dj[d]);
        if (q >= 0) {
          g.st[p].nb[d] = q;
          g.st[p].arm[d] = h;
        } else {
          g.st[p].nb[d] = -1;
          // Crossing may exceed h slightly when the neighbor was demoted.
          double a = circle_crossing(x, y, di[d], dj[d]);
          g.st[p].arm[d] = std::max(a, 1e-3 * h);
        }
      }
    }

  // Quadrature: partition the disk by nearest node, subsampling cells that
  // straddle the circle or belong to non-node sites.
  g.w.assign(g.xs.size(), 0.0);
  const int S = 24;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      double cx = g.ox + i * h, cy = g.oy + j * h;
      double x0 = cx - 0.5 * h, x1 = cx + 0.5 * h;
      double y0 = cy - 0.5 * h, y1 = cy + 0.5 * h;
      double nearx = std::max(std::abs(cx) - 0.5 * h, 0.0);
      double neary = std::max(std::abs(cy) - 0.5 * h, 0.0);
      if (nearx * nearx + neary * neary >= 1.0) continue;  // cell outside disk
      double fx = std::max(std::abs(x0), std::abs(x1));
      double fy = std::max(std::abs(y0), std::abs(y1));
      int p = g.site[g.site_index(i, j)];
      if (p >= 0 && fx * fx + fy * fy <= 1.0) {
        g.w[p] += h * h;
        continue;
      }
      double sw = (h / S) * (h / S);
      for (int sj = 0; sj < S; ++sj)
        for (int si = 0; si < S; ++si) {
          double px = x0 + (si + 0.5) * h / S;
          double py = y0 + (sj + 0.5) * h / S;
          if (!inside_disk(px, py)) continue;
          int best = -1;
          double bd = std::numeric_limits<double>::max();
          for (int bj = -3; bj <= 3; ++bj)
            for (int bi = -3; bi <= 3; ++bi) {
              int q = g.node_of_site(i + bi, j + bj);
              if (q < 0) continue;
              double dx = px - g.xs[q], dy = py - g.ys[q];
              double dd = dx * dx + dy * dy;
              if (dd < bd) {
                bd = dd;
                best = q;
              }
            }
          if (best >= 0) g.w[best] += sw;
        }
    }
}

inline void build_rectangle(Grid& g) {
  const double w_ = g.domain.lx, h_ = g.domain.ly;
  const double h = g.h;
  int mx = static_cast<int>(std::lround(w_ / h));
  int my = static_cast<int>(std::lround(h_ / h));
  if (mx < 2 || my < 2) throw std::invalid_argument("build_grid: rectangle too coarse");
  g.mx = mx + 1;
  g.my = my + 1;
  g.ox = 0.0;
  g.oy = 0.0;
  g.site.assign(g.mx * g.my, -1);
  for (int j = 1; j < my; ++j)
    for (int i = 1; i < mx; ++i) {
      g.site[g.site_index(i, j)] = static_cast<int>(g.xs.size());
      g.xs.push_back(i * h);
      g.ys.push_back(j * h);
    }
  g.st.resize(g.xs.size());
  g.w.resize(g.xs.size());
  const int di[4] = {1, -1, 0, 0};
  const int dj[4] = {0, 0, 1, -1};
  for (int j = 1; j < my; ++j)
    for (int i = 1; i < mx; ++i) {
      int p = g.site[g.site_index(i, j)];
      for (int d = 0; d < 4; ++d) {
        g.st[p].nb[d] = g.node_of_site(i + di[d], j + dj[d]);
        g.st[p].arm[d] = h;
      }
      // Edge cells absorb the half-cell boundary strip so the weights tile
      // the full rectangle.
      double lx = h + (i == 1 ? 0.5 * h : 0.0) + (i == mx - 1 ? 0.5 * h : 0.0);
      double ly = h + (j == 1 ? 0.5 * h : 0.0) + (j == my - 1 ? 0.5 * h : 0.0);
      g.w[p] = lx * ly;
    }
}

inline void build_torus(Grid& g) {
  const double h = g.h;
  int mx = static_cast<int>(std::lround(g.domain.lx / h));
  int my = static_cast<int>(std::lround(g.domain.ly / h));
  if (std::abs(mx * h - g.domain.lx) > 1e-9 * g.domain.lx ||
      std::abs(my * h - g.domain.ly) > 1e-9 * g.domain.ly)
    throw std::invalid_argument("build_grid: torus periods must be commensurate with h");
  g.mx = mx;
  g.my = my;
  g.ox = 0.0;
  g.oy = 0.0;
  g.periodic = true;
  g.site.assign(mx * my, -1);
  for (int j = 0; j < my; ++j)
    for (int i = 0; i < mx; ++i) {
      g.site[g.site_index(i, j)] = static_cast<int>(g.xs.size());
      g.xs.push_back(i * h);
      g.ys.push_back(j * h);
    }
  g.st.resize(g.xs.size());
  g.w.assign(g.xs.size(), h * h);
  const int di[4] = {1, -1, 0, 0};
  const int dj[4] = {0, 0, 1, -1};
  for (int j = 0; j < my; ++j)
    for (int i = 0; i < mx; ++i) {
      int p = g.site[g.site_index(i, j)];
      for (int d = 0; d < 4; ++d) {
        g.st[p].nb[d] = g.node_of_site(i + di[d], j + dj[d]);
        g.st[p].arm[d] = h;
      }
    }
}

}  // namespace detail

inline Grid build_grid(const Domain& domain, int n) {
  if (n < 4) throw std::invalid_argument("build_grid: n must be at least 4");
  Grid g;
  g.domain = domain;
  g.n = n;
  g.h = std::max(domain.lx, domain.ly) / n;
  switch (domain.kind) {
    case DomainKind::UnitDisk:
      detail::build_disk(g);
      break;
    case DomainKind::Rectangle:
      detail::build_rectangle(g);
      break;
    case DomainKind::FlatTorus:
      detail::build_torus(g);
      break;
  }
  if (g.count() == 0) throw std::invalid_argument("build_grid: empty grid");
  return g;
}

// Discrete Laplacian; Dirichlet values are 0 across cut arms and domain edges.
inline Field laplacian_apply(const Grid& g, const Field& u) {
  if (static_cast<int>(u.size()) != g.count())
    throw std::invalid_argument("laplacian_apply: size mismatch");
  Field r(u.size());
  for (int p = 0; p < g.count(); ++p) {
    const Stencil& s = g.st[p];
    double ue = s.nb[0] >= 0 ? u[s.nb[0]] : 0.0;
    double uw = s.nb[1] >= 0 ? u[s.nb[1]] : 0.0;
    double un = s.nb[2] >= 0 ? u[s.nb[2]] : 0.0;
    double us = s.nb[3] >= 0 ? u[s.nb[3]] : 0.0;
    double ae = s.arm[0], aw = s.arm[1], an = s.arm[2], as = s.arm[3];
    r[p] = 2.0 * (ue / (ae * (ae + aw)) + uw / (aw * (ae + aw)) - u[p] / (ae * aw)) +
           2.0 * (un / (an * (an + as)) + us / (as * (an + as)) - u[p] / (an * as));
  }
  return r;
}

inline double integrate(const Grid& g, const Field& u) {
  if (static_cast<int>(u.size()) != g.count())
    throw std::invalid_argument("integrate: size mismatch");
  double s = 0.0;
  for (int p = 0; p < g.count(); ++p) s += g.w[p] * u[p];
  return s;
}

// Matrix of -Laplacian (plus optional diagonal term), for direct solves.
inline Eigen::SparseMatrix<double> neg_laplacian_matrix(const Grid& g,
                                                        const Field* diag_add = nullptr) {
  const int N = g.count();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(5 * N);
  for (int p = 0; p < N; ++p) {
    const Stencil& s = g.st[p];
    double ae = s.arm[0], aw = s.arm[1], an = s.arm[2], as = s.arm[3];
    double diag = 2.0 / (ae * aw) + 2.0 / (an * as);
    if (diag_add) diag += (*diag_add)[p];
    trip.emplace_back(p, p, diag);
    const double coef[4] = {2.0 / (ae * (ae + aw)), 2.0 / (aw * (ae + aw)),
                            2.0 / (an * (an + as)), 2.0 / (as * (an + as))};
    for (int d = 0; d < 4; ++d)
      if (s.nb[d] >= 0) trip.emplace_back(p, s.nb[d], -coef[d]);
  }
  Eigen::SparseMatrix<double> A(N, N);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

// Symmetrized cut-cell variant (A + A^T)/2, used by the symmetry checks.
inline Eigen::SparseMatrix<double> neg_laplacian_matrix_symmetrized(const Grid& g) {
  Eigen::SparseMatrix<double> A = neg_laplacian_matrix(g);
  Eigen::SparseMatrix<double> At = A.transpose();
  return 0.5 * (A + At);
}

namespace detail {

inline double weighted_mean(const Grid& g, const Field& u) {
  double s = 0.0, wsum = 0.0;
  for (int p = 0; p < g.count(); ++p) {
    s += g.w[p] * u[p];
    wsum += g.w[p];
  }
  return s / wsum;
}

// Conjugate gradients on -Laplacian; optional zero-mean projection keeps the
// iteration on the complement of the constant null space (torus).
inline Field cg_neg_laplacian(const Grid& g, const Field& b, bool project) {
  const int N = g.count();
  Field x(N, 0.0), r = b, p(N), Ap(N);
  if (project) {
    double m = weighted_mean(g, r);
    for (double& v : r) v -= m;
  }
  p = r;
  double rr = 0.0;
  for (int i = 0; i < N; ++i) rr += r[i] * r[i];
  double b2 = std::sqrt(rr);
  if (b2 == 0.0) return x;
  const double tol = 1e-10 * b2;
  const long maxit = 10L * N;
  for (long it = 0; it < maxit; ++it) {
    Field lp = laplacian_apply(g, p);
    for (int i = 0; i < N; ++i) Ap[i] = -lp[i];
    if (project) {
      double m = weighted_mean(g, Ap);
      for (double& v : Ap) v -= m;
    }
    double pAp = 0.0;
    for (int i = 0; i < N; ++i) pAp += p[i] * Ap[i];
    if (pAp <= 0.0) throw std::runtime_error("poisson_solve: CG broke down");
    double alpha = rr / pAp;
    for (int i = 0; i < N; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    double rr2 = 0.0;
    for (int i = 0; i < N; ++i) rr2 += r[i] * r[i];
    if (std::sqrt(rr2) <= tol) {
      if (project) {
        double m = weighted_mean(g, x);
        for (double& v : x) v -= m;
      }
      return x;
    }
    double beta = rr2 / rr;
    rr = rr2;
    for (int i = 0; i < N; ++i) p[i] = r[i] + beta * p[i];
  }
  throw std::runtime_error("poisson_solve: CG did not converge");
}

}  // namespace detail

// Solves -Laplacian u = f. Torus requires zero_mean and a compatible f.
inline Field poisson_solve(const Grid& g, const Field& f, bool zero_mean = false) {
  if (static_cast<int>(f.size()) != g.count())
    throw std::invalid_argument("poisson_solve: size mismatch");
  if (g.domain.kind == DomainKind::FlatTorus) {
    if (!zero_mean)
      throw std::invalid_argument("poisson_solve: torus requires zero_mean=true");
    double fmax = 0.0;
    for (double v : f) fmax = std::max(fmax, std::abs(v));
    double mean = integrate(g, f) / g.domain.area();
    if (std::abs(mean) > 1e-10 * std::max(1.0, fmax))
      throw std::invalid_argument("poisson_solve: torus right-hand side must have zero mean");
    Field b = f;
    for (double& v : b) v -= mean;
    return detail::cg_neg_laplacian(g, b, true);
  }
  if (g.domain.kind == DomainKind::Rectangle) return detail::cg_neg_laplacian(g, f, false);
  // Disk: cut cells make the operator non-symmetric; use a direct solve.
  Eigen::SparseMatrix<double> A = neg_laplacian_matrix(g);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw std::runtime_error("poisson_solve: factorization failed");
  Eigen::VectorXd bv = Eigen::Map<const Eigen::VectorXd>(f.data(), f.size());
  Eigen::VectorXd xv = lu.solve(bv);
  if (lu.info() != Eigen::Success) throw std::runtime_error("poisson_solve: solve failed");
  return Field(xv.data(), xv.data() + xv.size());
}

// Central-difference gradient at nodes; Dirichlet zeros across cut arms.
inline void node_gradient(const Grid& g, const Field& u, Field& gx, Field& gy) {
  gx.assign(u.size(), 0.0);
  gy.assign(u.size(), 0.0);
  for (int p = 0; p < g.count(); ++p) {
    const Stencil& s = g.st[p];
    double ue = s.nb[0] >= 0 ? u[s.nb[0]] : 0.0;
    double uw = s.nb[1] >= 0 ? u[s.nb[1]] : 0.0;
    double un = s.nb[2] >= 0 ? u[s.nb[2]] : 0.0;
    double us = s.nb[3] >= 0 ? u[s.nb[3]] : 0.0;
    gx[p] = (ue - uw) / (s.arm[0] + s.arm[1]);
    gy[p] = (un - us) / (s.arm[2] + s.arm[3]);
  }
}

// Bilinear interpolation; off-grid corners contribute the Dirichlet value 0.
inline double bilinear_value(const Grid& g, const Field& u, double px, double py) {
  double fx = (px - g.ox) / g.h, fy = (py - g.oy) / g.h;
  int i0 = static_cast<int>(std::floor(fx));
  int j0 = static_cast<int>(std::floor(fy));
  double tx = fx - i0, ty = fy - j0;
  auto val = [&](int i, int j) {
    int q = g.node_of_site(i, j);
    return q >= 0 ? u[q] : 0.0;
  };
  return (1 - tx) * (1 - ty) * val(i0, j0) + tx * (1 - ty) * val(i0 + 1, j0) +
         (1 - tx) * ty * val(i0, j0 + 1) + tx * ty * val(i0 + 1, j0 + 1);
}

// Quadrature weights restricted to the ball B_r(c); straddling cells are
// subsampled (and clipped to the disk on the cut-cell domain).
inline std::vector<double> ball_weights(const Grid& g, double cx, double cy, double r) {
  const int N = g.count();
  std::vector<double> wb(N, 0.0);
  const double cell_rad = 0.5 * g.h * std::sqrt(2.0) * 1.0000001;
  const int S = 16;
  for (int p = 0; p < N; ++p) {
    double d = g.distance(cx, cy, g.xs[p], g.ys[p]);
    if (d >= r + cell_rad) continue;
    if (d <= r - cell_rad) {
      wb[p] = g.w[p];
      continue;
    }
    double frac = 0.0;
    for (int sj = 0; sj < S; ++sj)
      for (int si = 0; si < S; ++si) {
        double px = g.xs[p] + (-0.5 + (si + 0.5) / S) * g.h;
        double py = g.ys[p] + (-0.5 + (sj + 0.5) / S) * g.h;
        if (g.domain.kind == DomainKind::UnitDisk && !detail::inside_disk(px, py)) continue;
        if (g.distance(cx, cy, px, py) <= r) frac += 1.0;
      }
    wb[p] = g.h * g.h * frac / (S * S);
  }
  return wb;
}

}  // namespace vmf
