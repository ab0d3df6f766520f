#pragma once
// Damped Newton solver for the mean-field equations. The nonlocal denominator
// makes the Jacobian a sparse operator plus a low-rank correction; steps are
// computed by Sherman-Morrison-Woodbury around one sparse factorization.

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "vmf/domain.hpp"
#include "vmf/measure.hpp"

namespace vmf {

enum class Variant { Neri, SS, TorusNeri };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Neri:
      return "neri";
    case Variant::SS:
      return "ss";
    case Variant::TorusNeri:
    default:
      return "torus-neri";
  }
}

struct MeanFieldProblem {
  Variant variant = Variant::Neri;
  IntensityMeasure measure = liouville_measure();
  double lambda = 0.0;
};

inline void validate_problem(const Domain& d, const MeanFieldProblem& p) {
  if (!(p.lambda >= 0.0)) throw std::invalid_argument("problem: lambda must be >= 0");
  bool torus = d.kind == DomainKind::FlatTorus;
  if (p.variant == Variant::TorusNeri && !torus)
    throw std::invalid_argument("problem: torus-neri requires a FlatTorus domain");
  if (p.variant != Variant::TorusNeri && torus)
    throw std::invalid_argument("problem: neri/ss require a Dirichlet domain");
}

// Right-hand side of -Lap v = rhs together with the signed density split and
// the normalizing denominators the diagnostics need.
struct Nonlinearity {
  Field rhs;
  Field plus, minus;  // |alpha|-weighted densities over I+ and I-, both >= 0
  double denominator = 0.0;                // int m0 (neri, torus-neri)
  std::vector<double> atom_denominators;   // int e^{alpha_i v} (ss)
  double mean_m1 = 0.0;                    // (1/|Omega|) int m1 (torus-neri)
};

namespace detail {

inline void check_amplitude(const Field& v) {
  for (double t : v)
    if (!(std::abs(t) <= 750.0))
      throw std::domain_error("solver: |v| beyond the exponential overflow guard (750)");
}

inline void check_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw std::overflow_error(std::string("solver: overflow in ") + what);
}

}  // namespace detail

inline Nonlinearity nonlinearity(const Grid& g, const MeanFieldProblem& p, const Field& v) {
  if (static_cast<int>(v.size()) != g.count())
    throw std::invalid_argument("nonlinearity: field size mismatch");
  detail::check_amplitude(v);
  const int N = g.count();
  const auto& atoms = p.measure.atoms();
  Nonlinearity nl;
  nl.rhs.assign(N, 0.0);
  nl.plus.assign(N, 0.0);
  nl.minus.assign(N, 0.0);

  if (p.variant == Variant::SS) {
    nl.atom_denominators.resize(atoms.size());
    std::vector<double> e(N);
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const Atom& a = atoms[i];
      double Di = 0.0;
      for (int q = 0; q < N; ++q) {
        e[q] = std::exp(a.alpha * v[q]);
        Di += g.w[q] * e[q];
      }
      detail::check_finite(Di, "per-atom denominator");
      if (!(Di > 0.0)) throw std::overflow_error("solver: vanishing per-atom denominator");
      nl.atom_denominators[i] = Di;
      double c = p.lambda * a.weight * a.alpha / Di;
      for (int q = 0; q < N; ++q) {
        double val = c * e[q];
        nl.rhs[q] += val;
        if (a.alpha > 0.0)
          nl.plus[q] += val;
        else if (a.alpha < 0.0)
          nl.minus[q] -= val;
      }
    }
    return nl;
  }

  Field m1(N);
  double D = 0.0;
  for (int q = 0; q < N; ++q) {
    ExpMoments m = p.measure.exp_moments(v[q]);
    m1[q] = m.m1;
    D += g.w[q] * m.m0;
    for (const Atom& a : atoms) {
      double dv = a.weight * a.alpha * std::exp(a.alpha * v[q]);
      if (a.alpha > 0.0)
        nl.plus[q] += dv;
      else if (a.alpha < 0.0)
        nl.minus[q] -= dv;
    }
  }
  detail::check_finite(D, "denominator");
  if (!(D > 0.0)) throw std::overflow_error("solver: vanishing denominator");
  nl.denominator = D;
  double shift = 0.0;
  if (p.variant == Variant::TorusNeri) {
    nl.mean_m1 = integrate(g, m1) / g.domain.area();
    shift = p.lambda * nl.mean_m1 / D;
  }
  for (int q = 0; q < N; ++q) {
    nl.plus[q] *= p.lambda / D;
    nl.minus[q] *= p.lambda / D;
    nl.rhs[q] = p.lambda * m1[q] / D - shift;
  }
  return nl;
}

inline Field residual(const Grid& g, const MeanFieldProblem& p, const Field& v) {
  validate_problem(g.domain, p);
  Nonlinearity nl = nonlinearity(g, p, v);
  Field lap = laplacian_apply(g, v);
  Field F(v.size());
  for (std::size_t q = 0; q < v.size(); ++q) F[q] = -lap[q] - nl.rhs[q];
  return F;
}

// J = sparse + sum_k U_k V_k^T.
struct JacobianParts {
  Eigen::SparseMatrix<double> sparse;
  std::vector<Field> U, V;
};

inline JacobianParts assemble_jacobian(const Grid& g, const MeanFieldProblem& p, const Field& v) {
  detail::check_amplitude(v);
  const int N = g.count();
  const auto& atoms = p.measure.atoms();
  JacobianParts J;
  Field diag(N, 0.0);

  if (p.variant == Variant::SS) {
    std::vector<double> e(N);
    for (const Atom& a : atoms) {
      if (a.alpha == 0.0) continue;
      double Di = 0.0;
      for (int q = 0; q < N; ++q) {
        e[q] = std::exp(a.alpha * v[q]);
        Di += g.w[q] * e[q];
      }
      detail::check_finite(Di, "per-atom denominator");
      double aa = a.alpha * a.alpha;
      Field u(N), vv(N);
      for (int q = 0; q < N; ++q) {
        diag[q] -= p.lambda * a.weight * aa * e[q] / Di;
        u[q] = (p.lambda * a.weight * aa / (Di * Di)) * e[q];
        vv[q] = g.w[q] * e[q];
      }
      J.U.push_back(std::move(u));
      J.V.push_back(std::move(vv));
    }
    J.sparse = neg_laplacian_matrix(g, &diag);
    return J;
  }

  Field m1(N), m2(N);
  double D = 0.0;
  for (int q = 0; q < N; ++q) {
    ExpMoments m = p.measure.exp_moments(v[q]);
    m1[q] = m.m1;
    m2[q] = m.m2;
    D += g.w[q] * m.m0;
  }
  detail::check_finite(D, "denominator");
  for (int q = 0; q < N; ++q) diag[q] = -p.lambda * m2[q] / D;
  J.sparse = neg_laplacian_matrix(g, &diag);

  Field u1(N), v1(N);
  double mbar = p.variant == Variant::TorusNeri ? integrate(g, m1) / g.domain.area() : 0.0;
  for (int q = 0; q < N; ++q) {
    u1[q] = (p.lambda / (D * D)) * (m1[q] - mbar);
    v1[q] = g.w[q] * m1[q];
  }
  J.U.push_back(std::move(u1));
  J.V.push_back(std::move(v1));

  if (p.variant == Variant::TorusNeri) {
    Field u2(N), v2(N);
    for (int q = 0; q < N; ++q) {
      u2[q] = p.lambda / (D * g.domain.area());
      v2[q] = g.w[q] * m2[q];
    }
    J.U.push_back(std::move(u2));
    J.V.push_back(std::move(v2));
  }
  return J;
}

// The torus Jacobian annihilates the quadrature weights on the left and the
// constants on the right; shifting by the weight dyad makes it invertible and
// keeps Newton steps exactly zero-mean (the shift acts only off-manifold).
inline void add_zero_mean_shift(const Grid& g, JacobianParts& J) {
  const int N = g.count();
  double sigma = 0.0;
  for (int q = 0; q < N; ++q) sigma += g.w[q] * g.w[q];
  Field u(N), v(N);
  for (int q = 0; q < N; ++q) {
    u[q] = g.w[q] / sigma;
    v[q] = g.w[q];
  }
  J.U.push_back(std::move(u));
  J.V.push_back(std::move(v));
}

inline Field jacobian_apply(const JacobianParts& J, const Field& w) {
  const int N = static_cast<int>(w.size());
  Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(w.data(), N);
  Eigen::VectorXd out = J.sparse * wv;
  for (std::size_t k = 0; k < J.U.size(); ++k) {
    double dot = 0.0;
    for (int q = 0; q < N; ++q) dot += J.V[k][q] * w[q];
    for (int q = 0; q < N; ++q) out[q] += J.U[k][q] * dot;
  }
  return Field(out.data(), out.data() + N);
}

struct NewtonIterRecord {
  double residual_norm = 0.0;
  double step_norm = 0.0;
  double damping = 1.0;
  double mean_abs = 0.0;  // |weighted mean of v|, torus invariant
};

struct NewtonOptions {
  double tol = 1e-9;
  int max_iter = 50;
};

struct NewtonResult {
  Field v;
  bool converged = false;
  int iterations = 0;
  double residual_norm = std::numeric_limits<double>::infinity();
  double denominator = 0.0;
  std::vector<double> atom_denominators;
  double mean_m1 = 0.0;
  std::vector<NewtonIterRecord> trace;
  std::string message;
};

namespace detail {

inline double sup_norm(const Field& f) {
  double m = 0.0;
  for (double x : f) m = std::max(m, std::abs(x));
  return m;
}

inline void project_zero_mean(const Grid& g, Field& v) {
  double m = weighted_mean(g, v);
  for (double& x : v) x -= m;
}

// Solve (sparse + U V^T) delta = b through the factorized sparse part.
// Returns false when the capacitance matrix is singular (fold signal).
inline bool woodbury_solve(const Eigen::SparseLU<Eigen::SparseMatrix<double>>& lu,
                           const JacobianParts& J, const Eigen::VectorXd& b,
                           Eigen::VectorXd& delta) {
  const int N = static_cast<int>(b.size());
  const int k = static_cast<int>(J.U.size());
  Eigen::VectorXd y0 = lu.solve(b);
  if (k == 0) {
    delta = y0;
    return true;
  }
  Eigen::MatrixXd Um(N, k);
  for (int c = 0; c < k; ++c) Um.col(c) = Eigen::Map<const Eigen::VectorXd>(J.U[c].data(), N);
  Eigen::MatrixXd X = lu.solve(Um);
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(k, k);
  Eigen::VectorXd rhs_small(k);
  for (int r = 0; r < k; ++r) {
    Eigen::Map<const Eigen::VectorXd> vr(J.V[r].data(), N);
    for (int c = 0; c < k; ++c) C(r, c) += vr.dot(X.col(c));
    rhs_small[r] = vr.dot(y0);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> clu(C);
  if (!clu.isInvertible()) return false;
  delta = y0 - X * clu.solve(rhs_small);
  return true;
}

}  // namespace detail

inline NewtonResult solve_newton(const Grid& g, const MeanFieldProblem& p, Field v0,
                                 NewtonOptions opt = {}) {
  validate_problem(g.domain, p);
  if (!(opt.tol > 0.0)) throw std::invalid_argument("solve_newton: tol must be positive");
  if (static_cast<int>(v0.size()) != g.count())
    throw std::invalid_argument("solve_newton: seed size mismatch");
  const bool torus = p.variant == Variant::TorusNeri;
  NewtonResult res;

  if (p.lambda == 0.0) {
    // -Lap v = 0 with Dirichlet or zero-mean closure: v = 0 exactly.
    res.v.assign(g.count(), 0.0);
    Nonlinearity nl = nonlinearity(g, p, res.v);
    res.converged = true;
    res.residual_norm = 0.0;
    res.denominator = nl.denominator;
    res.atom_denominators = nl.atom_denominators;
    res.message = "lambda = 0: trivial solution";
    return res;
  }

  Field v = std::move(v0);
  if (torus) detail::project_zero_mean(g, v);
  Nonlinearity nl = nonlinearity(g, p, v);
  Field lap = laplacian_apply(g, v);
  Field F(v.size());
  for (int q = 0; q < g.count(); ++q) F[q] = -lap[q] - nl.rhs[q];
  double fnorm = detail::sup_norm(F);
  res.trace.push_back({fnorm, 0.0, 1.0, std::abs(detail::weighted_mean(g, v))});

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool analyzed = false;
  const int N = g.count();

  for (int iter = 0; iter < opt.max_iter && fnorm > opt.tol; ++iter) {
    JacobianParts J = assemble_jacobian(g, p, v);
    if (torus) add_zero_mean_shift(g, J);
    if (!analyzed) {
      lu.analyzePattern(J.sparse);
      analyzed = true;
    }
    lu.factorize(J.sparse);
    if (lu.info() != Eigen::Success) {
      res.message = "sparse factorization failed (fold suspected)";
      break;
    }
    Eigen::VectorXd b(N);
    for (int q = 0; q < N; ++q) b[q] = -F[q];
    Eigen::VectorXd delta;
    if (!detail::woodbury_solve(lu, J, b, delta)) {
      res.message = "singular Woodbury capacitance (fold suspected)";
      break;
    }

    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= 30; ++halving) {
      Field vt(N);
      for (int q = 0; q < N; ++q) vt[q] = v[q] + t * delta[q];
      if (torus) detail::project_zero_mean(g, vt);
      double ft;
      Nonlinearity nlt;
      try {
        nlt = nonlinearity(g, p, vt);
        Field lapt = laplacian_apply(g, vt);
        Field Ft(N);
        for (int q = 0; q < N; ++q) Ft[q] = -lapt[q] - nlt.rhs[q];
        ft = detail::sup_norm(Ft);
        if (std::isfinite(ft) && ft < fnorm) {
          v = std::move(vt);
          nl = std::move(nlt);
          F = std::move(Ft);
          fnorm = ft;
          accepted = true;
        }
      } catch (const std::domain_error&) {
      } catch (const std::overflow_error&) {
      }
      if (accepted) {
        double step = 0.0;
        for (int q = 0; q < N; ++q) step = std::max(step, std::abs(t * delta[q]));
        res.trace.push_back({fnorm, step, t, std::abs(detail::weighted_mean(g, v))});
        break;
      }
      t *= 0.5;
    }
    res.iterations = iter + 1;
    if (!accepted) {
      res.message = "line search stalled after 30 halvings";
      break;
    }
  }

  res.v = std::move(v);
  res.residual_norm = fnorm;
  res.converged = fnorm <= opt.tol;
  res.denominator = nl.denominator;
  res.atom_denominators = nl.atom_denominators;
  res.mean_m1 = nl.mean_m1;
  if (res.converged)
    res.message = "converged";
  else if (res.message.empty())
    res.message = "maximum Newton iterations exceeded";
  return res;
}

struct BumpSeed {
  double x = 0.0, y = 0.0;
  double amplitude = 0.0;
  double width = 0.2;
};

inline Field bump_field(const Grid& g, const BumpSeed& b) {
  if (!(b.width > 0.0)) throw std::invalid_argument("seed: bump width must be positive");
  Field f(g.count());
  for (int q = 0; q < g.count(); ++q) {
    double d = g.distance(b.x, b.y, g.xs[q], g.ys[q]);
    f[q] = b.amplitude * std::exp(-(d * d) / (b.width * b.width));
  }
  return f;
}

enum class SeedPolicy { Zero, Previous, PreviousPlusBump };

struct ContinuationOptions {
  SeedPolicy policy = SeedPolicy::Previous;
  BumpSeed bump;
  NewtonOptions newton;
};

struct ContinuationStep {
  double lambda = 0.0;
  NewtonResult result;
};

struct ContinuationResult {
  std::vector<ContinuationStep> steps;
  bool completed = false;
  std::string message;
};

inline ContinuationResult continuation(const Grid& g, MeanFieldProblem base,
                                       const std::vector<double>& lambdas,
                                       const ContinuationOptions& opt = {}) {
  if (lambdas.empty()) throw std::invalid_argument("continuation: empty lambda list");
  for (std::size_t i = 1; i < lambdas.size(); ++i)
    if (!(lambdas[i] > lambdas[i - 1]))
      throw std::invalid_argument("continuation: lambdas must be strictly increasing");
  validate_problem(g.domain, base);

  ContinuationResult out;
  Field prev(g.count(), 0.0);
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    base.lambda = lambdas[i];
    Field seed;
    switch (opt.policy) {
      case SeedPolicy::Zero:
        seed.assign(g.count(), 0.0);
        break;
      case SeedPolicy::Previous:
        seed = prev;
        break;
      case SeedPolicy::PreviousPlusBump:
      default: {
        seed = prev;
        Field b = bump_field(g, opt.bump);
        for (int q = 0; q < g.count(); ++q) seed[q] += b[q];
        break;
      }
    }
    NewtonResult nr = solve_newton(g, base, std::move(seed), opt.newton);
    bool ok = nr.converged;
    std::string msg = nr.message;
    out.steps.push_back({lambdas[i], std::move(nr)});
    if (!ok) {
      if (i == 0) {
        out.steps.clear();
        throw std::runtime_error("continuation: first solve failed: " + msg);
      }
      out.message = "stopped at lambda = " + std::to_string(lambdas[i]) +
                    " (fold candidate): " + msg;
      return out;
    }
    prev = out.steps.back().result.v;
  }
  out.completed = true;
  out.message = "completed";
  return out;
}

}  // namespace vmf
