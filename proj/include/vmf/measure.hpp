#pragma once
// Intensity measures on [-1,1]: atomic lists and quadrature-discretized
// densities, with the exponential moments used by the mean-field solver.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vmf {

struct Atom {
  double alpha;
  double weight;
};

struct ExpMoments {
  double m0;  // sum w e^{alpha t}
  double m1;  // sum w alpha e^{alpha t}
  double m2;  // sum w alpha^2 e^{alpha t}
};

struct SupportExtrema {
  double alpha_minus;
  double alpha_plus;
};

struct BetaCoefficients {
  double beta_plus;
  double beta_minus;
};

// Gauss-Legendre nodes/weights on [-1,1]; Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1 || n > 512) throw std::invalid_argument("gauss_legendre: order out of range");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      // recurrence: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}
      double p0 = 1.0, p1 = x;
      for (int k = 1; k < n; ++k) {
        double p2 = ((2 * k + 1) * x * p1 - k * p0) / (k + 1);
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

class IntensityMeasure {
 public:
  // Atoms sorted strictly ascending in alpha, duplicates merged exactly,
  // weights positive and normalized to sum 1.
  static IntensityMeasure atomic(std::vector<Atom> atoms) {
    if (atoms.empty()) throw std::invalid_argument("measure: no atoms");
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.alpha < b.alpha; });
    std::vector<Atom> merged;
    for (const Atom& a : atoms) {
      if (!(a.weight > 0.0)) throw std::invalid_argument("measure: nonpositive weight");
      if (std::abs(a.alpha) > 1.0) throw std::invalid_argument("measure: alpha outside [-1,1]");
      if (!merged.empty() && merged.back().alpha == a.alpha)
        merged.back().weight += a.weight;
      else
        merged.push_back(a);
    }
    double sum = 0.0;
    for (const Atom& a : merged) sum += a.weight;
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("measure: weights sum to " + std::to_string(sum) + ", expected 1");
    for (Atom& a : merged) a.weight /= sum;
    IntensityMeasure m;
    m.atoms_ = std::move(merged);
    return m;
  }

  // Density rho on [a,b] within [-1,1], discretized by Gauss-Legendre and
  // normalized to unit mass. Supported names: "uniform", "parabola" (1-a^2).
  static IntensityMeasure density(const std::string& name, double a, double b, int n_nodes) {
    if (!(a < b) || a < -1.0 || b > 1.0)
      throw std::invalid_argument("measure: density support must satisfy -1 <= a < b <= 1");
    double (*rho)(double) = nullptr;
    if (name == "uniform")
      rho = [](double) { return 1.0; };
    else if (name == "parabola")
      rho = [](double x) { return 1.0 - x * x; };
    else
      throw std::invalid_argument("measure: unknown density '" + name + "'");
    std::vector<double> gx, gw;
    gauss_legendre(n_nodes, gx, gw);
    std::vector<Atom> atoms(n_nodes);
    double mass = 0.0;
    for (int i = 0; i < n_nodes; ++i) {
      double alpha = 0.5 * (a + b) + 0.5 * (b - a) * gx[i];
      double w = 0.5 * (b - a) * gw[i] * rho(alpha);
      atoms[i] = {alpha, w};
      mass += w;
    }
    if (!(mass > 0.0)) throw std::invalid_argument("measure: density has zero mass");
    for (Atom& at : atoms) at.weight /= mass;
    IntensityMeasure m;
    m.atoms_ = std::move(atoms);
    return m;
  }

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }

  SupportExtrema support_extrema() const {
    return {atoms_.front().alpha, atoms_.back().alpha};
  }

  // m_k(t) = int alpha^k e^{alpha t} P(dalpha). Hard error on overflow; the
  // solver never clamps exponentials.
  ExpMoments exp_moments(double t) const {
    if (!(std::abs(t) <= 750.0))
      throw std::domain_error("exp_moments: |t| beyond overflow guard (750)");
    ExpMoments m{0.0, 0.0, 0.0};
    for (const Atom& a : atoms_) {
      double e = a.weight * std::exp(a.alpha * t);
      m.m0 += e;
      m.m1 += a.alpha * e;
      m.m2 += a.alpha * a.alpha * e;
    }
    if (!std::isfinite(m.m0) || !std::isfinite(m.m1) || !std::isfinite(m.m2))
      throw std::overflow_error("exp_moments: exponential overflow at t=" + std::to_string(t));
    return m;
  }

 private:
  std::vector<Atom> atoms_;
};

// beta_pm = 1/|alpha_pm*| on the sides flagged as blowing up, 0 elsewhere.
inline BetaCoefficients beta_pm(const IntensityMeasure& P, bool blows_up_plus, bool blows_up_minus) {
  SupportExtrema s = P.support_extrema();
  BetaCoefficients b{0.0, 0.0};
  if (blows_up_plus) {
    if (!(s.alpha_plus > 0.0))
      throw std::domain_error("beta_pm: positive-side blow-up requested but alpha_plus* <= 0");
    b.beta_plus = 1.0 / s.alpha_plus;
  }
  if (blows_up_minus) {
    if (!(s.alpha_minus < 0.0))
      throw std::domain_error("beta_pm: negative-side blow-up requested but alpha_minus* >= 0");
    b.beta_minus = 1.0 / std::abs(s.alpha_minus);
  }
  return b;
}

inline IntensityMeasure liouville_measure() { return IntensityMeasure::atomic({{1.0, 1.0}}); }

inline IntensityMeasure sinh_measure() {
  return IntensityMeasure::atomic({{1.0, 0.5}, {-1.0, 0.5}});
}

}  // namespace vmf
