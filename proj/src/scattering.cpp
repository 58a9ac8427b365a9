#include "nft/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "csv.hpp"
#include "nft/parallel.hpp"

namespace nft {

namespace {

constexpr cplx kJ{0.0, 1.0};
constexpr double kRenormAbove = 1e150;
constexpr double kRenormBelow = 1e-150;
constexpr double kSeriesBelow = 0.1;  // |k h| under which the series forms are used

// One integration step: the potential is modelled as q_mid exp(j phi (t - t_mid) / h)
// with the carrier turn phi read from adjacent samples. Steps that touch a zero
// sample or turn by a quarter cycle or more fall back to phi = 0 and the plain mean.
struct Step {
  cplx q;           // midpoint value
  double shift;     // phi / (2 h), added to lambda inside the step
  cplx half_turn;   // exp(j phi / 2)
};

std::vector<Step> step_potentials(const Signal& s) {
  auto q = s.samples();
  const double h = s.dt();
  std::vector<Step> out(q.size() > 1 ? q.size() - 1 : 0);
  for (std::size_t i = 0; i + 1 < q.size(); ++i) {
    const cplx turn = q[i + 1] * std::conj(q[i]);
    const double mag = std::abs(turn);
    if (mag > 0.0 && turn.real() > 0.0) {
      const cplx half = std::sqrt(turn / mag);
      out[i] = {0.5 * (q[i] * half + q[i + 1] * std::conj(half)), std::arg(turn) / (2.0 * h), half};
    } else {
      out[i] = {0.5 * (q[i] + q[i + 1]), 0.0, 1.0};
    }
  }
  return out;
}

// Coefficients of exp(h M) = c I + s M for M^2 = k^2 I, plus
// s2 = (h c - s) / k^2 which appears in d/dlambda.
struct StepCoefficients {
  cplx c, s, s2;
};

StepCoefficients step_coefficients(cplx k2, double h) {
  const cplx z = k2 * h * h;
  if (std::abs(z) < kSeriesBelow * kSeriesBelow) {
    // Even power series in k h; six terms reach round-off for |k h| < 0.1.
    cplx c{1.0}, s{1.0}, s2{1.0 / 3.0};
    cplx zp{1.0};
    double fact_even = 1.0;  // (2m)!
    for (int m = 1; m <= 6; ++m) {
      zp *= z;
      fact_even *= (2.0 * m - 1.0) * (2.0 * m);
      const double fact_odd = fact_even * (2.0 * m + 1.0);
      c += zp / fact_even;
      s += zp / fact_odd;
      // s2 coefficient of z^m is 2(m+1) / (2m+3)!
      const double f3 = fact_odd * (2.0 * m + 2.0) * (2.0 * m + 3.0);
      s2 += zp * (2.0 * (m + 1.0)) / f3;
    }
    return {c, s * h, s2 * h * h * h};
  }
  const cplx k = std::sqrt(k2);
  const cplx c = std::cosh(k * h);
  const cplx s = std::sinh(k * h) / k;
  return {c, s, (h * c - s) / k2};
}

struct PropagationResult {
  cplx phi1, phi2;    // state at t_end, up to exp(log_scale)
  cplx dphi1, dphi2;  // lambda-derivative of the same
  double log_scale = 0.0;
};

// Propagates psi' = [[-j lambda, q], [-conj q, j lambda]] psi from t_start to
// t_end with psi(t_start) = exp(-j lambda t_start) (1, 0). The exponential
// prefactor is left out here and restored by the caller.
//
// Within a step psi = diag(exp(j phi tau / 2h), exp(-j phi tau / 2h)) chi turns
// the carrier into a constant potential for chi at lambda + phi / 2h.
template <bool WithDerivative>
PropagationResult propagate(std::span<const Step> steps, double h, cplx lambda) {
  PropagationResult r{{1.0}, {0.0}, {0.0}, {0.0}, 0.0};
  for (std::size_t n = 0; n < steps.size(); ++n) {
    const cplx q = steps[n].q;
    const cplx qc = std::conj(q);
    const cplx lam = lambda + steps[n].shift;
    const cplx turn = steps[n].half_turn, unturn = std::conj(turn);
    const auto [c, s, s2] = step_coefficients(-lam * lam - std::norm(q), h);
    const cplx u11 = turn * (c - kJ * lam * s);
    const cplx u22 = unturn * (c + kJ * lam * s);
    const cplx u12 = s * q;
    const cplx u21 = -s * qc;
    const cplx p1 = u11 * r.phi1 + u12 * r.phi2;
    const cplx p2 = u21 * r.phi1 + u22 * r.phi2;
    if constexpr (WithDerivative) {
      const cplx dc = -h * s * lam;
      const cplx ds = -lam * s2;
      const cplx d11 = turn * (dc - kJ * lam * ds - kJ * s);
      const cplx d22 = unturn * (dc + kJ * lam * ds + kJ * s);
      const cplx d12 = ds * q;
      const cplx d21 = -ds * qc;
      const cplx dp1 = d11 * r.phi1 + d12 * r.phi2 + u11 * r.dphi1 + u12 * r.dphi2;
      const cplx dp2 = d21 * r.phi1 + d22 * r.phi2 + u21 * r.dphi1 + u22 * r.dphi2;
      r.dphi1 = dp1;
      r.dphi2 = dp2;
    }
    r.phi1 = p1;
    r.phi2 = p2;

    const double norm = std::max(std::abs(r.phi1), std::abs(r.phi2));
    if (!std::isfinite(norm)) throw Error("propagation failed at sample " + std::to_string(n + 1));
    if (norm > kRenormAbove || (norm < kRenormBelow && norm > 0.0)) {
      r.phi1 /= norm;
      r.phi2 /= norm;
      if constexpr (WithDerivative) {
        r.dphi1 /= norm;
        r.dphi2 /= norm;
      }
      r.log_scale += std::log(norm);
    }
  }
  return r;
}

JostPoint finish(const Signal& s, cplx lambda, const PropagationResult& r, bool with_derivative) {
  const double t0 = s.t_start();
  const double t1 = s.t_end();
  const double T = t1 - t0;
  JostPoint jp;
  jp.lambda = lambda;
  // a = phi1 exp(L + j lambda T), b = phi2 exp(L - j lambda (t1 + t0))
  const cplx log_a_factor = r.log_scale + kJ * lambda * T;
  const cplx log_b_factor = r.log_scale - kJ * lambda * (t1 + t0);
  jp.log_abs_a = (r.phi1 == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(std::abs(r.phi1))) +
                 log_a_factor.real();
  jp.a = r.phi1 * std::exp(log_a_factor);
  jp.b = r.phi2 * std::exp(log_b_factor);
  if (with_derivative) jp.a_prime = (r.dphi1 + kJ * T * r.phi1) * std::exp(log_a_factor);
  auto finite = [](cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); };
  jp.reliable = finite(jp.a) && (!jp.a_prime || finite(*jp.a_prime));
  return jp;
}

void require_upper_half_plane(cplx lambda) {
  if (!(lambda.imag() >= 0.0) || !std::isfinite(lambda.real()) || !std::isfinite(lambda.imag()))
    throw Error("scattering: lambda must be finite with Im(lambda) >= 0");
}

}  // namespace

void FrequencyGrid::validate() const {
  if (n_points < 2) throw Error("frequency grid: n_points must be >= 2");
  if (!std::isfinite(omega_min) || !std::isfinite(omega_max) || !(omega_min < omega_max))
    throw Error("frequency grid: need finite omega_min < omega_max");
}

std::vector<double> FrequencyGrid::omegas() const {
  std::vector<double> w(n_points);
  for (std::size_t i = 0; i < n_points; ++i) w[i] = omega(i);
  return w;
}

FrequencyGrid FrequencyGrid::default_for(const Signal& s, std::size_t n_points) {
  const double w = std::numbers::pi / (4.0 * s.dt());
  return {-w, w, n_points};
}

double ContinuousSpectrum::unitarity_defect() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(std::norm(a[i]) + std::norm(b[i]) - 1.0));
  return worst;
}

ContinuousSpectrum scatter_grid(const Signal& s, const FrequencyGrid& grid, unsigned threads) {
  grid.validate();
  const double h = s.dt();
  const auto qbar = step_potentials(s);
  ContinuousSpectrum cs{grid, std::vector<cplx>(grid.n_points), std::vector<cplx>(grid.n_points)};
  parallel_for(grid.n_points, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const cplx lambda{grid.omega(i), 0.0};
      const auto jp = finish(s, lambda, propagate<false>(qbar, h, lambda), false);
      cs.a[i] = jp.a;
      cs.b[i] = jp.b;
    }
  });
  return cs;
}

JostPoint scatter_at(const Signal& s, cplx lambda) {
  require_upper_half_plane(lambda);
  const auto qbar = step_potentials(s);
  return finish(s, lambda, propagate<false>(qbar, s.dt(), lambda), false);
}

JostPoint scatter_with_derivative(const Signal& s, cplx lambda) {
  require_upper_half_plane(lambda);
  const auto qbar = step_potentials(s);
  return finish(s, lambda, propagate<true>(qbar, s.dt(), lambda), true);
}

cplx a_derivative_at(const Signal& s, cplx lambda) { return *scatter_with_derivative(s, lambda).a_prime; }

void write_spectrum_csv(const ContinuousSpectrum& cs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write spectrum file " + path.string());
  out << "omega,re_a,im_a,re_b,im_b\n";
  for (std::size_t i = 0; i < cs.a.size(); ++i) {
    out << csv::num(cs.grid.omega(i)) << ',' << csv::num(cs.a[i].real()) << ',' << csv::num(cs.a[i].imag())
        << ',' << csv::num(cs.b[i].real()) << ',' << csv::num(cs.b[i].imag()) << '\n';
  }
}

ContinuousSpectrum read_spectrum_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path, {"omega", "re_a", "im_a", "re_b", "im_b"});
  if (table.size() < 2) throw Error("spectrum csv: need at least two rows in " + path.string());
  ContinuousSpectrum cs;
  cs.grid = {table.front()[0], table.back()[0], table.size()};
  cs.grid.validate();
  const double tol = 1e-9 * std::max(1.0, cs.grid.spacing());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& row = table[i];
    if (std::abs(row[0] - cs.grid.omega(i)) > tol + 1e-12 * std::abs(row[0]))
      throw Error("spectrum csv: omega column is not uniform at row " + std::to_string(i + 1));
    cs.a.emplace_back(row[1], row[2]);
    cs.b.emplace_back(row[3], row[4]);
  }
  return cs;
}

}  // namespace nft
