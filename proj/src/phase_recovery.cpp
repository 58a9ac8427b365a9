#include "nft/phase_recovery.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "csv.hpp"
#include "fft.hpp"

namespace nft {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

ClampedLog magnitude_bounded_log(std::span<const cplx> b, double floor_eps) {
  ClampedLog out;
  out.values.resize(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double x = 1.0 - std::norm(b[i]);
    if (x < floor_eps) {
      out.values[i] = std::log(floor_eps);
      ++out.clamped;
    } else {
      out.values[i] = std::log(x);
    }
  }
  return out;
}

std::vector<double> hilbert(std::span<const double> x, const HilbertOptions& opts, HilbertDiagnostics* diag) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (diag) {
    diag->edge_ratio = peak > 0.0 ? std::max(std::abs(x.front()), std::abs(x.back())) / peak : 0.0;
    diag->edge_warning = diag->edge_ratio > opts.edge_tolerance;
  }
  if (peak == 0.0) return std::vector<double>(n, 0.0);

  const std::size_t len = n * std::max<std::size_t>(1, opts.pad_factor);
  std::vector<cplx> buf(len, 0.0);
  std::copy(x.begin(), x.end(), buf.begin());
  fft::forward(buf);
  const std::size_t half = len / 2;
  for (std::size_t k = 0; k < len; ++k) {
    if (k == 0 || (len % 2 == 0 && k == half)) {
      buf[k] = 0.0;
    } else if (k < (len + 1) / 2) {
      buf[k] *= cplx(0.0, -1.0);
    } else {
      buf[k] *= cplx(0.0, 1.0);
    }
  }
  fft::backward(buf);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real() / static_cast<double>(len);
  return out;
}

std::vector<double> hilbert(std::span<const double> omega, std::span<const double> x, const HilbertOptions& opts,
                            HilbertDiagnostics* diag) {
  if (omega.size() != x.size()) throw Error("hilbert: abscissa and value lengths differ");
  if (omega.size() >= 3) {
    const double step = (omega.back() - omega.front()) / static_cast<double>(omega.size() - 1);
    for (std::size_t i = 1; i < omega.size(); ++i) {
      if (std::abs((omega[i] - omega[i - 1]) - step) > 1e-6 * std::abs(step))
        throw Error("hilbert: non-uniform grid at index " + std::to_string(i));
    }
  }
  return hilbert(x, opts, diag);
}

std::vector<cplx> reconstruct_A(const ContinuousSpectrum& cs, const HilbertOptions& opts, std::size_t* clamped) {
  const auto log_mag = magnitude_bounded_log(cs.b);
  if (clamped) *clamped = log_mag.clamped;
  const auto phase = hilbert(log_mag.values, opts);
  std::vector<cplx> A(cs.b.size());
  for (std::size_t i = 0; i < A.size(); ++i) A[i] = std::polar(std::exp(0.5 * log_mag.values[i]), 0.5 * phase[i]);
  return A;
}

std::vector<double> unwrap_phase(std::span<const double> wrapped) {
  std::vector<double> out(wrapped.size());
  if (wrapped.empty()) return out;
  out[0] = std::remainder(wrapped[0], kTwoPi);
  if (out[0] <= -kPi) out[0] += kTwoPi;
  double offset = out[0] - wrapped[0];
  for (std::size_t i = 1; i < wrapped.size(); ++i) {
    const double jump = wrapped[i] - wrapped[i - 1];
    if (jump > kPi) {
      offset -= kTwoPi * std::round(jump / kTwoPi);
    } else if (jump < -kPi) {
      offset += kTwoPi * std::round(-jump / kTwoPi);
    }
    out[i] = wrapped[i] + offset;
  }
  return out;
}

PhaseProfile allpass_phase(const ContinuousSpectrum& cs, const HilbertOptions& opts) {
  PhaseProfile p;
  p.grid = cs.grid;
  const auto A = reconstruct_A(cs, opts, &p.clamped);
  const std::size_t n = cs.a.size();
  std::vector<double> wrapped(n);
  p.g_magnitude.resize(n);
  p.unreliable.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const cplx g = cs.a[i] / A[i];
    p.unreliable[i] = std::abs(A[i]) < kUnreliableA;
    wrapped[i] = std::arg(g);
    p.g_magnitude[i] = std::abs(g);
  }
  p.theta = unwrap_phase(wrapped);
  return p;
}

EigenvalueCount count_eigenvalues(const PhaseProfile& p) {
  EigenvalueCount c;
  const std::size_t n = p.theta.size();
  if (n < 3) {
    c.low_confidence = true;
    return c;
  }
  c.unrounded = (p.theta.back() - p.theta.front()) / kTwoPi;
  c.n = static_cast<int>(std::lround(c.unrounded));
  const double dw = p.grid.spacing();
  double max_slope = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i)
    max_slope = std::max(max_slope, std::abs(p.theta[i + 1] - p.theta[i - 1]) / (2.0 * dw));
  const double left = std::abs(p.theta[1] - p.theta[0]) / dw;
  const double right = std::abs(p.theta[n - 1] - p.theta[n - 2]) / dw;
  c.low_confidence = max_slope > 0.0 && (left >= 0.01 * max_slope || right >= 0.01 * max_slope);
  return c;
}

void write_phase_csv(const PhaseProfile& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write phase file " + path.string());
  out << "omega,theta,g_magnitude\n";
  for (std::size_t i = 0; i < p.theta.size(); ++i)
    out << csv::num(p.grid.omega(i)) << ',' << csv::num(p.theta[i]) << ',' << csv::num(p.g_magnitude[i]) << '\n';
}

}  // namespace nft
