#include "nft/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "fft.hpp"
#include "nft/parallel.hpp"

namespace nft {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kClampIm = 1e-6;

// Merges roots closer than `radius`, keeping the one with the smaller residual.
std::vector<DetectedEigenvalue> dedupe(std::vector<DetectedEigenvalue> roots, double radius) {
  std::sort(roots.begin(), roots.end(), [](const auto& a, const auto& b) { return a.residual < b.residual; });
  std::vector<DetectedEigenvalue> out;
  for (const auto& r : roots) {
    const bool dup = std::any_of(out.begin(), out.end(), [&](const auto& o) {
      return std::abs(o.value.lambda() - r.value.lambda()) <= radius;
    });
    if (!dup) out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.value.sigma != b.value.sigma ? a.value.sigma > b.value.sigma : a.value.omega0 < b.value.omega0;
  });
  return out;
}

enum class NewtonOutcome { converged, abandoned };

struct NewtonRun {
  NewtonOutcome outcome;
  cplx root;
  double residual;
};

NewtonRun newton_from(const Signal& s, cplx seed, const NewtonConfig& cfg, double escape_radius) {
  cplx lam = seed;
  int clamps = 0;
  for (int it = 0; it < cfg.max_newton_iters; ++it) {
    const auto jp = scatter_with_derivative(s, lam);
    if (!jp.reliable) return {NewtonOutcome::abandoned, lam, 0.0};
    const double res = std::abs(jp.a);
    if (res <= cfg.tol_a) return {NewtonOutcome::converged, lam, res};
    const cplx da = *jp.a_prime;
    if (da == 0.0) return {NewtonOutcome::abandoned, lam, res};
    cplx next = lam - jp.a / da;
    if (!std::isfinite(next.real()) || !std::isfinite(next.imag())) return {NewtonOutcome::abandoned, lam, res};
    if (next.imag() < kClampIm) {
      next.imag(kClampIm);
      if (++clamps >= 3) return {NewtonOutcome::abandoned, next, res};
    } else {
      clamps = 0;
    }
    if (std::abs(next - seed) > escape_radius) return {NewtonOutcome::abandoned, next, res};
    lam = next;
  }
  const double res = std::abs(scatter_at(s, lam).a);
  return {res <= cfg.tol_a ? NewtonOutcome::converged : NewtonOutcome::abandoned, lam, res};
}

// A few Newton steps on a finer signal, starting from a converged root.
NewtonRun polish(const Signal& fine, cplx root, const NewtonConfig& cfg) {
  cplx lam = root;
  double res = 0.0;
  for (int it = 0; it < cfg.max_newton_iters; ++it) {
    const auto jp = scatter_with_derivative(fine, lam);
    res = std::abs(jp.a);
    if (!jp.reliable || *jp.a_prime == 0.0) break;
    const cplx step = jp.a / *jp.a_prime;
    if (res <= cfg.tol_a || std::abs(step) < 1e-15 * std::max(1.0, std::abs(lam))) break;
    lam -= step;
    if (lam.imag() < kClampIm) return {NewtonOutcome::abandoned, lam, res};
  }
  res = std::abs(scatter_at(fine, lam).a);
  return {NewtonOutcome::converged, lam, res};
}

}  // namespace

void CollocationConfig::validate() const {
  if (n_modes < 8) throw Error("collocation config: n_modes must be >= 8");
  if (!(residual_cutoff > 0.0)) throw Error("collocation config: residual_cutoff must be > 0");
  if (!(halfplane_margin >= 0.0)) throw Error("collocation config: halfplane_margin must be >= 0");
}

CollocationResult fourier_collocation(const Signal& s, const CollocationConfig& cfg) {
  cfg.validate();
  CollocationResult out;
  if (s.peak() == 0.0) return out;

  const std::size_t n = s.size();
  std::vector<cplx> coeff(s.samples().begin(), s.samples().end());
  fft::forward(coeff);
  for (auto& c : coeff) c /= static_cast<double>(n);
  const auto qhat = [&](long p) -> cplx {
    if (2 * std::abs(p) >= static_cast<long>(n)) return 0.0;
    return coeff[static_cast<std::size_t>(p < 0 ? p + static_cast<long>(n) : p)];
  };

  const long m = cfg.n_modes;
  const long k = 2 * m + 1;
  const double period = s.duration();
  Eigen::MatrixXcd op = Eigen::MatrixXcd::Zero(2 * k, 2 * k);
  const cplx j{0.0, 1.0};
  for (long r = 0; r < k; ++r) {
    const double wave = kTwoPi * static_cast<double>(r - m) / period;
    op(r, r) = -wave;
    op(k + r, k + r) = wave;
    for (long c = 0; c < k; ++c) {
      const cplx t = qhat(r - c);
      op(r, k + c) = -j * t;
      op(k + c, r) = -j * std::conj(t);
    }
  }
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(op, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) throw Error("fourier_collocation: eigen-solver failed to converge");

  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const cplx lam = solver.eigenvalues()(i);
    if (lam.imag() >= cfg.halfplane_margin) out.candidates.push_back(lam);
  }
  std::sort(out.candidates.begin(), out.candidates.end(),
            [](cplx a, cplx b) { return a.imag() != b.imag() ? a.imag() > b.imag() : a.real() < b.real(); });

  for (const cplx lam : out.candidates) {
    const auto jp = scatter_at(s, lam);
    const double res = std::abs(jp.a);
    if (jp.reliable && res <= cfg.residual_cutoff) out.eigenvalues.push_back({Eigenvalue::from(lam), res});
  }
  return out;
}

void NewtonConfig::validate() const {
  if (!(re_min <= re_max)) throw Error("newton config: need re_min <= re_max");
  if (n_re < 1 || n_im < 1) throw Error("newton config: lattice needs at least one point per axis");
  if (!(im_max > 0.0)) throw Error("newton config: grid_im must lie above the real axis");
  if (max_newton_iters < 1) throw Error("newton config: max_newton_iters must be >= 1");
  if (!(tol_a > 0.0)) throw Error("newton config: tol_a must be > 0");
  if (!(dedupe_radius >= 0.0)) throw Error("newton config: dedupe_radius must be >= 0");
  if (oversample < 1) throw Error("newton config: oversample must be >= 1");
}

NewtonConfig NewtonConfig::covering(const FrequencyGrid& grid, double max_sigma) {
  NewtonConfig cfg;
  cfg.re_min = grid.omega_min;
  cfg.re_max = grid.omega_max;
  cfg.im_max = max_sigma;
  cfg.n_re = std::max(16, static_cast<int>(std::ceil((grid.omega_max - grid.omega_min) / 2.5)) + 1);
  return cfg;
}

NewtonResult newton_raphson(const Signal& s, const NewtonConfig& cfg) {
  cfg.validate();
  NewtonResult out;
  std::vector<cplx> seeds;
  for (int i = 0; i < cfg.n_re; ++i) {
    const double re = cfg.n_re == 1 ? 0.5 * (cfg.re_min + cfg.re_max)
                                    : cfg.re_min + (cfg.re_max - cfg.re_min) * i / (cfg.n_re - 1.0);
    for (int k = 0; k < cfg.n_im; ++k) seeds.emplace_back(re, cfg.im_max * (k + 1.0) / cfg.n_im);
  }
  out.seeds = seeds.size();
  if (s.peak() == 0.0) {
    out.abandoned = seeds.size();
    return out;
  }

  const double escape = 2.0 * std::hypot(cfg.re_max - cfg.re_min, cfg.im_max) + 1.0;
  std::vector<NewtonRun> runs(seeds.size());
  parallel_for(seeds.size(), cfg.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) runs[i] = newton_from(s, seeds[i], cfg, escape);
  });

  std::vector<DetectedEigenvalue> coarse;
  for (const auto& r : runs) {
    if (r.outcome == NewtonOutcome::converged) {
      ++out.converged;
      coarse.push_back({Eigenvalue::from(r.root), r.residual});
    } else {
      ++out.abandoned;
    }
  }
  coarse = dedupe(std::move(coarse), cfg.dedupe_radius);
  if (cfg.oversample == 1) {
    out.eigenvalues = std::move(coarse);
    return out;
  }

  const Signal fine = oversample_signal(s, cfg.oversample);
  std::vector<DetectedEigenvalue> polished(coarse.size());
  std::vector<char> kept(coarse.size(), 0);
  parallel_for(coarse.size(), cfg.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = polish(fine, coarse[i].value.lambda(), cfg);
      kept[i] = r.outcome == NewtonOutcome::converged;
      polished[i] = {Eigenvalue::from(r.root), r.residual};
    }
  });
  std::vector<DetectedEigenvalue> final_roots;
  for (std::size_t i = 0; i < polished.size(); ++i) {
    if (kept[i]) final_roots.push_back(polished[i]);
  }
  out.eigenvalues = dedupe(std::move(final_roots), cfg.dedupe_radius);
  return out;
}

Signal oversample_signal(const Signal& s, int factor) {
  if (factor < 1) throw Error("oversample: factor must be >= 1");
  if (factor == 1) return s;
  const std::size_t n = s.size();
  const std::size_t big = n * static_cast<std::size_t>(factor);
  std::vector<cplx> spec(s.samples().begin(), s.samples().end());
  fft::forward(spec);
  std::vector<cplx> padded(big, 0.0);
  const std::size_t pos = (n + 1) / 2;  // bins 0 .. pos-1 are non-negative frequencies
  for (std::size_t i = 0; i < pos; ++i) padded[i] = spec[i];
  for (std::size_t i = pos; i < n; ++i) padded[big - n + i] = spec[i];
  if (n % 2 == 0) {
    // Split the Nyquist bin between +N/2 and -N/2.
    const cplx nyq = spec[n / 2];
    padded[n / 2] = 0.5 * nyq;
    padded[big - n / 2] = 0.5 * nyq;
  }
  fft::backward(padded);
  for (auto& v : padded) v /= static_cast<double>(n);
  return Signal(std::move(padded), s.t_start(), s.dt() / factor);
}

std::vector<double> residual_metric(const Signal& s, std::span<const Eigenvalue> estimates, int oversample) {
  if (oversample < 1) throw Error("residual_metric: oversample must be >= 1");
  for (const auto& e : estimates) {
    if (!(e.sigma >= 0.0) || !std::isfinite(e.sigma) || !std::isfinite(e.omega0))
      throw Error("residual_metric: estimates must be finite and in the closed upper half plane");
  }
  std::vector<double> out;
  if (estimates.empty()) return out;
  const Signal fine = oversample_signal(s, oversample);
  for (const auto& e : estimates) out.push_back(std::abs(scatter_at(fine, e.lambda()).a));
  return out;
}

}  // namespace nft
