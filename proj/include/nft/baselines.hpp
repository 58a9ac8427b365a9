#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nft/eigenfit.hpp"
#include "nft/scattering.hpp"

namespace nft {

struct DetectedEigenvalue {
  Eigenvalue value;
  double residual = 0.0;  ///< |a(lambda)| as evaluated by the detector
};

struct CollocationConfig {
  /// Fourier modes -n_modes .. n_modes per component; the matrix is
  /// 2 (2 n_modes + 1) square.
  int n_modes = 64;
  /// Candidates with |a(lambda)| above this are treated as spurious.
  double residual_cutoff = 1e-2;
  /// Candidates need Im(lambda) >= halfplane_margin.
  double halfplane_margin = 1e-3;

  void validate() const;
};

struct CollocationResult {
  std::vector<DetectedEigenvalue> eigenvalues;  ///< survivors of the residual filter
  std::vector<cplx> candidates;                 ///< upper-half-plane eigenvalues before filtering
};

/// Fourier collocation: expands both Jost components in the Fourier basis of
/// the (periodized) signal window and solves the dense eigenproblem
///   lambda v = [[ diag(-k),  -j T ], [ -j T^H,  diag(k) ]] v
/// where k_m = 2 pi m / L and T_{mn} = qhat_{m-n} are the Fourier
/// coefficients of q on the window of length L.
CollocationResult fourier_collocation(const Signal& s, const CollocationConfig& cfg = {});

struct NewtonConfig {
  double re_min = -5.0;
  double re_max = 5.0;
  int n_re = 16;
  /// Seeds sit at im_max * (i + 1) / n_im, i = 0 .. n_im - 1, all above 0.
  double im_max = 3.0;
  int n_im = 8;
  int max_newton_iters = 50;
  double tol_a = 1e-10;
  double dedupe_radius = 1e-3;
  /// Converged roots are polished on the signal resampled by this factor.
  int oversample = 8;
  /// Worker threads across seeds (0 = default_thread_count()).
  unsigned threads = 0;

  void validate() const;
  /// Lattice spanning the frequency grid horizontally and (0, max_sigma] vertically,
  /// with at least 16 columns and column spacing at most 2.5.
  static NewtonConfig covering(const FrequencyGrid& grid, double max_sigma);
};

struct NewtonResult {
  std::vector<DetectedEigenvalue> eigenvalues;
  std::size_t seeds = 0;
  std::size_t converged = 0;
  std::size_t abandoned = 0;
};

/// Newton iterations lambda <- lambda - a / a' from every lattice seed.
/// Iterates are kept in the upper half plane; a seed that keeps leaving it,
/// escapes the lattice or overflows is abandoned. Roots closer than
/// dedupe_radius are merged.
NewtonResult newton_raphson(const Signal& s, const NewtonConfig& cfg = {});

/// Band-limited (FFT zero-padding) interpolation onto a grid `factor` times denser.
Signal oversample_signal(const Signal& s, int factor);

/// |a(lambda_k)| per estimate, evaluated on the signal oversampled by `oversample`.
std::vector<double> residual_metric(const Signal& s, std::span<const Eigenvalue> estimates, int oversample = 2);

}  // namespace nft
