#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "nft/signals.hpp"

namespace nft {

/// Uniform grid of real spectral frequencies.
struct FrequencyGrid {
  double omega_min = -40.0;
  double omega_max = 40.0;
  std::size_t n_points = 2048;

  void validate() const;
  double spacing() const { return (omega_max - omega_min) / static_cast<double>(n_points - 1); }
  double omega(std::size_t i) const { return omega_min + static_cast<double>(i) * spacing(); }
  std::vector<double> omegas() const;

  /// Symmetric grid of n_points up to half of the frequency at which the
  /// per-sample phase 2 omega dt reaches pi.
  static FrequencyGrid default_for(const Signal& s, std::size_t n_points = 2048);
};

/// Jost coefficients on the real axis.
struct ContinuousSpectrum {
  FrequencyGrid grid;
  std::vector<cplx> a;
  std::vector<cplx> b;

  /// max | |a|^2 + |b|^2 - 1 | over the grid.
  double unitarity_defect() const;
};

/// Jost coefficients at one complex frequency.
///
/// For Im(lambda) > 0 the state grows like exp(2 Im(lambda) duration); it is
/// renormalized during propagation, so log_abs_a stays meaningful even when a
/// itself over- or underflows. b is not reliable off the real axis.
struct JostPoint {
  cplx lambda;
  cplx a;
  cplx b;
  std::optional<cplx> a_prime;
  double log_abs_a = 0.0;
  bool reliable = true;
};

/// Integrates the Zakharov-Shabat system for every grid frequency with the
/// exact-rotation trapezoidal propagator. Frequencies are independent and are
/// split across `threads` workers (0 = default_thread_count()).
ContinuousSpectrum scatter_grid(const Signal& s, const FrequencyGrid& grid, unsigned threads = 0);

/// Same integration at a single point of the closed upper half plane.
/// Throws nft::Error if Im(lambda) < 0.
JostPoint scatter_at(const Signal& s, cplx lambda);

/// da/dlambda from the variational system carried alongside the state.
cplx a_derivative_at(const Signal& s, cplx lambda);

/// a, b and a' in one pass.
JostPoint scatter_with_derivative(const Signal& s, cplx lambda);

/// CSV with header omega,re_a,im_a,re_b,im_b.
void write_spectrum_csv(const ContinuousSpectrum& cs, const std::filesystem::path& path);
ContinuousSpectrum read_spectrum_csv(const std::filesystem::path& path);

}  // namespace nft
