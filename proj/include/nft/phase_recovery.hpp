#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "nft/scattering.hpp"

namespace nft {

/// ln(max(1 - |b|^2, floor_eps)) together with how many points hit the floor.
struct ClampedLog {
  std::vector<double> values;
  std::size_t clamped = 0;
};

ClampedLog magnitude_bounded_log(std::span<const cplx> b, double floor_eps = 1e-12);

struct HilbertOptions {
  /// The input is zero-extended to pad_factor times its length before the
  /// periodic transform, which pushes the periodic images away from the data.
  std::size_t pad_factor = 16;
  /// Relative edge magnitude above which the input is flagged as not decaying.
  double edge_tolerance = 1e-2;
};

struct HilbertDiagnostics {
  bool edge_warning = false;
  double edge_ratio = 0.0;
};

/// Discrete Hilbert transform of uniformly spaced samples, realized as the
/// spectral multiplier -j sign(k) with zero DC and Nyquist response, so that
/// H[cos(k w)] = sin(k w). With this sign,
///   arg a(w) = H[ln |a(w)|]
/// for any a analytic and zero-free in the upper half plane.
std::vector<double> hilbert(std::span<const double> x, const HilbertOptions& opts = {},
                            HilbertDiagnostics* diag = nullptr);

/// Overload that checks the abscissae are uniform; throws nft::Error otherwise.
std::vector<double> hilbert(std::span<const double> omega, std::span<const double> x,
                            const HilbertOptions& opts = {}, HilbertDiagnostics* diag = nullptr);

/// Zero-free factor of a(w) rebuilt from |b(w)|:
///   A[b] = sqrt(1 - |b|^2) exp(j/2 H[ln(1 - |b|^2)])
std::vector<cplx> reconstruct_A(const ContinuousSpectrum& cs, const HilbertOptions& opts = {},
                                std::size_t* clamped = nullptr);

/// Unwrapped phase of the all-pass ratio G = a / A[b].
struct PhaseProfile {
  FrequencyGrid grid;
  std::vector<double> theta;        ///< radians, unwrapped
  std::vector<double> g_magnitude;  ///< |G|, ideally 1
  std::vector<bool> unreliable;     ///< |A| below kUnreliableA
  std::size_t clamped = 0;          ///< points where 1 - |b|^2 hit the log floor
};

inline constexpr double kUnreliableA = 1e-6;

/// Unwraps by removing 2 pi jumps scanning left to right; the first value is
/// kept as the principal value in (-pi, pi].
std::vector<double> unwrap_phase(std::span<const double> wrapped);

/// theta starts at the principal value at omega_min, matching the arccot
/// branch whose terms tend to 0 as omega -> -infinity. Requires spacing
/// below the smallest eigenvalue imaginary part so the phase never moves by
/// pi between neighbours.
PhaseProfile allpass_phase(const ContinuousSpectrum& cs, const HilbertOptions& opts = {});

struct EigenvalueCount {
  int n = 0;
  double unrounded = 0.0;
  bool low_confidence = false;  ///< theta has not flattened at the grid edges
};

/// N = round((theta_end - theta_begin) / 2 pi).
EigenvalueCount count_eigenvalues(const PhaseProfile& p);

/// CSV with header omega,theta,g_magnitude.
void write_phase_csv(const PhaseProfile& p, const std::filesystem::path& path);

}  // namespace nft
