#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nft {

using cplx = std::complex<double>;

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a generated pulse is not negligible at the window edges.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// Uniform time grid: t_i = t_start + i * dt, i = 0 .. n-1.
struct TimeGrid {
  double t_start = -20.48;
  double dt = 0.02;
  std::size_t n = 2048;

  /// Grid over [-half_width, half_width) with n samples.
  static TimeGrid centered(double half_width, std::size_t n);

  double time(std::size_t i) const { return t_start + static_cast<double>(i) * dt; }
  void validate() const;
};

/// Uniformly sampled complex envelope in soliton units.
///
/// Immutable after construction; safe to share across threads.
class Signal {
 public:
  /// Throws nft::Error on empty samples, non-positive dt, or non-finite values.
  Signal(std::vector<cplx> samples, double t_start, double dt);
  Signal(std::vector<cplx> samples, const TimeGrid& grid);

  std::span<const cplx> samples() const { return samples_; }
  const cplx& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const { return samples_.size(); }
  double t_start() const { return t_start_; }
  double dt() const { return dt_; }
  double time(std::size_t i) const { return t_start_ + static_cast<double>(i) * dt_; }
  /// Time of the last sample.
  double t_end() const { return time(samples_.size() - 1); }
  double duration() const { return static_cast<double>(samples_.size()) * dt_; }
  TimeGrid grid() const { return {t_start_, dt_, samples_.size()}; }

  /// Trapezoidal approximation of the integral of |q|^2.
  double energy() const;
  double peak() const;
  /// max(|q_0|, |q_{n-1}|) / peak, 0 for the zero signal.
  double edge_ratio() const;

  bool same_grid(const Signal& other) const;

 private:
  std::vector<cplx> samples_;
  double t_start_;
  double dt_;
};

/// Edge amplitude relative to the peak above which a pulse counts as truncated.
inline constexpr double kEdgeThreshold = 1e-8;

enum class EdgePolicy {
  warn,    ///< print a warning to std::clog and continue
  strict,  ///< throw TruncationError
  ignore,
};

/// amplitude * sech(t - t_center) * exp(-2j * freq_shift * (t - t_center)).
///
/// With freq_shift = 0 the eigenvalues are j(amplitude + 1/2 - k) for
/// k = 1 .. floor(amplitude + 1/2), dropping any that land on the real axis.
/// A nonzero freq_shift moves every eigenvalue by +freq_shift along the real axis.
Signal gen_sech(double amplitude, double freq_shift, double t_center, const TimeGrid& grid = {},
                EdgePolicy policy = EdgePolicy::warn);

/// Eigenvalues of gen_sech(amplitude, freq_shift, ...) in closed form.
std::vector<cplx> sech_eigenvalues(double amplitude, double freq_shift = 0.0);

/// amplitude on [t_on, t_off), zero elsewhere.
Signal gen_rect(cplx amplitude, double t_on, double t_off, const TimeGrid& grid = {});

/// Pointwise sum. The nonlinear spectrum of a sum is only approximately the
/// union of the parts; the approximation improves with time and frequency
/// separation of the components.
Signal superpose(std::span<const Signal> pulses);

/// Passed as snr_db to add_awgn to request a noiseless copy.
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

/// Adds circular complex Gaussian noise with total noise energy
/// signal_energy / 10^(snr_db / 10). Deterministic for a given seed.
Signal add_awgn(const Signal& s, double snr_db, std::uint64_t rng_seed);

/// Fiber parameters used to move between physical and soliton units.
struct PhysicalUnits {
  double beta2;  ///< s^2/m, must be negative (anomalous dispersion)
  double gamma;  ///< 1/(W m)
  double T0;     ///< s

  void validate() const;
};

struct NormalizationScale {
  double time_scale;       ///< seconds per normalized time unit (T0)
  double amplitude_scale;  ///< q / field, T0 * sqrt(gamma / |beta2|), in W^(-1/2)
};

struct NormalizedSignal {
  Signal signal;
  NormalizationScale scale;
};

struct PhysicalField {
  std::vector<cplx> samples;  ///< W^(1/2)
  double t_start_seconds;
  double dt_seconds;
};

NormalizationScale normalization_scale(const PhysicalUnits& units);

NormalizedSignal normalize_physical(std::span<const cplx> field, double dt_seconds,
                                    const PhysicalUnits& units, double t_start_seconds = 0.0);

PhysicalField denormalize(const Signal& s, const PhysicalUnits& units);

enum class FwhmConvention { power, field };

/// FWHM, in normalized time, of the fundamental soliton with eigenvalue j*sigma
/// (q = 2 sigma sech(2 sigma t)). Power: 2 acosh(sqrt 2) / (2 sigma) ~ 0.8814 / sigma.
double soliton_fwhm(double sigma, FwhmConvention convention = FwhmConvention::power);

/// Signal JSON: {"t_start": .., "dt": .., "samples": [[re, im], ...]}.
Signal read_signal_json(const std::filesystem::path& path);
Signal parse_signal_json(const std::string& text);
std::string signal_to_json(const Signal& s);
void write_signal_json(const Signal& s, const std::filesystem::path& path);

}  // namespace nft
