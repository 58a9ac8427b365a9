#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nft/phase_recovery.hpp"

namespace nft {

/// Discrete eigenvalue lambda = omega0 + j sigma, sigma > 0.
struct Eigenvalue {
  double omega0 = 0.0;
  double sigma = 1.0;

  cplx lambda() const { return {omega0, sigma}; }
  static Eigenvalue from(cplx lambda) { return {lambda.real(), lambda.imag()}; }
};

/// Weight C(omega) of the phase-fit error.
struct Weight {
  /// Indicator of this central fraction of the grid (ignored if samples set).
  double central_fraction = 0.9;
  /// Explicit per-grid-point weights.
  std::optional<std::vector<double>> samples;

  std::vector<double> evaluate(const FrequencyGrid& grid) const;
};

enum class StepRule {
  /// Start every iteration from step0 and halve until the error does not grow.
  fixed,
  /// Start from the Barzilai-Borwein step of the previous iteration, alternating
  /// s.s / s.y and s.y / y.y, then halve the same way.
  barzilai_borwein,
};

struct FitConfig {
  Weight weight;
  double step0 = 0.1;
  int max_iters = 500;
  /// Stop when E / integral(C) falls below this.
  double tol_error = 1e-14;
  /// Stop when the largest parameter change of an accepted step falls below this.
  double tol_step = 1e-8;
  double sigma_floor = 1e-6;
  int max_halvings = 30;
  StepRule step_rule = StepRule::barzilai_borwein;

  void validate() const;
};

enum class StopReason { none, error_tolerance, step_tolerance, max_iterations, backtracking_exhausted, no_eigenvalues };

const char* to_string(StopReason r);

struct FitState {
  std::vector<Eigenvalue> estimates;
  int iteration = 0;
  std::vector<double> error_history;  ///< E after each accepted step, starting with the initial E
  bool converged = false;
  StopReason stop = StopReason::none;
  std::string diagnostic;
  std::vector<double> residual_profile;  ///< model - measured, per grid point
  double last_step = 0.0;                ///< largest parameter change of the last accepted step
  // Step-size memory for the next iteration.
  double alpha = 0.0;
  std::vector<double> gradient;
};

/// theta_hat(w) = 2 sum_k arccot((omega_k - w) / sigma_k), arccot in (0, pi).
std::vector<double> model_phase(std::span<const Eigenvalue> estimates, const FrequencyGrid& grid);

/// E = integral C (theta_hat - theta)^2 by the trapezoidal rule on the grid.
double fit_error(const PhaseProfile& theta, std::span<const Eigenvalue> estimates, const FitConfig& cfg);

/// Update integrals for each eigenvalue, trapezoidal on the grid:
///   d_omega = integral C sigma_k (theta_hat - theta) / M
///   d_sigma = integral C (w - omega_k) (theta_hat - theta) / M
/// with M = sigma_k^2 + (w - omega_k)^2. The exact gradient of E is
/// dE/domega_k = -4 d_omega and dE/dsigma_k = -4 d_sigma, so a descent step
/// moves both parameters by +4 alpha times their integral.
struct UpdateDirection {
  double d_omega;
  double d_sigma;
};

std::vector<UpdateDirection> update_directions(const PhaseProfile& theta, std::span<const Eigenvalue> estimates,
                                               const FitConfig& cfg);

/// Starting state for gradient_step / fit.
FitState make_state(const PhaseProfile& theta, std::vector<Eigenvalue> estimates, const FitConfig& cfg);

/// One simultaneous update of every (omega_k, sigma_k) with backtracking on
/// the step size: halve while E would increase, up to cfg.max_halvings times.
/// sigma is projected onto [sigma_floor, inf).
FitState gradient_step(const PhaseProfile& theta, const FitState& state, const FitConfig& cfg);

struct InitResult {
  std::vector<Eigenvalue> estimates;
  std::size_t peaks_found = 0;
  bool used_fallback = false;
};

/// Initial guesses from the peaks of d theta / d w, which is the Lorentzian
/// sum  sum_k 2 sigma_k / M(w, omega_k, sigma_k). Each isolated peak of height
/// H at w0 gives (w0, 2 / H). Missing estimates (merged peaks) are spread
/// around the slope-weighted centre with widths growing from the median width.
/// n < 0 means use count_eigenvalues.
InitResult init_estimates(const PhaseProfile& theta, int n = -1);

/// Gradient descent until E / integral(C) <= tol_error, the step falls below
/// tol_step, or max_iters. Returns the final (best) state with its history.
FitState fit(const PhaseProfile& theta, const FitConfig& cfg = {},
             std::optional<std::vector<Eigenvalue>> init = std::nullopt);

}  // namespace nft
