#include "nft/eigenfit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nft {

namespace {

constexpr double kPi = std::numbers::pi;

// arccot with range (0, pi).
double arccot(double x) { return std::atan2(1.0, x); }

// Weight C(w) multiplied by the trapezoidal quadrature weights of the grid.
std::vector<double> quadrature_weights(const FrequencyGrid& grid, const Weight& weight) {
  auto c = weight.evaluate(grid);
  const double dw = grid.spacing();
  for (auto& v : c) v *= dw;
  c.front() *= 0.5;
  c.back() *= 0.5;
  return c;
}

double sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

void check_estimates(std::span<const Eigenvalue> estimates) {
  for (const auto& e : estimates) {
    if (!(e.sigma > 0.0) || !std::isfinite(e.sigma) || !std::isfinite(e.omega0))
      throw Error("eigenvalue estimates must be finite with sigma > 0");
  }
}

void check_grid(const PhaseProfile& theta) {
  theta.grid.validate();
  if (theta.theta.size() != theta.grid.n_points) throw Error("phase profile: theta length does not match its grid");
}

std::vector<double> residual(const PhaseProfile& theta, std::span<const Eigenvalue> estimates) {
  auto r = model_phase(estimates, theta.grid);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= theta.theta[i];
  return r;
}

double weighted_square(std::span<const double> quad, std::span<const double> r) {
  double e = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) e += quad[i] * r[i] * r[i];
  return e;
}

// Exact gradient of the discretized E, laid out as (omega_1, sigma_1, omega_2, ...).
std::vector<double> gradient_of(const FrequencyGrid& grid, std::span<const double> quad, std::span<const double> r,
                                std::span<const Eigenvalue> estimates) {
  std::vector<double> g;
  g.reserve(2 * estimates.size());
  for (const auto& e : estimates) {
    double d_omega = 0.0;
    double d_sigma = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (quad[i] == 0.0) continue;
      const double x = grid.omega(i) - e.omega0;
      const double m = e.sigma * e.sigma + x * x;
      const double wr = quad[i] * r[i] / m;
      d_omega += wr * e.sigma;
      d_sigma += wr * x;
    }
    g.push_back(-4.0 * d_omega);
    g.push_back(-4.0 * d_sigma);
  }
  return g;
}

std::vector<Eigenvalue> apply_step(std::span<const Eigenvalue> x, std::span<const double> g, double alpha,
                                   double sigma_floor) {
  std::vector<Eigenvalue> out(x.begin(), x.end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].omega0 -= alpha * g[2 * k];
    out[k].sigma = std::max(sigma_floor, out[k].sigma - alpha * g[2 * k + 1]);
  }
  return out;
}

double max_change(std::span<const Eigenvalue> a, std::span<const Eigenvalue> b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    m = std::max(m, std::abs(a[k].omega0 - b[k].omega0));
    m = std::max(m, std::abs(a[k].sigma - b[k].sigma));
  }
  return m;
}

}  // namespace

std::vector<double> Weight::evaluate(const FrequencyGrid& grid) const {
  if (samples) {
    if (samples->size() != grid.n_points) throw Error("weight: sample count does not match the grid");
    for (double v : *samples) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error("weight: samples must be finite and >= 0");
    }
    return *samples;
  }
  if (!(central_fraction > 0.0 && central_fraction <= 1.0)) throw Error("weight: central_fraction must be in (0, 1]");
  const double half_span = 0.5 * central_fraction * (grid.omega_max - grid.omega_min);
  const double centre = 0.5 * (grid.omega_max + grid.omega_min);
  const double slack = 1e-9 * grid.spacing();
  std::vector<double> c(grid.n_points);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::abs(grid.omega(i) - centre) <= half_span + slack ? 1.0 : 0.0;
  return c;
}

void FitConfig::validate() const {
  if (!(step0 > 0.0)) throw Error("fit config: step0 must be > 0");
  if (max_iters < 0) throw Error("fit config: max_iters must be >= 0");
  if (!(tol_error >= 0.0 && tol_error < 1.0)) throw Error("fit config: tol_error must be in [0, 1)");
  if (!(tol_step >= 0.0 && tol_step < 1.0)) throw Error("fit config: tol_step must be in [0, 1)");
  if (!(sigma_floor > 0.0)) throw Error("fit config: sigma_floor must be > 0");
  if (max_halvings < 0) throw Error("fit config: max_halvings must be >= 0");
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::none: return "none";
    case StopReason::error_tolerance: return "error_tolerance";
    case StopReason::step_tolerance: return "step_tolerance";
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::backtracking_exhausted: return "backtracking_exhausted";
    case StopReason::no_eigenvalues: return "no_eigenvalues";
  }
  return "unknown";
}

std::vector<double> model_phase(std::span<const Eigenvalue> estimates, const FrequencyGrid& grid) {
  check_estimates(estimates);
  std::vector<double> th(grid.n_points, 0.0);
  for (const auto& e : estimates) {
    for (std::size_t i = 0; i < th.size(); ++i) th[i] += 2.0 * arccot((e.omega0 - grid.omega(i)) / e.sigma);
  }
  return th;
}

double fit_error(const PhaseProfile& theta, std::span<const Eigenvalue> estimates, const FitConfig& cfg) {
  check_grid(theta);
  const auto quad = quadrature_weights(theta.grid, cfg.weight);
  return weighted_square(quad, residual(theta, estimates));
}

std::vector<UpdateDirection> update_directions(const PhaseProfile& theta, std::span<const Eigenvalue> estimates,
                                               const FitConfig& cfg) {
  check_grid(theta);
  const auto quad = quadrature_weights(theta.grid, cfg.weight);
  const auto g = gradient_of(theta.grid, quad, residual(theta, estimates), estimates);
  std::vector<UpdateDirection> out(estimates.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {-0.25 * g[2 * k], -0.25 * g[2 * k + 1]};
  return out;
}

FitState make_state(const PhaseProfile& theta, std::vector<Eigenvalue> estimates, const FitConfig& cfg) {
  check_grid(theta);
  check_estimates(estimates);
  for (auto& e : estimates) e.sigma = std::max(e.sigma, cfg.sigma_floor);
  const auto quad = quadrature_weights(theta.grid, cfg.weight);
  FitState st;
  st.residual_profile = residual(theta, estimates);
  st.error_history.push_back(weighted_square(quad, st.residual_profile));
  st.gradient = gradient_of(theta.grid, quad, st.residual_profile, estimates);
  st.estimates = std::move(estimates);
  st.alpha = cfg.step0;
  return st;
}

FitState gradient_step(const PhaseProfile& theta, const FitState& state, const FitConfig& cfg) {
  cfg.validate();
  check_grid(theta);
  FitState next = state;
  if (state.estimates.empty()) return next;
  const auto quad = quadrature_weights(theta.grid, cfg.weight);
  const auto& x = state.estimates;
  const auto g = state.gradient.size() == 2 * x.size()
                     ? state.gradient
                     : gradient_of(theta.grid, quad, residual(theta, x), x);
  const double e0 = state.error_history.empty() ? weighted_square(quad, residual(theta, x)) : state.error_history.back();

  if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) {
    next.last_step = 0.0;
    next.gradient = g;
    return next;
  }

  auto try_from = [&](double alpha0, std::vector<Eigenvalue>& out_x, std::vector<double>& out_r, double& out_e) {
    double alpha = alpha0;
    for (int h = 0; h <= cfg.max_halvings; ++h, alpha *= 0.5) {
      auto cand = apply_step(x, g, alpha, cfg.sigma_floor);
      auto r = residual(theta, cand);
      const double e = weighted_square(quad, r);
      if (e <= e0) {
        out_x = std::move(cand);
        out_r = std::move(r);
        out_e = e;
        return alpha;
      }
    }
    return 0.0;
  };

  std::vector<Eigenvalue> new_x;
  std::vector<double> new_r;
  double new_e = e0;
  const double trial = state.alpha > 0.0 ? state.alpha : cfg.step0;
  double used = try_from(trial, new_x, new_r, new_e);
  if (used == 0.0 && trial != cfg.step0) used = try_from(cfg.step0, new_x, new_r, new_e);
  if (used == 0.0) {
    next.converged = false;
    next.stop = StopReason::backtracking_exhausted;
    next.diagnostic = "step size halved " + std::to_string(cfg.max_halvings) + " times without decreasing the error";
    return next;
  }

  auto new_g = gradient_of(theta.grid, quad, new_r, new_x);
  double sy = 0.0;
  double ss = 0.0;
  double yy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double s_o = new_x[k].omega0 - x[k].omega0;
    const double s_s = new_x[k].sigma - x[k].sigma;
    ss += s_o * s_o + s_s * s_s;
    const double y_o = new_g[2 * k] - g[2 * k];
    const double y_s = new_g[2 * k + 1] - g[2 * k + 1];
    sy += s_o * y_o + s_s * y_s;
    yy += y_o * y_o + y_s * y_s;
  }
  double next_alpha = cfg.step0;
  // Alternate the long (s.s / s.y) and short (s.y / y.y) step lengths.
  if (cfg.step_rule == StepRule::barzilai_borwein && sy > 0.0 && ss > 0.0)
    next_alpha = std::clamp(state.iteration % 2 ? sy / yy : ss / sy, cfg.step0 * 1e-6, cfg.step0 * 1e6);

  next.last_step = max_change(x, new_x);
  next.estimates = std::move(new_x);
  next.residual_profile = std::move(new_r);
  next.gradient = std::move(new_g);
  next.error_history.push_back(new_e);
  next.alpha = next_alpha;
  next.iteration = state.iteration + 1;
  return next;
}

InitResult init_estimates(const PhaseProfile& theta, int n) {
  check_grid(theta);
  InitResult out;
  if (n < 0) n = count_eigenvalues(theta).n;
  if (n <= 0) return out;

  const std::size_t len = theta.theta.size();
  const double dw = theta.grid.spacing();
  std::vector<double> slope(len);
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == len ? i : i + 1;
    slope[i] = (theta.theta[hi] - theta.theta[lo]) / (static_cast<double>(hi - lo) * dw);
  }
  std::vector<double> smooth(slope);
  for (std::size_t i = 1; i + 1 < len; ++i) smooth[i] = 0.25 * slope[i - 1] + 0.5 * slope[i] + 0.25 * slope[i + 1];

  const double top = *std::max_element(smooth.begin(), smooth.end());
  struct Peak {
    double omega, height;
  };
  std::vector<Peak> peaks;
  for (std::size_t i = 1; i + 1 < len; ++i) {
    if (smooth[i] >= smooth[i - 1] && smooth[i] > smooth[i + 1] && smooth[i] > 0.05 * top) {
      // Parabolic vertex through the three samples.
      const double l = smooth[i - 1], c = smooth[i], r = smooth[i + 1];
      const double curv = l - 2.0 * c + r;
      const double off = curv < 0.0 ? 0.5 * (l - r) / curv : 0.0;
      peaks.push_back({theta.grid.omega(i) + off * dw, c - 0.25 * (l - r) * off});
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.height > b.height; });

  for (const auto& p : peaks) {
    if (static_cast<int>(out.estimates.size()) == n) break;
    const double width = 2.0 / p.height;
    const bool separated = std::all_of(out.estimates.begin(), out.estimates.end(), [&](const Eigenvalue& e) {
      return std::abs(p.omega - e.omega0) > std::max(width, e.sigma);
    });
    if (separated) out.estimates.push_back({p.omega, width});
  }
  out.peaks_found = out.estimates.size();

  const int missing = n - static_cast<int>(out.estimates.size());
  if (missing > 0) {
    out.used_fallback = true;
    std::vector<double> widths;
    for (const auto& e : out.estimates) widths.push_back(e.sigma);
    double median = 10.0 * dw;
    if (!widths.empty()) {
      std::sort(widths.begin(), widths.end());
      const std::size_t m = widths.size();
      median = m % 2 ? widths[m / 2] : 0.5 * (widths[m / 2 - 1] + widths[m / 2]);
    }
    double mass = 0.0, moment = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double s = std::max(0.0, smooth[i]);
      mass += s;
      moment += s * theta.grid.omega(i);
    }
    const double centre = mass > 0.0 ? moment / mass : 0.5 * (theta.grid.omega_min + theta.grid.omega_max);
    for (int k = 0; k < missing; ++k) {
      const double offset = (k - 0.5 * (missing - 1) + 0.5) * median;
      out.estimates.push_back({centre + offset, median * (k + 2)});
    }
  }
  return out;
}

FitState fit(const PhaseProfile& theta, const FitConfig& cfg, std::optional<std::vector<Eigenvalue>> init) {
  cfg.validate();
  check_grid(theta);
  std::vector<Eigenvalue> start = init ? std::move(*init) : init_estimates(theta).estimates;
  FitState st = make_state(theta, std::move(start), cfg);
  if (st.estimates.empty()) {
    st.converged = true;
    st.stop = StopReason::no_eigenvalues;
    return st;
  }
  const double bandwidth = sum(quadrature_weights(theta.grid, cfg.weight));
  const double scale = bandwidth > 0.0 ? 1.0 / bandwidth : 1.0;
  while (true) {
    if (st.error_history.back() * scale <= cfg.tol_error) {
      st.converged = true;
      st.stop = StopReason::error_tolerance;
      return st;
    }
    if (st.iteration >= cfg.max_iters) {
      st.converged = false;
      st.stop = StopReason::max_iterations;
      st.diagnostic = "reached max_iters = " + std::to_string(cfg.max_iters);
      return st;
    }
    FitState next = gradient_step(theta, st, cfg);
    if (next.stop == StopReason::backtracking_exhausted) return next;
    const bool stalled = next.iteration == st.iteration;  // zero gradient
    st = std::move(next);
    if (stalled || st.last_step <= cfg.tol_step) {
      st.converged = true;
      st.stop = StopReason::step_tolerance;
      return st;
    }
  }
}

}  // namespace nft
