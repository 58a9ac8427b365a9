#include "nft/signals.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

namespace nft {

namespace {

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// Grid points that sit exactly on an interval boundary must not flip sides
// because of rounding in t_start + i * dt.
constexpr double kGridSnap = 1e-9;

}  // namespace

TimeGrid TimeGrid::centered(double half_width, std::size_t n) {
  if (!(half_width > 0.0) || n < 2) throw Error("TimeGrid::centered: need half_width > 0 and n >= 2");
  return {-half_width, 2.0 * half_width / static_cast<double>(n), n};
}

void TimeGrid::validate() const {
  if (n == 0) throw Error("time grid: n must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error("time grid: dt must be finite and > 0");
  if (!std::isfinite(t_start)) throw Error("time grid: t_start must be finite");
}

Signal::Signal(std::vector<cplx> samples, double t_start, double dt)
    : samples_(std::move(samples)), t_start_(t_start), dt_(dt) {
  if (samples_.empty()) throw Error("signal: samples must be non-empty");
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw Error("signal: dt must be finite and > 0");
  if (!std::isfinite(t_start_)) throw Error("signal: t_start must be finite");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!finite(samples_[i])) throw Error("signal: non-finite sample at index " + std::to_string(i));
  }
}

Signal::Signal(std::vector<cplx> samples, const TimeGrid& grid)
    : Signal(std::move(samples), grid.t_start, grid.dt) {}

double Signal::energy() const {
  double acc = 0.0;
  for (const auto& q : samples_) acc += std::norm(q);
  acc -= 0.5 * (std::norm(samples_.front()) + std::norm(samples_.back()));
  return acc * dt_;
}

double Signal::peak() const {
  double p = 0.0;
  for (const auto& q : samples_) p = std::max(p, std::abs(q));
  return p;
}

double Signal::edge_ratio() const {
  const double p = peak();
  if (p == 0.0) return 0.0;
  return std::max(std::abs(samples_.front()), std::abs(samples_.back())) / p;
}

bool Signal::same_grid(const Signal& other) const {
  if (size() != other.size()) return false;
  const double tol = 1e-12 * std::max(1.0, std::abs(dt_) * static_cast<double>(size()));
  return std::abs(dt_ - other.dt_) <= 1e-12 * dt_ && std::abs(t_start_ - other.t_start_) <= tol;
}

Signal gen_sech(double amplitude, double freq_shift, double t_center, const TimeGrid& grid,
                EdgePolicy policy) {
  grid.validate();
  if (amplitude < 0.0 || !std::isfinite(amplitude)) throw Error("gen_sech: amplitude must be >= 0");
  std::vector<cplx> q(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double tau = grid.time(i) - t_center;
    q[i] = amplitude / std::cosh(tau) * std::polar(1.0, -2.0 * freq_shift * tau);
  }
  Signal s(std::move(q), grid);
  if (amplitude > 0.0 && s.edge_ratio() > kEdgeThreshold && policy != EdgePolicy::ignore) {
    std::ostringstream msg;
    msg << "gen_sech: edge amplitude " << s.edge_ratio() << " x peak exceeds " << kEdgeThreshold
        << "; widen the time grid";
    if (policy == EdgePolicy::strict) throw TruncationError(msg.str());
    std::clog << "warning: " << msg.str() << '\n';
  }
  return s;
}

std::vector<cplx> sech_eigenvalues(double amplitude, double freq_shift) {
  std::vector<cplx> out;
  const int count = static_cast<int>(std::floor(amplitude + 0.5));
  for (int k = 1; k <= count; ++k) {
    const double sigma = amplitude + 0.5 - k;
    if (sigma > 1e-12) out.emplace_back(freq_shift, sigma);
  }
  return out;
}

Signal gen_rect(cplx amplitude, double t_on, double t_off, const TimeGrid& grid) {
  grid.validate();
  if (!(t_on < t_off)) throw Error("gen_rect: invalid interval, need t_on < t_off");
  const double snap = kGridSnap * grid.dt;
  std::vector<cplx> q(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double t = grid.time(i);
    if (t >= t_on - snap && t < t_off - snap) q[i] = amplitude;
  }
  return Signal(std::move(q), grid);
}

Signal superpose(std::span<const Signal> pulses) {
  if (pulses.empty()) throw Error("superpose: need at least one pulse");
  const Signal& first = pulses.front();
  std::vector<cplx> sum(first.samples().begin(), first.samples().end());
  for (std::size_t p = 1; p < pulses.size(); ++p) {
    if (!first.same_grid(pulses[p])) throw Error("superpose: grid mismatch at pulse " + std::to_string(p));
    auto s = pulses[p].samples();
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += s[i];
  }
  return Signal(std::move(sum), first.t_start(), first.dt());
}

Signal add_awgn(const Signal& s, double snr_db, std::uint64_t rng_seed) {
  if (std::isinf(snr_db) && snr_db > 0) return s;
  double total = 0.0;
  for (const auto& q : s.samples()) total += std::norm(q);
  if (total == 0.0) throw Error("add_awgn: zero-energy signal, SNR undefined");
  const double snr = std::pow(10.0, snr_db / 10.0);
  // Per-sample variance so that sum |n_i|^2 dt = energy / snr on average.
  const double variance = total / (static_cast<double>(s.size()) * snr);
  const double component_sd = std::sqrt(variance / 2.0);

  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal(0.0, component_sd);
  std::vector<cplx> out(s.samples().begin(), s.samples().end());
  for (auto& q : out) {
    const double re = normal(rng);
    const double im = normal(rng);
    q += cplx(re, im);
  }
  return Signal(std::move(out), s.t_start(), s.dt());
}

void PhysicalUnits::validate() const {
  if (!std::isfinite(beta2) || !(beta2 < 0.0)) throw Error("physical units: beta2 must be finite and < 0");
  if (!std::isfinite(gamma) || !(gamma > 0.0)) throw Error("physical units: gamma must be finite and > 0");
  if (!std::isfinite(T0) || !(T0 > 0.0)) throw Error("physical units: T0 must be finite and > 0");
}

NormalizationScale normalization_scale(const PhysicalUnits& units) {
  units.validate();
  return {units.T0, units.T0 * std::sqrt(units.gamma / std::abs(units.beta2))};
}

NormalizedSignal normalize_physical(std::span<const cplx> field, double dt_seconds,
                                    const PhysicalUnits& units, double t_start_seconds) {
  const auto scale = normalization_scale(units);
  std::vector<cplx> q(field.begin(), field.end());
  for (auto& v : q) v *= scale.amplitude_scale;
  return {Signal(std::move(q), t_start_seconds / scale.time_scale, dt_seconds / scale.time_scale), scale};
}

PhysicalField denormalize(const Signal& s, const PhysicalUnits& units) {
  const auto scale = normalization_scale(units);
  PhysicalField f{{s.samples().begin(), s.samples().end()}, s.t_start() * scale.time_scale,
                  s.dt() * scale.time_scale};
  for (auto& v : f.samples) v /= scale.amplitude_scale;
  return f;
}

double soliton_fwhm(double sigma, FwhmConvention convention) {
  if (!(sigma > 0.0)) throw Error("soliton_fwhm: sigma must be > 0");
  // sech(x)^2 = 1/2 at x = acosh(sqrt 2); sech(x) = 1/2 at x = acosh(2).
  const double half_point = convention == FwhmConvention::power ? std::acosh(std::numbers::sqrt2) : std::acosh(2.0);
  return 2.0 * half_point / (2.0 * sigma);
}

Signal parse_signal_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("signal json: parse error: ") + e.what());
  }
  try {
    const double t_start = j.at("t_start").get<double>();
    const double dt = j.at("dt").get<double>();
    const auto& arr = j.at("samples");
    if (!arr.is_array()) throw Error("signal json: \"samples\" must be an array");
    std::vector<cplx> q;
    q.reserve(arr.size());
    for (const auto& pair : arr) {
      if (!pair.is_array() || pair.size() != 2) throw Error("signal json: each sample must be [re, im]");
      q.emplace_back(pair[0].get<double>(), pair[1].get<double>());
    }
    return Signal(std::move(q), t_start, dt);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("signal json: ") + e.what());
  }
}

Signal read_signal_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open signal file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_signal_json(buf.str());
}

std::string signal_to_json(const Signal& s) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& q : s.samples()) samples.push_back({q.real(), q.imag()});
  nlohmann::json j{{"t_start", s.t_start()}, {"dt", s.dt()}, {"samples", std::move(samples)}};
  return j.dump();
}

void write_signal_json(const Signal& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write signal file " + path.string());
  out << signal_to_json(s) << '\n';
}

}  // namespace nft
