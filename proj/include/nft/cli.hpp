#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nft/baselines.hpp"

namespace nft::cli {

enum class Method { cs_phase, fc, nr };

const char* to_string(Method m);
Method parse_method(const std::string& name);
/// "cs-phase", "fc", "nr" or "all", comma separated.
std::vector<Method> parse_methods(const std::string& list);

struct PulseSpec {
  enum class Kind { sech, rect, file };
  Kind kind = Kind::sech;
  double amplitude = 1.0;  ///< sech
  double freq_shift = 0.0;
  double t_center = 0.0;
  cplx rect_amplitude{1.0, 0.0};
  double t_on = -1.0;
  double t_off = 1.0;
  std::filesystem::path file;
  std::string name;  ///< label used in batch outputs
};

struct NoiseSpec {
  double snr_db = kNoNoise;
  std::vector<std::uint64_t> seeds;
};

/// Batch description read from --spec. Example:
///   {"pulse": {"type": "sech", "amplitude": 2.2},
///    "noise": {"snr_db": 20, "seeds": [1, 2, 3]},
///    "methods": ["cs-phase", "nr"],
///    "grids": {"time": {"t_start": -20.48, "dt": 0.02, "n": 2048},
///              "frequency": {"omega_min": -40, "omega_max": 40, "n_points": 2048}},
///    "output_dir": "out"}
/// "pulses" may replace "pulse" with a list; an entry can be {"file": "x.json"}.
struct ExperimentSpec {
  std::vector<PulseSpec> pulses;
  std::optional<NoiseSpec> noise;
  std::vector<Method> methods{Method::cs_phase};
  TimeGrid time_grid;
  std::optional<FrequencyGrid> frequency_grid;
  std::filesystem::path output_dir = ".";
  std::optional<std::vector<Eigenvalue>> init;

  void validate() const;
};

ExperimentSpec parse_experiment_spec(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentSpec read_experiment_spec(const std::filesystem::path& path);

/// "1..5" or "1,2,7" (mixed allowed: "1..3,9").
std::vector<std::uint64_t> parse_seed_list(const std::string& text);
/// "omega0:sigma" pairs, comma separated, e.g. "0:1.7,0:0.7".
std::vector<Eigenvalue> parse_eigenvalue_list(const std::string& text);

/// Builds the pulse (with noise if snr_db is finite).
Signal build_pulse(const PulseSpec& p, const TimeGrid& grid, double snr_db = kNoNoise, std::uint64_t seed = 0);

struct DetectOptions {
  std::optional<FrequencyGrid> frequency_grid;
  std::optional<std::vector<Eigenvalue>> init;
  int n_eigenvalues = -1;
  FitConfig fit;
  CollocationConfig collocation;
  std::optional<NewtonConfig> newton;
  int residual_oversample = 2;
};

struct MethodReport {
  Method method = Method::cs_phase;
  std::vector<Eigenvalue> eigenvalues;
  std::vector<double> residuals;  ///< residual_metric per eigenvalue
  int iterations = 0;
  bool converged = false;
  double final_error = 0.0;
  std::vector<double> error_history;
  std::string init_source;  ///< cs-phase: "user" or "phase-slope"
  std::vector<Eigenvalue> init;
  std::string stop_reason;
  std::size_t candidates = 0;  ///< fc: upper-half-plane matrix eigenvalues
  std::size_t seeds = 0;       ///< nr
  std::size_t abandoned = 0;   ///< nr

  double max_residual() const;
};

/// Runs one detector on a signal. Sequential apart from nested defaults.
MethodReport detect(const Signal& s, Method m, const DetectOptions& opts, unsigned threads = 1);

std::string report_to_json(const MethodReport& r);
std::string reports_to_json(const std::vector<MethodReport>& reports);

/// Greatest distance from an eigenvalue of one set to its nearest neighbour in
/// the other, taken both ways; empty when the counts differ.
std::optional<double> eigenvalue_gap(const std::vector<Eigenvalue>& x, const std::vector<Eigenvalue>& y);

/// Entry point behind the `nft` executable. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nft::cli
