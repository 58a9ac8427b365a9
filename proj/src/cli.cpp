#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "csv.hpp"
#include "nft/cli.hpp"
#include "nft/parallel.hpp"

namespace nft::cli {

namespace {

namespace fs = std::filesystem;

struct GridFlags {
  std::optional<double> omega_min;
  std::optional<double> omega_max;
  std::optional<std::size_t> n_points;

  void add(CLI::App* app) {
    app->add_option("--omega-min", omega_min, "Lower edge of the frequency grid");
    app->add_option("--omega-max", omega_max, "Upper edge of the frequency grid");
    app->add_option("--n-points", n_points, "Frequency grid points (default 2048)");
  }

  // Flags win over the spec; otherwise +-pi/(4 dt) around zero.
  FrequencyGrid resolve(const Signal& s, const std::optional<FrequencyGrid>& from_spec) const {
    if (omega_min.has_value() != omega_max.has_value())
      throw Error("--omega-min and --omega-max must be given together");
    FrequencyGrid g = from_spec.value_or(FrequencyGrid::default_for(s));
    if (omega_min) {
      g.omega_min = *omega_min;
      g.omega_max = *omega_max;
    }
    if (n_points) g.n_points = *n_points;
    g.validate();
    return g;
  }
};

struct TimeFlags {
  std::optional<double> t_start;
  std::optional<double> dt;
  std::optional<std::size_t> n;

  void add(CLI::App* app) {
    app->add_option("--t-start", t_start, "First sample time (default -20.48)");
    app->add_option("--dt", dt, "Sample spacing (default 0.02)");
    app->add_option("--n", n, "Number of samples (default 2048)");
  }

  void apply(TimeGrid& g) const {
    if (t_start) g.t_start = *t_start;
    if (dt) g.dt = *dt;
    if (n) g.n = *n;
  }
};

struct NoiseFlags {
  std::optional<double> snr_db;
  std::optional<std::string> seeds;

  void add(CLI::App* app) {
    app->add_option("--snr-db", snr_db, "Add white Gaussian noise at this SNR");
    app->add_option("--seeds", seeds, "Noise seeds, e.g. 1..20 or 3,5,8");
  }

  void apply(ExperimentSpec& spec) const {
    if (!snr_db && !seeds) return;
    NoiseSpec n = spec.noise.value_or(NoiseSpec{});
    if (snr_db) n.snr_db = *snr_db;
    if (seeds) n.seeds = parse_seed_list(*seeds);
    if (n.seeds.empty()) n.seeds.push_back(0);
    spec.noise = n;
  }
};

struct PulseFlags {
  std::optional<std::string> type;
  double amplitude = 1.0;
  double amplitude_im = 0.0;
  double freq_shift = 0.0;
  double t_center = 0.0;
  double t_on = -1.0;
  double t_off = 1.0;
  std::string name = "pulse";

  void add(CLI::App* app) {
    app->add_option("--type", type, "Pulse family")->check(CLI::IsMember({"sech", "rect"}));
    app->add_option("--amplitude", amplitude, "Peak amplitude (real part for rect)")->capture_default_str();
    app->add_option("--amplitude-im", amplitude_im, "Imaginary part of the rect amplitude")->capture_default_str();
    app->add_option("--freq-shift", freq_shift, "sech frequency shift xi")->capture_default_str();
    app->add_option("--t-center", t_center, "sech centre time")->capture_default_str();
    app->add_option("--t-on", t_on, "rect start time")->capture_default_str();
    app->add_option("--t-off", t_off, "rect end time")->capture_default_str();
    app->add_option("--name", name, "Output file stem")->capture_default_str();
  }

  PulseSpec spec() const {
    PulseSpec p;
    p.name = name;
    if (type.value_or("sech") == "rect") {
      p.kind = PulseSpec::Kind::rect;
      p.rect_amplitude = {amplitude, amplitude_im};
      p.t_on = t_on;
      p.t_off = t_off;
    } else {
      p.amplitude = amplitude;
      p.freq_shift = freq_shift;
      p.t_center = t_center;
    }
    return p;
  }
};

struct FitFlags {
  std::optional<std::string> init;
  int n_eigenvalues = -1;
  std::optional<int> max_iters;
  std::optional<double> step0;
  std::optional<std::string> step_rule;
  std::optional<int> n_modes;

  void add(CLI::App* app) {
    app->add_option("--init", init, "Initial eigenvalues for cs-phase, omega0:sigma pairs, e.g. 0:1.7,0:0.7");
    app->add_option("--n-eigenvalues", n_eigenvalues, "Override the eigenvalue count taken from the phase");
    app->add_option("--max-iters", max_iters, "Gradient descent iteration cap (default 500)");
    app->add_option("--step0", step0, "Initial gradient step (default 0.1)");
    app->add_option("--step-rule", step_rule, "Step size rule")->check(CLI::IsMember({"fixed", "bb"}));
    app->add_option("--n-modes", n_modes, "Fourier collocation modes per side (default 64)");
  }

  DetectOptions options(const ExperimentSpec& spec) const {
    DetectOptions o;
    o.init = spec.init;
    if (init) o.init = parse_eigenvalue_list(*init);
    o.n_eigenvalues = n_eigenvalues;
    if (max_iters) o.fit.max_iters = *max_iters;
    if (step0) o.fit.step0 = *step0;
    if (step_rule) o.fit.step_rule = *step_rule == "fixed" ? StepRule::fixed : StepRule::barzilai_borwein;
    if (n_modes) o.collocation.n_modes = *n_modes;
    o.fit.validate();
    o.collocation.validate();
    return o;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

ExperimentSpec load_spec(const std::optional<std::string>& path) {
  return path ? read_experiment_spec(*path) : ExperimentSpec{};
}

// Input signal for spectrum / detect: positional file or the spec's single pulse.
Signal input_signal(const std::optional<std::string>& file, const ExperimentSpec& spec, std::string& stem) {
  if (file) {
    stem = fs::path(*file).stem().string();
    return read_signal_json(*file);
  }
  if (spec.pulses.size() != 1) throw Error("need a signal file or a spec with exactly one pulse");
  stem = spec.pulses.front().name;
  const double snr = spec.noise ? spec.noise->snr_db : kNoNoise;
  const std::uint64_t seed = spec.noise && !spec.noise->seeds.empty() ? spec.noise->seeds.front() : 0;
  return build_pulse(spec.pulses.front(), spec.time_grid, snr, seed);
}

struct BatchItem {
  std::string name;
  PulseSpec pulse;
  double snr_db = kNoNoise;
  std::uint64_t seed = 0;
};

std::vector<BatchItem> expand(const ExperimentSpec& spec) {
  std::vector<BatchItem> items;
  for (const auto& p : spec.pulses) {
    if (spec.noise && std::isfinite(spec.noise->snr_db)) {
      for (auto seed : spec.noise->seeds) items.push_back({p.name + "_seed" + std::to_string(seed), p, spec.noise->snr_db, seed});
    } else {
      items.push_back({p.name, p, kNoNoise, 0});
    }
  }
  return items;
}

std::string eigen_cell(const std::vector<Eigenvalue>& v) {
  std::string s;
  for (const auto& e : v) {
    if (!s.empty()) s += ';';
    s += csv::num(e.omega0) + (e.sigma < 0 ? "" : "+") + csv::num(e.sigma) + "j";
  }
  return s;
}

std::string list_cell(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ";") + csv::num(x);
  return s;
}

nlohmann::json distribution(std::vector<double> v) {
  if (v.empty()) return {{"count", 0}, {"min", nullptr}, {"median", nullptr}, {"max", nullptr}};
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return {{"count", n}, {"min", v.front()}, {"median", median}, {"max", v.back()}};
}

int cmd_generate(const std::optional<std::string>& spec_path, const PulseFlags& pulse, const TimeFlags& time,
                 const NoiseFlags& noise, const std::optional<std::string>& output,
                 const std::optional<std::string>& output_dir, std::ostream& out) {
  ExperimentSpec spec = load_spec(spec_path);
  if (!spec_path || pulse.type) spec.pulses = {pulse.spec()};
  time.apply(spec.time_grid);
  noise.apply(spec);
  if (output_dir) spec.output_dir = *output_dir;
  spec.validate();

  const auto items = expand(spec);
  if (output && items.size() != 1) throw Error("--output needs a single pulse; use --output-dir for batches");
  for (const auto& item : items) {
    const fs::path path = output ? fs::path(*output) : spec.output_dir / (item.name + ".json");
    write_text(path, signal_to_json(build_pulse(item.pulse, spec.time_grid, item.snr_db, item.seed)) + "\n");
    out << path.string() << '\n';
  }
  return 0;
}

int cmd_spectrum(const std::optional<std::string>& spec_path, const std::optional<std::string>& input,
                 const GridFlags& grid_flags, const std::optional<std::string>& spectrum_out,
                 const std::optional<std::string>& phase_out, const std::optional<std::string>& output_dir,
                 unsigned threads, std::ostream& out, std::ostream& err) {
  ExperimentSpec spec = load_spec(spec_path);
  if (output_dir) spec.output_dir = *output_dir;
  std::string stem;
  const Signal s = input_signal(input, spec, stem);
  const FrequencyGrid grid = grid_flags.resolve(s, spec.frequency_grid);
  const auto cs = scatter_grid(s, grid, threads);
  HilbertDiagnostics diag;
  const auto theta = allpass_phase(cs);
  hilbert(magnitude_bounded_log(cs.b).values, {}, &diag);
  const auto count = count_eigenvalues(theta);

  const fs::path spath = spectrum_out ? fs::path(*spectrum_out) : spec.output_dir / (stem + "_spectrum.csv");
  const fs::path ppath = phase_out ? fs::path(*phase_out) : spec.output_dir / (stem + "_phase.csv");
  for (const auto& p : {spath, ppath})
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_spectrum_csv(cs, spath);
  write_phase_csv(theta, ppath);
  out << "spectrum: " << spath.string() << '\n' << "phase: " << ppath.string() << '\n';
  out << "eigenvalue count: " << count.n << " (unrounded " << csv::num(count.unrounded) << ")\n";
  if (count.low_confidence) err << "warning: phase has not flattened at the grid edges; widen the frequency grid\n";
  if (diag.edge_warning) err << "warning: log(1-|b|^2) is not negligible at the grid edges\n";
  if (theta.clamped > 0) err << "warning: " << theta.clamped << " points with |b| >= 1 were clamped\n";
  return 0;
}

int cmd_detect(const std::optional<std::string>& spec_path, const std::optional<std::string>& input,
               const std::optional<std::string>& methods, const GridFlags& grid_flags, const FitFlags& fit_flags,
               const std::optional<std::string>& output, const std::optional<std::string>& output_dir,
               unsigned threads, std::ostream& out) {
  ExperimentSpec spec = load_spec(spec_path);
  if (output_dir) spec.output_dir = *output_dir;
  if (methods) spec.methods = parse_methods(*methods);
  std::string stem;
  const Signal s = input_signal(input, spec, stem);
  DetectOptions opts = fit_flags.options(spec);
  opts.frequency_grid = grid_flags.resolve(s, spec.frequency_grid);

  std::vector<MethodReport> reports;
  for (Method m : spec.methods) reports.push_back(detect(s, m, opts, threads));
  const fs::path path = output ? fs::path(*output) : spec.output_dir / (stem + "_report.json");
  write_text(path, reports_to_json(reports) + "\n");
  for (const auto& r : reports) {
    out << to_string(r.method) << ": " << r.eigenvalues.size() << " eigenvalue(s)";
    if (r.method == Method::cs_phase) out << ", " << r.iterations << " iterations, converged=" << r.converged;
    out << '\n';
  }
  out << "report: " << path.string() << '\n';
  return 0;
}

int cmd_compare(const std::optional<std::string>& spec_path, const std::vector<std::string>& files,
                const std::optional<std::string>& methods, const GridFlags& grid_flags, const FitFlags& fit_flags,
                const TimeFlags& time, const NoiseFlags& noise, const std::optional<std::string>& output_dir,
                unsigned threads, std::ostream& out, std::ostream& err) {
  ExperimentSpec spec = load_spec(spec_path);
  if (output_dir) spec.output_dir = *output_dir;
  if (methods) spec.methods = parse_methods(*methods);
  time.apply(spec.time_grid);
  for (const auto& f : files) {
    PulseSpec p;
    p.kind = PulseSpec::Kind::file;
    p.file = f;
    p.name = fs::path(f).stem().string();
    spec.pulses.push_back(p);
  }
  noise.apply(spec);
  spec.validate();
  const DetectOptions base = fit_flags.options(spec);
  const auto items = expand(spec);
  const std::size_t n_methods = spec.methods.size();

  struct Cell {
    std::optional<MethodReport> report;
    std::string failure;
    double seconds = 0.0;
  };
  std::vector<Cell> cells(items.size() * n_methods);
  parallel_for(items.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      std::optional<Signal> s;
      std::string load_failure;
      try {
        s = build_pulse(items[i].pulse, spec.time_grid, items[i].snr_db, items[i].seed);
      } catch (const std::exception& e) {
        load_failure = e.what();
      }
      for (std::size_t m = 0; m < n_methods; ++m) {
        Cell& cell = cells[i * n_methods + m];
        if (!s) {
          cell.failure = load_failure;
          continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        try {
          DetectOptions opts = base;
          opts.frequency_grid = grid_flags.resolve(*s, spec.frequency_grid);
          cell.report = detect(*s, spec.methods[m], opts, 1);
        } catch (const std::exception& e) {
          cell.failure = e.what();
        }
        cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
    }
  });

  std::string table = "pulse,method,n_eigenvalues,eigenvalues,residuals,max_residual,iterations,converged\n";
  std::string timing = "pulse,method,wall_seconds\n";
  std::map<std::string, std::vector<double>> max_res;
  std::map<std::string, int> converged;
  std::vector<std::string> failed;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t m = 0; m < n_methods; ++m) {
      const Cell& c = cells[i * n_methods + m];
      const std::string method = to_string(spec.methods[m]);
      if (!c.report) {
        err << "failed: " << items[i].name << " [" << method << "]: " << c.failure << '\n';
        if (failed.empty() || failed.back() != items[i].name) failed.push_back(items[i].name);
        continue;
      }
      const auto& r = *c.report;
      table += items[i].name + ',' + method + ',' + std::to_string(r.eigenvalues.size()) + ',' +
               eigen_cell(r.eigenvalues) + ',' + list_cell(r.residuals) + ',' + csv::num(r.max_residual()) + ',' +
               std::to_string(r.iterations) + ',' + (r.converged ? "true" : "false") + '\n';
      timing += items[i].name + ',' + method + ',' + csv::num(c.seconds) + '\n';
      max_res[method].push_back(r.max_residual());
      converged[method] += r.converged ? 1 : 0;
    }
  }

  nlohmann::json summary;
  summary["pulses"] = items.size();
  summary["failed"] = failed;
  summary["methods"] = nlohmann::json::object();
  for (Method m : spec.methods) {
    const std::string name = to_string(m);
    summary["methods"][name] = {{"max_residual", distribution(max_res[name])}, {"converged", converged[name]}};
  }
  summary["pairwise_gaps"] = nlohmann::json::object();
  for (std::size_t a = 0; a < n_methods; ++a) {
    for (std::size_t b = a + 1; b < n_methods; ++b) {
      std::vector<double> gaps;
      std::size_t mismatched = 0;
      for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& ra = cells[i * n_methods + a].report;
        const auto& rb = cells[i * n_methods + b].report;
        if (!ra || !rb) continue;
        if (auto g = eigenvalue_gap(ra->eigenvalues, rb->eigenvalues)) {
          gaps.push_back(*g);
        } else {
          ++mismatched;
        }
      }
      auto d = distribution(gaps);
      d["count_mismatch"] = mismatched;
      summary["pairwise_gaps"][std::string(to_string(spec.methods[a])) + "/" + to_string(spec.methods[b])] = d;
    }
  }

  const fs::path dir = spec.output_dir;
  write_text(dir / "comparison.csv", table);
  write_text(dir / "timing.csv", timing);
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  out << "compared " << items.size() << " pulse(s) x " << n_methods << " method(s) into " << dir.string() << '\n';
  if (!failed.empty()) {
    err << failed.size() << " pulse(s) failed\n";
    return 1;
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nonlinear Fourier transform toolkit: scattering data, phase-based eigenvalue detection and baselines"};
  app.name("nft");
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = NFT_THREADS or all cores)");

  std::optional<std::string> spec_path, input, output, output_dir, methods, spectrum_out, phase_out;
  std::vector<std::string> files;
  PulseFlags pulse;
  TimeFlags time;
  NoiseFlags noise;
  GridFlags grid;
  FitFlags fitf;

  const auto with_spec = [&](CLI::App* sub) {
    sub->add_option("--spec", spec_path, "Experiment spec JSON")->check(CLI::ExistingFile);
  };

  auto* gen = app.add_subcommand("generate", "Write test pulses as signal JSON");
  with_spec(gen);
  pulse.add(gen);
  time.add(gen);
  noise.add(gen);
  gen->add_option("-o,--output", output, "Output file for a single pulse");
  gen->add_option("--output-dir", output_dir, "Directory for <name>[_seed<k>].json");

  auto* spec_cmd = app.add_subcommand("spectrum", "Continuous spectrum and all-pass phase of a signal");
  with_spec(spec_cmd);
  spec_cmd->add_option("input", input, "Signal JSON")->check(CLI::ExistingFile);
  grid.add(spec_cmd);
  spec_cmd->add_option("--spectrum-out", spectrum_out, "Spectrum CSV (omega, a, b)");
  spec_cmd->add_option("--phase-out", phase_out, "Phase CSV (omega, theta, |G|)");
  spec_cmd->add_option("--output-dir", output_dir, "Directory for default output names");

  auto* det = app.add_subcommand("detect", "Detect discrete eigenvalues");
  with_spec(det);
  det->add_option("input", input, "Signal JSON")->check(CLI::ExistingFile);
  det->add_option("-m,--method", methods, "cs-phase, fc, nr or all (comma separated)");
  grid.add(det);
  fitf.add(det);
  det->add_option("-o,--output", output, "Report JSON");
  det->add_option("--output-dir", output_dir, "Directory for the default report name");

  auto* cmp = app.add_subcommand("compare", "Run detectors over a batch and summarize residuals");
  with_spec(cmp);
  cmp->add_option("files", files, "Signal JSON files")->check(CLI::ExistingFile);
  cmp->add_option("-m,--methods", methods, "cs-phase, fc, nr or all (comma separated)");
  grid.add(cmp);
  fitf.add(cmp);
  time.add(cmp);
  noise.add(cmp);
  cmp->add_option("--output-dir", output_dir, "Directory for comparison.csv, timing.csv and summary.json");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*gen) return cmd_generate(spec_path, pulse, time, noise, output, output_dir, out);
    if (*spec_cmd) return cmd_spectrum(spec_path, input, grid, spectrum_out, phase_out, output_dir, threads, out, err);
    if (*det) return cmd_detect(spec_path, input, methods, grid, fitf, output, output_dir, threads, out);
    if (*cmp) return cmd_compare(spec_path, files, methods, grid, fitf, time, noise, output_dir, threads, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace nft::cli
