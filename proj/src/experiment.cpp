#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nft/cli.hpp"

namespace nft::cli {

using nlohmann::json;

namespace {

template <class T>
T field(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(where + ": field \"" + key + "\" is missing or has the wrong type");
  }
}

template <class T>
T field_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? field<T>(j, key, where) : fallback;
}

PulseSpec parse_pulse(const json& j, const std::filesystem::path& base_dir, std::size_t index) {
  const std::string where = "pulse[" + std::to_string(index) + "]";
  if (!j.is_object()) throw Error(where + ": must be an object");
  PulseSpec p;
  if (j.contains("file")) {
    p.kind = PulseSpec::Kind::file;
    p.file = field<std::string>(j, "file", where);
    if (p.file.is_relative() && !base_dir.empty()) p.file = base_dir / p.file;
    p.name = field_or<std::string>(j, "name", p.file.stem().string(), where);
    return p;
  }
  const auto type = field_or<std::string>(j, "type", "sech", where);
  if (type == "sech") {
    p.kind = PulseSpec::Kind::sech;
    p.amplitude = field<double>(j, "amplitude", where);
    p.freq_shift = field_or(j, "freq_shift", 0.0, where);
    p.t_center = field_or(j, "t_center", 0.0, where);
  } else if (type == "rect") {
    p.kind = PulseSpec::Kind::rect;
    const auto& amp = j.contains("amplitude") ? j.at("amplitude") : json(1.0);
    if (amp.is_array() && amp.size() == 2 && amp[0].is_number() && amp[1].is_number()) {
      p.rect_amplitude = {amp[0].get<double>(), amp[1].get<double>()};
    } else if (amp.is_number()) {
      p.rect_amplitude = amp.get<double>();
    } else {
      throw Error(where + ": field \"amplitude\" must be a number or [re, im]");
    }
    p.t_on = field<double>(j, "t_on", where);
    p.t_off = field<double>(j, "t_off", where);
  } else {
    throw Error(where + ": field \"type\" must be \"sech\" or \"rect\", got \"" + type + "\"");
  }
  p.name = field_or<std::string>(j, "name", "pulse" + std::to_string(index), where);
  return p;
}

json eigen_json(const std::vector<Eigenvalue>& v) {
  json arr = json::array();
  for (const auto& e : v) arr.push_back({{"omega0", e.omega0}, {"sigma", e.sigma}});
  return arr;
}

void sort_eigenvalues(std::vector<Eigenvalue>& v) {
  std::sort(v.begin(), v.end(), [](const Eigenvalue& a, const Eigenvalue& b) {
    return a.sigma != b.sigma ? a.sigma > b.sigma : a.omega0 < b.omega0;
  });
}

json report_json(const MethodReport& r) {
  json eig = json::array();
  for (std::size_t i = 0; i < r.eigenvalues.size(); ++i) {
    eig.push_back({{"omega0", r.eigenvalues[i].omega0},
                   {"sigma", r.eigenvalues[i].sigma},
                   {"residual_abs_a", r.residuals[i]}});
  }
  json j{{"method", to_string(r.method)},
         {"eigenvalues", std::move(eig)},
         {"max_residual", r.max_residual()},
         {"iterations", r.iterations},
         {"converged", r.converged}};
  switch (r.method) {
    case Method::cs_phase:
      j["final_error"] = r.final_error;
      j["error_history"] = r.error_history;
      j["stop_reason"] = r.stop_reason;
      j["init_source"] = r.init_source;
      j["init"] = eigen_json(r.init);
      break;
    case Method::fc:
      j["candidates"] = r.candidates;
      break;
    case Method::nr:
      j["seeds"] = r.seeds;
      j["abandoned_seeds"] = r.abandoned;
      break;
  }
  return j;
}

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::cs_phase: return "cs-phase";
    case Method::fc: return "fc";
    case Method::nr: return "nr";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "cs-phase") return Method::cs_phase;
  if (name == "fc") return Method::fc;
  if (name == "nr") return Method::nr;
  throw Error("unknown method \"" + name + "\" (expected cs-phase, fc, nr or all)");
}

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "all") {
      for (Method m : {Method::cs_phase, Method::fc, Method::nr})
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
      continue;
    }
    const Method m = parse_method(item);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  if (out.empty()) throw Error("methods: at least one method is required");
  return out;
}

void ExperimentSpec::validate() const {
  if (methods.empty()) throw Error("spec: methods must list at least one method");
  time_grid.validate();
  if (frequency_grid) frequency_grid->validate();
  for (const auto& p : pulses) {
    if (p.kind == PulseSpec::Kind::rect && !(p.t_on < p.t_off))
      throw Error("spec: pulse \"" + p.name + "\": t_off must be greater than t_on");
    if (p.kind == PulseSpec::Kind::sech && !(p.amplitude >= 0.0))
      throw Error("spec: pulse \"" + p.name + "\": amplitude must be >= 0");
  }
}

ExperimentSpec parse_experiment_spec(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("spec: parse error: ") + e.what());
  }
  if (!j.is_object()) throw Error("spec: top level must be an object");
  ExperimentSpec spec;
  if (j.contains("pulse")) spec.pulses.push_back(parse_pulse(j.at("pulse"), base_dir, 0));
  if (j.contains("pulses")) {
    const auto& arr = j.at("pulses");
    if (!arr.is_array()) throw Error("spec: field \"pulses\" must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) spec.pulses.push_back(parse_pulse(arr[i], base_dir, spec.pulses.size()));
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    NoiseSpec noise;
    noise.snr_db = field<double>(n, "snr_db", "spec.noise");
    if (n.contains("seeds")) {
      const auto& s = n.at("seeds");
      if (s.is_string()) {
        noise.seeds = parse_seed_list(s.get<std::string>());
      } else {
        noise.seeds = field<std::vector<std::uint64_t>>(n, "seeds", "spec.noise");
      }
    }
    spec.noise = noise;
  }
  if (j.contains("methods") && j.at("methods").is_string()) {
    spec.methods = parse_methods(j.at("methods").get<std::string>());
  } else if (j.contains("methods")) {
    const auto names = field<std::vector<std::string>>(j, "methods", "spec");
    std::string joined;
    for (const auto& m : names) joined += (joined.empty() ? "" : ",") + m;
    spec.methods = parse_methods(joined);
  }
  if (j.contains("grids")) {
    const auto& g = j.at("grids");
    if (g.contains("time")) {
      const auto& t = g.at("time");
      spec.time_grid.t_start = field_or(t, "t_start", spec.time_grid.t_start, "spec.grids.time");
      spec.time_grid.dt = field_or(t, "dt", spec.time_grid.dt, "spec.grids.time");
      spec.time_grid.n = field_or(t, "n", spec.time_grid.n, "spec.grids.time");
    }
    if (g.contains("frequency")) {
      const auto& f = g.at("frequency");
      FrequencyGrid fg;
      fg.omega_min = field<double>(f, "omega_min", "spec.grids.frequency");
      fg.omega_max = field<double>(f, "omega_max", "spec.grids.frequency");
      fg.n_points = field_or(f, "n_points", fg.n_points, "spec.grids.frequency");
      spec.frequency_grid = fg;
    }
  }
  if (j.contains("output_dir")) {
    spec.output_dir = field<std::string>(j, "output_dir", "spec");
    if (spec.output_dir.is_relative() && !base_dir.empty()) spec.output_dir = base_dir / spec.output_dir;
  }
  if (j.contains("init")) {
    std::vector<Eigenvalue> init;
    for (const auto& e : j.at("init")) {
      if (!e.is_array() || e.size() != 2) throw Error("spec: each \"init\" entry must be [omega0, sigma]");
      init.push_back({e[0].get<double>(), e[1].get<double>()});
    }
    spec.init = init;
  }
  spec.validate();
  return spec;
}

ExperimentSpec read_experiment_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open spec file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_spec(buf.str(), path.parent_path());
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  const auto number = [&](const std::string& s) -> std::uint64_t {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (...) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw Error("seeds: cannot parse \"" + s + "\"");
    return v;
  };
  while (std::getline(ss, item, ',')) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(number(item));
      continue;
    }
    const auto lo = number(item.substr(0, dots));
    const auto hi = number(item.substr(dots + 2));
    if (hi < lo) throw Error("seeds: empty range \"" + item + "\"");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  return out;
}

std::vector<Eigenvalue> parse_eigenvalue_list(const std::string& text) {
  std::vector<Eigenvalue> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw Error("init: expected omega0:sigma, got \"" + item + "\"");
    Eigenvalue e;
    try {
      e = {std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))};
    } catch (...) {
      throw Error("init: cannot parse \"" + item + "\"");
    }
    if (!(e.sigma > 0.0)) throw Error("init: sigma must be > 0 in \"" + item + "\"");
    out.push_back(e);
  }
  return out;
}

Signal build_pulse(const PulseSpec& p, const TimeGrid& grid, double snr_db, std::uint64_t seed) {
  Signal s = [&] {
    switch (p.kind) {
      case PulseSpec::Kind::sech: return gen_sech(p.amplitude, p.freq_shift, p.t_center, grid);
      case PulseSpec::Kind::rect:
        if (!(p.t_on < p.t_off)) throw Error("rect pulse: t_off must be greater than t_on");
        return gen_rect(p.rect_amplitude, p.t_on, p.t_off, grid);
      case PulseSpec::Kind::file: return read_signal_json(p.file);
    }
    throw Error("unknown pulse kind");
  }();
  return std::isfinite(snr_db) ? add_awgn(s, snr_db, seed) : s;
}

double MethodReport::max_residual() const {
  double m = 0.0;
  for (double r : residuals) m = std::max(m, r);
  return m;
}

MethodReport detect(const Signal& s, Method m, const DetectOptions& opts, unsigned threads) {
  MethodReport r;
  r.method = m;
  const FrequencyGrid grid = opts.frequency_grid.value_or(FrequencyGrid::default_for(s));
  switch (m) {
    case Method::cs_phase: {
      const auto cs = scatter_grid(s, grid, threads);
      const auto theta = allpass_phase(cs);
      if (opts.init) {
        r.init = *opts.init;
        r.init_source = "user";
      } else {
        r.init = init_estimates(theta, opts.n_eigenvalues).estimates;
        r.init_source = "phase-slope";
      }
      const auto st = fit(theta, opts.fit, r.init);
      r.eigenvalues = st.estimates;
      r.iterations = st.iteration;
      r.converged = st.converged;
      r.final_error = st.error_history.empty() ? 0.0 : st.error_history.back();
      r.error_history = st.error_history;
      r.stop_reason = to_string(st.stop);
      break;
    }
    case Method::fc: {
      const auto res = fourier_collocation(s, opts.collocation);
      for (const auto& e : res.eigenvalues) r.eigenvalues.push_back(e.value);
      r.candidates = res.candidates.size();
      r.converged = true;
      break;
    }
    case Method::nr: {
      NewtonConfig cfg = opts.newton.value_or(NewtonConfig::covering(grid, std::max(3.0, s.peak() + 0.5)));
      cfg.threads = threads;
      const auto res = newton_raphson(s, cfg);
      for (const auto& e : res.eigenvalues) r.eigenvalues.push_back(e.value);
      r.seeds = res.seeds;
      r.abandoned = res.abandoned;
      r.converged = true;
      break;
    }
  }
  sort_eigenvalues(r.eigenvalues);
  r.residuals = residual_metric(s, r.eigenvalues, opts.residual_oversample);
  return r;
}

std::string report_to_json(const MethodReport& r) { return report_json(r).dump(2); }

std::string reports_to_json(const std::vector<MethodReport>& reports) {
  if (reports.size() == 1) return report_to_json(reports.front());
  json j = json::object();
  for (const auto& r : reports) j[to_string(r.method)] = report_json(r);
  return j.dump(2);
}

std::optional<double> eigenvalue_gap(const std::vector<Eigenvalue>& x, const std::vector<Eigenvalue>& y) {
  if (x.size() != y.size()) return std::nullopt;
  double gap = 0.0;
  const auto one_way = [&](const std::vector<Eigenvalue>& from, const std::vector<Eigenvalue>& to) {
    for (const auto& a : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& b : to) best = std::min(best, std::abs(a.lambda() - b.lambda()));
      gap = std::max(gap, best);
    }
  };
  one_way(x, y);
  one_way(y, x);
  return gap;
}

}  // namespace nft::cli
