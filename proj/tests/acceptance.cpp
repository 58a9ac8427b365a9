// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nft/baselines.hpp"
#include "nft/cli.hpp"
#include "oracles.hpp"

using namespace nft;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kOracleTol = 1e-3;
constexpr double kRatioLo = 3.0;
constexpr double kRatioHi = 5.0;
constexpr double kPulseSeconds = 10.0;
constexpr double kUnitarityTol = 1e-4;
constexpr double kHilbertTol = 1e-2;
constexpr double kCountTol = 0.05;
constexpr double kFitTol = 1e-3;
constexpr int kFitMaxIters = 50;
constexpr double kPhaseResidualTol = 1e-2;
constexpr double kSyntheticTol = 1e-6;
constexpr double kGradientRelTol = 1e-4;
constexpr double kAgreementTol = 1e-2;
constexpr double kResidualFactor = 10.0;
constexpr int kNoiseSeeds = 20;
constexpr int kNoiseMinConverged = 18;
constexpr double kCentroidTol = 0.05;
constexpr double kNoiseSeconds = 300.0;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

TimeGrid fine_grid(const TimeGrid& g) { return {g.t_start, g.dt / 2, g.n * 2}; }

// Max |a - oracle| over the frequency grid.
double oracle_error(const Signal& s, const FrequencyGrid& grid, const std::function<cplx(double)>& a_exact) {
  const auto cs = scatter_grid(s, grid);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.n_points; ++i) worst = std::max(worst, std::abs(cs.a[i] - a_exact(grid.omega(i))));
  return worst;
}

std::vector<cplx> sorted_lambdas(const std::vector<Eigenvalue>& v) {
  std::vector<cplx> out;
  for (const auto& e : v) out.push_back(e.lambda());
  std::sort(out.begin(), out.end(), [](cplx a, cplx b) { return a.imag() != b.imag() ? a.imag() > b.imag() : a.real() < b.real(); });
  return out;
}

// Largest nearest-neighbour distance, both ways; infinite when the counts differ.
double set_distance(const std::vector<cplx>& x, const std::vector<cplx>& y) {
  if (x.size() != y.size()) return INFINITY;
  double d = 0.0;
  for (const auto* from : {&x, &y}) {
    const auto& to = from == &x ? y : x;
    for (const cplx a : *from) {
      double best = INFINITY;
      for (const cplx b : to) best = std::min(best, std::abs(a - b));
      d = std::max(d, best);
    }
  }
  return d;
}

std::vector<Eigenvalue> values_of(const std::vector<DetectedEigenvalue>& v) {
  std::vector<Eigenvalue> out;
  for (const auto& d : v) out.push_back(d.value);
  return out;
}

double max_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

Outcome criterion1() {
  struct Case {
    std::string name;
    std::function<Signal(const TimeGrid&)> make;
    std::function<cplx(double)> exact;
  };
  std::vector<Case> cases;
  for (double A : {0.25, 1.3, 2.2})
    cases.push_back({"sech(" + fmt("%g", A) + ")", [A](const TimeGrid& g) { return gen_sech(A, 0, 0, g); },
                     [A](double w) { return oracle::sech_a(A, w); }});
  cases.push_back({"rect(1,[-1,1))", [](const TimeGrid& g) { return gen_rect(1.0, -1.0, 1.0, g); },
                   [](double w) { return oracle::rect(1.0, -1.0, 1.0, w).a; }});

  bool pass = true;
  std::string detail;
  const TimeGrid base;
  for (const auto& c : cases) {
    const auto t0 = std::chrono::steady_clock::now();
    const Signal coarse = c.make(base);
    const FrequencyGrid grid = FrequencyGrid::default_for(coarse);
    const double e1 = oracle_error(coarse, grid, c.exact);
    const double e2 = oracle_error(c.make(fine_grid(base)), grid, c.exact);
    const double secs = seconds_since(t0);
    const double ratio = e1 / e2;
    const bool ok = e1 <= kOracleTol && ratio >= kRatioLo && ratio <= kRatioHi && secs < kPulseSeconds;
    pass = pass && ok;
    detail += " " + c.name + ": err=" + fmt("%.2e", e1) + " ratio=" + fmt("%.2f", ratio) + " t=" + fmt("%.2fs", secs) + ";";
  }
  return {pass, detail};
}

Outcome criterion2() {
  std::vector<std::pair<std::string, Signal>> pulses;
  for (double A : {0.25, 1.3, 2.2, 3.4}) pulses.emplace_back("sech(" + fmt("%g", A) + ")", gen_sech(A, 0, 0));
  pulses.emplace_back("sech(2.2,xi=1)", gen_sech(2.2, 1.0, 0));
  pulses.emplace_back("rect(1)", gen_rect(1.0, -1.0, 1.0));
  pulses.emplace_back("rect(2)", gen_rect(cplx(0.0, 2.0), -1.0, 1.0));
  const TimeGrid wide{-40.96, 0.02, 4096};
  const std::vector<Signal> pair{gen_sech(1.0, 5.0, -10.0, wide), gen_sech(1.0, -5.0, 10.0, wide)};
  pulses.emplace_back("two-solitons", superpose(pair));
  pulses.emplace_back("sech(2.2)+20dB", add_awgn(gen_sech(2.2, 0, 0), 20.0, 7));
  double worst = 0.0;
  std::string who;
  for (const auto& [name, s] : pulses) {
    const double d = scatter_grid(s, FrequencyGrid::default_for(s)).unitarity_defect();
    if (d > worst) {
      worst = d;
      who = name;
    }
  }
  return {worst <= kUnitarityTol, " max defect " + fmt("%.2e", worst) + " (" + who + ") over " + std::to_string(pulses.size()) + " pulses"};
}

Outcome criterion3() {
  const Signal s = gen_sech(0.25, 0, 0);
  const auto cs = scatter_grid(s, FrequencyGrid::default_for(s));
  const auto A = reconstruct_A(cs);
  const std::size_t n = cs.a.size();
  double mag = 0.0, ph = 0.0;
  for (std::size_t i = n / 4; i < 3 * n / 4; ++i) {
    mag = std::max(mag, std::abs(std::abs(cs.a[i]) - std::abs(A[i])));
    ph = std::max(ph, std::abs(std::arg(cs.a[i] / A[i])));
  }
  return {mag <= kHilbertTol && ph <= kHilbertTol, " magnitude err " + fmt("%.2e", mag) + ", phase err " + fmt("%.2e", ph)};
}

Outcome criterion4() {
  bool pass = true;
  std::string detail;
  for (double A : {0.25, 1.3, 2.2, 3.4}) {
    const Signal s = gen_sech(A, 0, 0);
    const auto c = count_eigenvalues(allpass_phase(scatter_grid(s, {-100.0, 100.0, 4096})));
    const int expected = static_cast<int>(std::floor(A + 0.5));
    const bool ok = c.n == expected && std::abs(c.unrounded - expected) <= kCountTol;
    pass = pass && ok;
    detail += " A=" + fmt("%g", A) + ": " + std::to_string(c.n) + " (" + fmt("%.4f", c.unrounded) + ");";
  }
  return {pass, detail};
}

Outcome criterion5() {
  const Signal s = gen_sech(2.2, 0, 0);
  const auto theta = allpass_phase(scatter_grid(s, FrequencyGrid::default_for(s)));
  const FitConfig cfg;
  const auto st = fit(theta, cfg);
  const double err = set_distance(sorted_lambdas(st.estimates), {cplx(0, 1.7), cplx(0, 0.7)});
  const auto weight = cfg.weight.evaluate(theta.grid);
  double res = 0.0;
  for (std::size_t i = 0; i < weight.size(); ++i)
    if (weight[i] > 0.0) res = std::max(res, std::abs(st.residual_profile[i]));
  const bool pass = err <= kFitTol && st.converged && st.iteration <= kFitMaxIters && res <= kPhaseResidualTol;
  return {pass, " eigen err " + fmt("%.2e", err) + ", iterations " + std::to_string(st.iteration) +
                    ", converged " + (st.converged ? "yes" : "no") + ", max |theta_hat - theta| " + fmt("%.2e", res)};
}

const std::vector<Eigenvalue> kLayout{{-30.0, 1.0}, {-10.0, 1.0}, {10.0, 1.0}, {30.0, 1.0}};

PhaseProfile synthetic_phase() {
  PhaseProfile p;
  p.grid = {-60.0, 60.0, 4096};
  p.theta = model_phase(kLayout, p.grid);
  p.g_magnitude.assign(p.grid.n_points, 1.0);
  p.unreliable.assign(p.grid.n_points, false);
  return p;
}

Outcome criterion6() {
  const auto theta = synthetic_phase();
  std::vector<Eigenvalue> init;
  const double signs[4][2] = {{0.3, 0.3}, {-0.3, 0.3}, {0.3, -0.3}, {-0.3, -0.3}};
  for (std::size_t k = 0; k < kLayout.size(); ++k)
    init.push_back({kLayout[k].omega0 + signs[k][0], kLayout[k].sigma + signs[k][1]});
  const auto st = fit(theta, FitConfig{}, init);
  const double err = set_distance(sorted_lambdas(st.estimates), sorted_lambdas(kLayout));
  return {err <= kSyntheticTol, " max eigen err " + fmt("%.2e", err) + " after " + std::to_string(st.iteration) + " iterations"};
}

Outcome criterion7() {
  std::vector<std::pair<std::string, PhaseProfile>> profiles;
  for (double A : {1.3, 2.2}) {
    const Signal s = gen_sech(A, 0, 0);
    profiles.emplace_back("sech(" + fmt("%g", A) + ")", allpass_phase(scatter_grid(s, FrequencyGrid::default_for(s))));
  }
  profiles.emplace_back("synthetic", synthetic_phase());
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> shift(-2.0, 2.0), width(0.3, 2.5);
  const FitConfig cfg;
  double worst = 0.0;
  for (const auto& [name, theta] : profiles) {
    const int n = std::max(1, count_eigenvalues(theta).n);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<Eigenvalue> x;
      for (int k = 0; k < n; ++k) x.push_back({shift(rng) + (name == "synthetic" ? kLayout[k].omega0 : 0.0), width(rng)});
      const auto dirs = update_directions(theta, x, cfg);
      for (std::size_t k = 0; k < x.size(); ++k) {
        for (int comp = 0; comp < 2; ++comp) {
          const double h = 1e-6;
          auto plus = x, minus = x;
          (comp == 0 ? plus[k].omega0 : plus[k].sigma) += h;
          (comp == 0 ? minus[k].omega0 : minus[k].sigma) -= h;
          const double fd = (fit_error(theta, plus, cfg) - fit_error(theta, minus, cfg)) / (2 * h);
          const double analytic = -4.0 * (comp == 0 ? dirs[k].d_omega : dirs[k].d_sigma);
          worst = std::max(worst, std::abs(analytic - fd) / std::abs(fd));
        }
      }
    }
  }
  return {worst <= kGradientRelTol, " max relative gap " + fmt("%.2e", worst) + " over 3 profiles x 10 points"};
}

Outcome criterion8() {
  struct Case {
    std::string name;
    Signal s;
  };
  std::vector<Case> cases{{"sech(1.3)", gen_sech(1.3, 0, 0)},
                          {"sech(2.2)", gen_sech(2.2, 0, 0)},
                          {"sech(2.2,xi=1)", gen_sech(2.2, 1.0, 0)},
                          {"rect(2,T=2)", gen_rect(2.0, -1.0, 1.0)}};
  bool pass = true;
  std::string detail;
  for (const auto& c : cases) {
    const auto grid = FrequencyGrid::default_for(c.s);
    const auto cs_fit = fit(allpass_phase(scatter_grid(c.s, grid)));
    const auto fc = values_of(fourier_collocation(c.s).eigenvalues);
    const auto nr = values_of(newton_raphson(c.s, NewtonConfig::covering(grid, 3.0)).eigenvalues);
    const auto l_cs = sorted_lambdas(cs_fit.estimates), l_fc = sorted_lambdas(fc), l_nr = sorted_lambdas(nr);
    const double gap = std::max({set_distance(l_cs, l_fc), set_distance(l_cs, l_nr), set_distance(l_fc, l_nr)});
    const double r_cs = max_of(residual_metric(c.s, cs_fit.estimates));
    const double r_fc = max_of(residual_metric(c.s, fc));
    const double r_nr = max_of(residual_metric(c.s, nr));
    const bool ok = !l_cs.empty() && gap <= kAgreementTol && r_nr <= r_fc && r_cs <= kResidualFactor * r_nr;
    pass = pass && ok;
    detail += " " + c.name + ": gap " + fmt("%.1e", gap) + " res cs/fc/nr " + fmt("%.2e", r_cs) + "/" + fmt("%.2e", r_fc) +
              "/" + fmt("%.2e", r_nr) + ";";
  }
  return {pass, detail};
}

Outcome criterion9() {
  const auto t0 = std::chrono::steady_clock::now();
  const Signal clean = gen_sech(2.2, 0, 0);
  const auto grid = FrequencyGrid::default_for(clean);
  int converged = 0;
  std::vector<cplx> sum(2, 0.0);
  int counted = 0;
  for (int seed = 1; seed <= kNoiseSeeds; ++seed) {
    const auto st = fit(allpass_phase(scatter_grid(add_awgn(clean, 20.0, seed), grid)));
    if (!st.converged) continue;
    ++converged;
    const auto l = sorted_lambdas(st.estimates);
    if (l.size() != 2) continue;
    sum[0] += l[0];
    sum[1] += l[1];
    ++counted;
  }
  const double secs = seconds_since(t0);
  double off = INFINITY;
  if (counted > 0) off = set_distance({sum[0] / double(counted), sum[1] / double(counted)}, {cplx(0, 1.7), cplx(0, 0.7)});
  const bool pass = converged >= kNoiseMinConverged && off <= kCentroidTol && secs < kNoiseSeconds;
  return {pass, " converged " + std::to_string(converged) + "/" + std::to_string(kNoiseSeeds) + ", centroid offset " +
                    fmt("%.2e", off) + ", runtime " + fmt("%.1fs", secs)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion10() {
  const fs::path dir = fs::temp_directory_path() / "nft_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path spec = dir / "spec.json";
  std::ofstream(spec) << R"({"pulses": [{"type": "sech", "amplitude": 2.2, "name": "s22"},
                {"type": "rect", "amplitude": 2, "t_on": -1, "t_off": 1, "name": "r2"}],
     "noise": {"snr_db": 25, "seeds": [1, 2]},
     "methods": ["cs-phase", "fc", "nr"]})";
  std::ostringstream out, err;
  const int rc1 = cli::run({"compare", "--spec", spec.string(), "--output-dir", (dir / "run1").string()}, out, err);
  const int rc2 = cli::run({"compare", "--spec", spec.string(), "--output-dir", (dir / "run2").string(), "--threads", "2"}, out, err);
  const std::string a = slurp(dir / "run1" / "comparison.csv"), b = slurp(dir / "run2" / "comparison.csv");
  const bool same = !a.empty() && a == b && slurp(dir / "run1" / "summary.json") == slurp(dir / "run2" / "summary.json");
  return {rc1 == 0 && rc2 == 0 && same, std::string(" exit codes ") + std::to_string(rc1) + "/" + std::to_string(rc2) +
                                            ", comparison.csv " + std::to_string(a.size()) + " bytes, identical " +
                                            (same ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"oracle exactness and second-order convergence", criterion1},
      {"unitarity", criterion2},
      {"a = A[b] on an eigenvalue-free pulse", criterion3},
      {"eigenvalue count from the phase rise", criterion4},
      {"cs-phase recovery on sech(2.2)", criterion5},
      {"optimizer exactness on a synthetic phase", criterion6},
      {"gradient matches finite differences", criterion7},
      {"three-method agreement and residual ordering", criterion8},
      {"noise robustness at 20 dB", criterion9},
      {"compare output is deterministic", criterion10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o{false, ""};
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string(" exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2zu %s: %s |%s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
