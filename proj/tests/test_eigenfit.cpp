#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "nft/eigenfit.hpp"
#include "oracles.hpp"

using namespace nft;
using Catch::Matchers::WithinAbs;

namespace {

Signal unit_soliton() {
  const TimeGrid g;
  std::vector<cplx> q(g.n);
  for (std::size_t i = 0; i < g.n; ++i) q[i] = 2.0 / std::cosh(2.0 * g.time(i));
  return Signal(std::move(q), g);
}

PhaseProfile measured(const Signal& s) { return allpass_phase(scatter_grid(s, FrequencyGrid::default_for(s))); }

PhaseProfile synthetic(const std::vector<Eigenvalue>& eig, const FrequencyGrid& g) {
  PhaseProfile p;
  p.grid = g;
  p.theta = model_phase(eig, g);
  p.g_magnitude.assign(g.n_points, 1.0);
  p.unreliable.assign(g.n_points, false);
  return p;
}

double nearest_gap(const std::vector<Eigenvalue>& got, const std::vector<cplx>& want) {
  if (got.size() != want.size()) return INFINITY;
  double worst = 0.0;
  for (const cplx w : want) {
    double best = INFINITY;
    for (const auto& e : got) best = std::min(best, std::abs(e.lambda() - w));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

TEST_CASE("model phase basics", "[eigenfit]") {
  const FrequencyGrid g{-10.0, 10.0, 201};
  for (double v : model_phase({}, g)) CHECK(v == 0.0);
  const std::vector<Eigenvalue> one{{0.0, 0.8}};
  CHECK(model_phase(one, g)[100] == oracle::kPi);
  CHECK_THROWS_AS(model_phase(std::vector<Eigenvalue>{{0.0, 0.0}}, g), Error);
  CHECK_THROWS_AS(model_phase(std::vector<Eigenvalue>{{0.0, -1.0}}, g), Error);
}

TEST_CASE("model phase is increasing with total rise 2 pi N", "[eigenfit][property]") {
  std::mt19937_64 rng(GENERATE(take(5, random(1, 100000))));
  std::uniform_real_distribution<double> pos(-5.0, 5.0), width(0.2, 2.0);
  std::vector<Eigenvalue> eig(3);
  for (auto& e : eig) e = {pos(rng), width(rng)};
  const FrequencyGrid g{-5000.0, 5000.0, 200001};
  const auto th = model_phase(eig, g);
  for (std::size_t i = 0; i + 1 < th.size(); ++i) REQUIRE(th[i + 1] > th[i]);
  CHECK_THAT(th.back() - th.front(), WithinAbs(6.0 * oracle::kPi, 1e-2));
  for (std::size_t i = 0; i < th.size(); i += 997) CHECK_THAT(th[i], WithinAbs(oracle::blaschke_phase({eig[0].lambda(), eig[1].lambda(), eig[2].lambda()}, g.omega(i)), 1e-12));
}

TEST_CASE("model phase at the sech eigenvalues matches the measured phase", "[eigenfit][oracle]") {
  const auto p = measured(gen_sech(2.2, 0, 0));
  const std::vector<Eigenvalue> eig{{0.0, 1.7}, {0.0, 0.7}};
  const auto th = model_phase(eig, p.grid);
  for (std::size_t i = th.size() / 4; i < 3 * th.size() / 4; ++i) CHECK(std::abs(th[i] - p.theta[i]) <= 1e-2);
}

TEST_CASE("fit error", "[eigenfit]") {
  const FitConfig cfg;
  const auto p = measured(gen_sech(2.2, 0, 0));
  CHECK(fit_error(p, std::vector<Eigenvalue>{{0.0, 1.7}, {0.0, 0.7}}, cfg) <= 1e-3);

  const std::vector<Eigenvalue> truth{{0.5, 1.0}};
  const auto syn = synthetic(truth, FrequencyGrid{-20.0, 20.0, 801});
  CHECK(fit_error(syn, truth, cfg) == 0.0);
  double prev = 0.0;
  for (double d : {1e-3, 1e-2, 5e-2, 1e-1, 2e-1}) {
    const double e_plus = fit_error(syn, std::vector<Eigenvalue>{{0.5 + d, 1.0}}, cfg);
    const double e_minus = fit_error(syn, std::vector<Eigenvalue>{{0.5 - d, 1.0}}, cfg);
    CHECK(e_plus > prev);
    CHECK(e_minus > prev);
    prev = std::min(e_plus, e_minus);
  }
}

TEST_CASE("weight function", "[eigenfit]") {
  const FrequencyGrid g{-10.0, 10.0, 101};
  const auto c = Weight{}.evaluate(g);
  CHECK(c.front() == 0.0);
  CHECK(c[50] == 1.0);
  CHECK(c.back() == 0.0);
  const auto support = std::count(c.begin(), c.end(), 1.0);
  CHECK(std::abs(support - 91) <= 2);
  Weight explicit_w;
  explicit_w.samples = std::vector<double>(101, 2.0);
  CHECK(explicit_w.evaluate(g)[0] == 2.0);
  explicit_w.samples = std::vector<double>(5, 1.0);
  CHECK_THROWS_AS(explicit_w.evaluate(g), Error);
}

TEST_CASE("config validation", "[eigenfit]") {
  FitConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.step0 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.tol_error = 2.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.sigma_floor = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("update directions equal the finite-difference gradient", "[eigenfit][property]") {
  const FitConfig cfg;
  const auto p = measured(gen_sech(1.3, 0, 0));
  std::mt19937_64 rng(GENERATE(take(5, random(1, 100000))));
  std::uniform_real_distribution<double> pos(-1.5, 1.5), width(0.3, 2.0);
  const std::vector<Eigenvalue> x{{pos(rng), width(rng)}, {pos(rng), width(rng)}};
  const auto d = update_directions(p, x, cfg);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double h = 1e-6;
    auto wp = x, wm = x, sp = x, sm = x;
    wp[k].omega0 += h;
    wm[k].omega0 -= h;
    sp[k].sigma += h;
    sm[k].sigma -= h;
    const double fd_w = (fit_error(p, wp, cfg) - fit_error(p, wm, cfg)) / (2 * h);
    const double fd_s = (fit_error(p, sp, cfg) - fit_error(p, sm, cfg)) / (2 * h);
    CHECK(std::abs(-4.0 * d[k].d_omega - fd_w) <= 1e-4 * std::abs(fd_w));
    CHECK(std::abs(-4.0 * d[k].d_sigma - fd_s) <= 1e-4 * std::abs(fd_s));
  }
}

TEST_CASE("gradient step", "[eigenfit]") {
  const FitConfig cfg;
  const FrequencyGrid g{-40.0, 40.0, 2048};
  const std::vector<Eigenvalue> target{{0.0, 1.0}};
  const auto p = synthetic(target, g);

  SECTION("zero residual leaves the estimates unchanged") {
    const auto st = gradient_step(p, make_state(p, target, cfg), cfg);
    CHECK(st.estimates[0].omega0 == 0.0);
    CHECK(st.estimates[0].sigma == 1.0);
  }
  SECTION("one step from j0.5 decreases the error and moves sigma toward 1") {
    const std::vector<Eigenvalue> init{{0.0, 0.5}};
    const auto d = update_directions(p, init, cfg);
    CHECK(d[0].d_sigma > 0.0);
    const auto s0 = make_state(p, init, cfg);
    const auto s1 = gradient_step(p, s0, cfg);
    CHECK(s1.iteration == 1);
    CHECK(s1.error_history.back() < s0.error_history.back());
    CHECK(s1.estimates[0].sigma > 0.5);
  }
  SECTION("sigma is projected onto the floor") {
    FitConfig c = cfg;
    c.sigma_floor = 0.4;
    const auto s1 = gradient_step(p, make_state(p, {{0.0, 0.2}}, c), c);
    CHECK(s1.estimates[0].sigma >= 0.4);
  }
  SECTION("exhausted backtracking is reported") {
    FitConfig c = cfg;
    c.step0 = 1e6;
    c.max_halvings = 0;
    const auto s1 = gradient_step(p, make_state(p, {{3.0, 0.5}}, c), c);
    CHECK(s1.stop == StopReason::backtracking_exhausted);
    CHECK_FALSE(s1.converged);
    CHECK_FALSE(s1.diagnostic.empty());
  }
}

TEST_CASE("initial estimates", "[eigenfit]") {
  CHECK(init_estimates(measured(gen_sech(0.0, 0, 0))).estimates.empty());

  const auto single = init_estimates(measured(unit_soliton()));
  REQUIRE(single.estimates.size() == 1);
  CHECK(std::abs(single.estimates[0].lambda() - cplx(0, 1)) <= 0.2);
  CHECK_FALSE(single.used_fallback);

  const auto merged = init_estimates(measured(gen_sech(2.2, 0, 0)));
  CHECK(merged.estimates.size() == 2);
  CHECK(merged.peaks_found == 1);
  CHECK(merged.used_fallback);

  const std::vector<Eigenvalue> apart{{-10.0, 0.5}, {10.0, 1.5}};
  const auto two = init_estimates(synthetic(apart, FrequencyGrid{-60, 60, 4096}));
  CHECK(nearest_gap(two.estimates, {cplx(-10, 0.5), cplx(10, 1.5)}) <= 0.05);
  CHECK(init_estimates(synthetic(apart, FrequencyGrid{-60, 60, 4096}), 0).estimates.empty());
}

TEST_CASE("fit recovers oracle eigenvalues", "[eigenfit][oracle]") {
  SECTION("single soliton j1") {
    const auto st = fit(measured(unit_soliton()));
    CHECK(st.converged);
    CHECK(st.iteration <= 50);
    CHECK(nearest_gap(st.estimates, {cplx(0, 1)}) <= 1e-3);
  }
  SECTION("sech(2.2)") {
    const FitConfig cfg;
    const auto p = measured(gen_sech(2.2, 0, 0));
    const auto st = fit(p, cfg);
    CHECK(st.converged);
    CHECK(nearest_gap(st.estimates, {cplx(0, 1.7), cplx(0, 0.7)}) <= 1e-3);
    const auto c = cfg.weight.evaluate(p.grid);
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c[i] > 0.0) CHECK(std::abs(st.residual_profile[i]) <= 1e-2);
    for (std::size_t i = 0; i + 1 < st.error_history.size(); ++i) CHECK(st.error_history[i + 1] <= st.error_history[i]);
  }
  SECTION("frequency-shifted pair of solitons") {
    const TimeGrid wide{-40.96, 0.02, 4096};
    const std::vector<Signal> parts{gen_sech(1.0, 5.0, -10.0, wide), gen_sech(1.0, -5.0, 10.0, wide)};
    const Signal s = superpose(parts);
    const auto st = fit(allpass_phase(scatter_grid(s, FrequencyGrid::default_for(s))));
    // Targets from the scattering solver itself: Newton on a(lambda) near the analytic guess.
    std::vector<cplx> target;
    for (cplx lam : {cplx(5.0, 0.5), cplx(-5.0, 0.5)}) {
      for (int it = 0; it < 30; ++it) {
        const auto jp = scatter_with_derivative(s, lam);
        lam -= jp.a / *jp.a_prime;
      }
      target.push_back(lam);
    }
    CHECK(nearest_gap(st.estimates, target) <= 1e-2);
  }
}

TEST_CASE("fit properties on synthetic phases", "[eigenfit][property]") {
  const FrequencyGrid g{-60.0, 60.0, 4096};
  const std::vector<Eigenvalue> truth{{-30.0, 1.0}, {-10.0, 1.0}, {10.0, 1.0}, {30.0, 1.0}};
  const auto p = synthetic(truth, g);
  std::mt19937_64 rng(GENERATE(take(3, random(1, 100000))));
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  std::vector<Eigenvalue> init;
  for (const auto& e : truth) init.push_back({e.omega0 + jitter(rng), e.sigma + jitter(rng)});
  const auto st = fit(p, FitConfig{}, init);
  std::vector<cplx> want;
  for (const auto& e : truth) want.push_back(e.lambda());
  CHECK(nearest_gap(st.estimates, want) <= 1e-6);
  for (std::size_t i = 0; i + 1 < st.error_history.size(); ++i) CHECK(st.error_history[i + 1] <= st.error_history[i]);

  SECTION("initializer order does not change the result") {
    auto reversed = init;
    std::reverse(reversed.begin(), reversed.end());
    const auto other = fit(p, FitConfig{}, reversed);
    std::vector<cplx> got;
    for (const auto& e : st.estimates) got.push_back(e.lambda());
    CHECK(nearest_gap(other.estimates, got) <= 1e-6);
  }
}

TEST_CASE("fit stopping reports", "[eigenfit]") {
  const auto p = measured(gen_sech(2.2, 0, 0));
  FitConfig cfg;
  cfg.max_iters = 2;
  const auto st = fit(p, cfg);
  CHECK_FALSE(st.converged);
  CHECK(st.stop == StopReason::max_iterations);
  CHECK(st.iteration == 2);
  CHECK(st.error_history.size() == 3);

  const auto none = fit(measured(gen_sech(0.25, 0, 0)));
  CHECK(none.estimates.empty());
  CHECK(none.stop == StopReason::no_eigenvalues);
  CHECK(std::string(to_string(StopReason::step_tolerance)) == "step_tolerance");
}

TEST_CASE("fixed step rule still descends", "[eigenfit]") {
  FitConfig cfg;
  cfg.step_rule = StepRule::fixed;
  cfg.max_iters = 2000;
  const auto p = synthetic({{0.0, 1.0}}, FrequencyGrid{-40.0, 40.0, 2048});
  const auto st = fit(p, cfg, std::vector<Eigenvalue>{{0.2, 0.7}});
  CHECK(nearest_gap(st.estimates, {cplx(0, 1)}) <= 1e-4);
  for (std::size_t i = 0; i + 1 < st.error_history.size(); ++i) CHECK(st.error_history[i + 1] <= st.error_history[i]);
}
