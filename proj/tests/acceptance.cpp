// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "qshift/qshift.hpp"

using namespace qshift;
using std::numbers::pi;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

SimulatorBackend single(double delta, QubitReadout r = {1, 1}) {
  NoiseConfig noise = NoiseConfig::ideal(1);
  noise.delta[0] = delta;
  noise.readout.qubits[0] = r;
  return SimulatorBackend(noise);
}

SimulatorBackend pair(double d0, double d1, QubitReadout r0, QubitReadout r1) {
  NoiseConfig noise = NoiseConfig::ideal(2);
  noise.delta = {d0, d1};
  noise.readout.qubits = {r0, r1};
  return SimulatorBackend(noise);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Outcome alpha_law() {
  double worst = 0;
  bool ok = true;
  for (double delta : {0.02, -0.02, 0.05, -0.05, 0.10, -0.10}) {
    auto backend = single(delta);
    SweepSpec spec;
    spec.shots = 0;
    const auto sweep = run_sweep(backend, spec, 1);
    for (std::size_t i = 0; i < sweep.size(); ++i)
      ok = ok && std::abs(sweep.p0_estimates[i] - oracle::repeated_p0(sweep.thetas[i], delta, 1)) < 1e-12;
    const double err = std::abs(shift_fit(sweep).alpha - 2 * delta);
    ok = ok && err <= 5 * std::pow(std::abs(delta), 3);
    worst = std::max(worst, err / (5 * std::pow(std::abs(delta), 3)));
  }
  return {ok, fmt("worst |alpha-2delta| / 5|delta|^3 = %.3f", worst)};
}

Outcome closed_loop() {
  auto backend = single(0.09, {0.9, 0.9});
  int good = 0;
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto cal = calibrate_qubit(backend, 0, 8192, 10, seed);
    MitigationPolicy policy;
    policy.alpha[0] = cal.fits->summary.alpha.mean;
    SweepSpec spec;
    const double resid = shift_fit(run_sweep(backend, spec, derive_seed(seed, 500), &policy)).alpha;
    if (std::abs(resid) <= 0.02) ++good;
    worst = std::max(worst, std::abs(resid));
  }
  return {good >= 9, fmt("%.0f/10 seeds with |alpha_resid| <= 0.02, worst %.4f", good, worst)};
}

Outcome r2_ordering() {
  std::mt19937_64 gen(2718);
  std::uniform_real_distribution<double> d(0.05, 0.15), p(0.8, 0.99);
  std::vector<JobRecord> jobs;
  SweepSpec spec;
  for (int k = 0; k < 100; ++k) {
    const double delta = d(gen);
    const QubitReadout r{p(gen), p(gen)};
    jobs.push_back(run_job(single(delta, r), spec, 1, derive_seed(31, k)));
  }
  const auto s = r2_statistics(jobs);
  const bool ok = s.shift.n == 100 && s.shift.mean >= 0.999 && s.shift.mean > s.ibm.mean && s.ibm.mean > s.ideal.mean;
  return {ok, fmt("mean R2 shift %.5f, ibm %.4f, ideal %.3f", s.shift.mean, s.ibm.mean, s.ideal.mean)};
}

Outcome tsirelson() {
  const auto r = run_chsh(pair(0, 0, {1, 1}, {1, 1}), ChshSpec{}, MitigationPolicy{}, 7);
  return {std::abs(r.c_raw - 2.8284) <= 0.01, fmt("C = %.4f", r.c_raw)};
}

Outcome readout_damping() {
  auto backend = pair(0, 0, {0.9, 0.9}, {0.9, 0.9});
  MitigationPolicy policy;
  policy.readout_mode = ReadoutMode::inversion;
  policy.cal.qubits = {{0.9, 0.9}, {0.9, 0.9}};
  const auto r = run_chsh(backend, ChshSpec{}, policy, 8);
  const bool ok = std::abs(r.c_raw - oracle::damped_chsh(0.9)) <= 0.02 && std::abs(r.c_raw - 1.8102) <= 0.02 &&
                  std::abs(r.c_mitigated - 2.8284) <= 0.02;
  return {ok, fmt("C_raw = %.4f (expected %.4f), C_inv = %.4f", r.c_raw, oracle::damped_chsh(0.9), r.c_mitigated)};
}

Outcome chsh_alpha() {
  auto backend = pair(0.025, -0.035, {0.97, 0.94}, {0.96, 0.93});
  int better = 0;
  double alpha0 = 0, alpha1 = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    MitigationPolicy policy;
    for (int q : {0, 1})
      policy.alpha[q] = calibrate_qubit(backend, q, 8192, 10, derive_seed(seed, 100 + q)).fits->summary.alpha.mean;
    alpha0 += policy.alpha[0] / 10;
    alpha1 += policy.alpha[1] / 10;
    const auto r = run_chsh(backend, ChshSpec{}, policy, seed);
    if (r.c_mitigated > r.c_raw) ++better;
  }
  return {better >= 9, fmt("%.0f/10 seeds with C_corr > C_raw, mean alpha (%.3f, %.3f)", better, alpha0, alpha1)};
}

std::vector<double> random_probs(std::mt19937_64& gen, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(n);
  double s = 0;
  for (auto& x : v) s += (x = e(gen));
  for (auto& x : v) x /= s;
  return v;
}

Outcome readout_oracles() {
  std::mt19937_64 gen(404);
  std::uniform_real_distribution<double> p(0.6, 1.0);
  double worst_inv = 0;
  for (int k = 0; k < 100; ++k) {
    ReadoutCal cal;
    for (int q = 0; q < 1 + k % 3; ++q) cal.qubits.push_back({p(gen), p(gen)});
    const auto truth = random_probs(gen, cal.dim());
    const auto back = mitigate_readout_inversion(cal, apply_readout(cal, truth));
    for (std::size_t i = 0; i < truth.size(); ++i) worst_inv = std::max(worst_inv, std::abs(back[i] - truth[i]));
  }

  std::uniform_real_distribution<double> q(0.75, 0.99);
  int beaten = 0;
  for (int k = 0; k < 100; ++k) {
    const ReadoutCal cal{{{q(gen), q(gen)}, {q(gen), q(gen)}}};
    std::vector<double> counts(4, 0.0);
    counts[k % 4] = 900 + k;
    counts[(k + 1) % 4] = 3 + k % 7;
    const auto v = mitigate_readout_bounded(cal, std::span<const double>(counts));
    const auto c = clipped_inversion(cal, std::span<const double>(counts));
    const double total = counts[0] + counts[1] + counts[2] + counts[3];
    std::vector<double> target(4), vn(4), cn(4);
    bool feasible = true;
    for (std::size_t i = 0; i < 4; ++i) {
      target[i] = counts[i] / total;
      vn[i] = v[i] / total;
      cn[i] = c[i] / total;
      feasible = feasible && v[i] >= 0;
    }
    if (feasible && readout_residual(cal, vn, target) <= readout_residual(cal, cn, target) + 1e-12) ++beaten;
  }

  std::uniform_real_distribution<double> r(0.8, 0.98);
  double worst_grid = 0;
  for (int k = 0; k < 4; ++k) {
    const ReadoutCal cal{{{r(gen), r(gen)}, {r(gen), r(gen)}}};
    auto target = random_probs(gen, 4);
    // push one entry toward zero so the constrained optimum sits on a face
    target[k] *= 0.02;
    double s = 0;
    for (double x : target) s += x;
    for (double& x : target) x /= s;
    const auto v = mitigate_readout_bounded(cal, std::span<const double>(target));
    const auto m = cal.matrix();
    std::array<double, 16> dense{};
    std::copy(m.data.begin(), m.data.end(), dense.begin());
    const auto grid = oracle::simplex_grid_search(dense, {target[0], target[1], target[2], target[3]});
    for (std::size_t i = 0; i < 4; ++i) worst_grid = std::max(worst_grid, std::abs(v[i] - grid[i]));
  }
  const bool ok = worst_inv <= 1e-9 && beaten == 100 && worst_grid <= 2e-3;
  return {ok, fmt("inversion err %.2e, bounded <= clipped in %.0f/100, grid err %.2e", worst_inv, beaten, worst_grid)};
}

SweepRecord synthetic(double alpha, double p0, double p1) {
  SweepRecord s;
  s.thetas = theta_grid(31);
  for (double t : s.thetas) {
    const double c = std::cos((t + alpha) / 2), sn = std::sin((t + alpha) / 2);
    s.p0_estimates.push_back(p0 * c * c + (1 - p1) * sn * sn);
  }
  return s;
}

Outcome fit_recovery() {
  std::mt19937_64 gen(88);
  std::uniform_real_distribution<double> a(-0.4, 0.4), p(0.7, 1.0);
  double worst = 0;
  for (int k = 0; k < 50; ++k) {
    const double alpha = a(gen), p0 = p(gen), p1 = p(gen);
    const auto f = shift_fit(synthetic(alpha, p0, p1));
    worst = std::max({worst, std::abs(f.alpha - alpha), std::abs(f.p0 - p0), std::abs(f.p1 - p1)});
  }
  int inside = 0;
  const int trials = 100;
  for (int k = 0; k < trials; ++k) {
    const double alpha = a(gen), p0 = p(gen), p1 = p(gen);
    SweepRecord s = synthetic(alpha, p0, p1);
    s.shots = 8192;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::vector<double> probs = {s.p0_estimates[i], 1 - s.p0_estimates[i]};
      s.p0_estimates[i] = double(sample_counts(probs, 8192, derive_seed(900 + k, i))[0]) / 8192.0;
    }
    const auto f = shift_fit(s);
    const auto se = oracle::shift_fit_standard_errors(s.thetas, alpha, p0, p1, 8192);
    if (std::abs(f.alpha - alpha) <= 3 * se[0] && std::abs(f.p0 - p0) <= 3 * se[1] && std::abs(f.p1 - p1) <= 3 * se[2])
      ++inside;
  }
  return {worst <= 1e-6 && inside >= 95, fmt("noise-free worst err %.1e, sampled within 3 SE %.0f/100", worst, inside)};
}

Outcome repeated_gate() {
  auto backend = single(0.05);
  SweepSpec spec;
  std::vector<int> ms;
  for (int m = 1; m <= 10; ++m) ms.push_back(m);
  const auto sampled = run_repeated_gate_study(backend, spec, ms, 10, 5);
  spec.shots = 0;
  const auto exact = run_repeated_gate_study(backend, spec, ms, 1, 5);
  const auto grid = theta_grid(31);
  double worst = 0;
  for (std::size_t k = 0; k < ms.size(); ++k) {
    std::vector<double> y;
    for (double t : grid) y.push_back(oracle::repeated_p0(t, 0.05, ms[k]));
    const double ref = oracle::best_alpha(grid, y);
    worst = std::max({worst, std::abs(sampled[k].alpha.mean - ref), std::abs(exact[k].alpha.mean - ref)});
  }
  return {worst <= 0.01, fmt("worst |alpha_M - oracle| = %.4f over M = 1..10", worst)};
}

std::string pipeline(std::uint64_t seed) {
  auto backend = single(0.04, {0.95, 0.92});
  SweepSpec spec;
  spec.shots = 4096;
  std::vector<JobRecord> jobs = {run_job(backend, spec, 4, seed)};
  jobs[0].fits = fit_job(jobs[0]);
  const auto bundle = build_report(jobs);
  const auto chsh = run_chsh(pair(0.02, -0.03, {0.95, 0.95}, {0.95, 0.95}), ChshSpec{81920}, MitigationPolicy{}, seed);
  const std::vector<ChshRow> rows = {{"chsh", "simulator", {0, 1}, chsh.alpha, chsh.c_raw, chsh.c_mitigated,
                                      chsh.sigma_raw, chsh.sigma_mitigated}};
  return job_to_json(jobs[0]).dump(2) + summary_csv(bundle.summary_rows) + r2_csv(bundle.r2_stats) +
         plot_csv(bundle.plot_series) + histogram_csv(histogram(sweep_alphas(jobs), 20)) + chsh_csv(rows);
}

Outcome determinism() {
  const bool same = pipeline(123) == pipeline(123);
  const bool differs = pipeline(123) != pipeline(124);

  NoiseConfig noise = NoiseConfig::ideal(1);
  noise.delta[0] = 0.07;
  noise.readout.qubits[0] = {0.93, 0.91};
  SimulatorBackend sim(noise);
  RecordStore store;
  RecordingBackend rec(sim, store);
  SweepSpec spec;
  const auto live = run_job(rec, spec, 5, 321);
  const auto text = store.to_json().dump();
  ReplayBackend replay(RecordStore::from_json(nlohmann::ordered_json::parse(text)), noise);
  const auto again = run_job(replay, spec, 5, 321);
  const auto a = fit_job(live), b = fit_job(again);
  bool bits = a == b && live.sweeps == again.sweeps;
  for (std::size_t i = 0; i < a.shift.size(); ++i)
    bits = bits && std::memcmp(&a.shift[i].alpha, &b.shift[i].alpha, sizeof(double)) == 0 &&
           std::memcmp(&a.ibm[i].r_squared, &b.ibm[i].r_squared, sizeof(double)) == 0;
  return {same && differs && bits, std::string("re-run identical: ") + (same ? "yes" : "no") +
                                       ", replay fits bit-identical: " + (bits ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"alpha = 2 delta law", alpha_law},
      {"mitigation closes the loop", closed_loop},
      {"R2 ordering shift > ibm > ideal", r2_ordering},
      {"CHSH Tsirelson value", tsirelson},
      {"readout damping and recovery", readout_damping},
      {"alpha mitigation improves CHSH", chsh_alpha},
      {"readout mitigation oracles", readout_oracles},
      {"fit recovery", fit_recovery},
      {"repeated-gate consistency", repeated_gate},
      {"determinism and replay", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("%s criterion %zu: %s (%s) [%.2f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), secs);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
