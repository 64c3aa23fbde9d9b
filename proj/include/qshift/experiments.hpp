#pragma once

// Experiment drivers: meridian sweeps, jobs, repeated-gate and initial-state
// studies, meridian scans, multi-job campaigns and the CHSH benchmark.
//
// Seeds: every unit of work gets derive_seed(parent, index). A job seed
// yields sweep seeds derive_seed(job, s); a sweep seed yields circuit seeds
// derive_seed(sweep, i) for grid point i. Any single sweep or circuit can be
// reproduced from its own seed.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qshift/backend.hpp"
#include "qshift/core.hpp"
#include "qshift/error.hpp"
#include "qshift/fitting.hpp"
#include "qshift/job.hpp"
#include "qshift/mitigation.hpp"
#include "qshift/noise.hpp"

namespace qshift {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return splitmix64(parent ^ splitmix64(index));
}

inline constexpr int kMaxRepeat = 10;
inline constexpr std::array<double, 4> kAllowedPreps = {0.0, std::numbers::pi / 4.0, std::numbers::pi / 2.0,
                                                        3.0 * std::numbers::pi / 4.0};

struct SweepSpec {
  int n_points = kDefaultGridPoints;
  double phi = -std::numbers::pi / 2.0;  // meridian; the gate is U3(θ, φ, −φ)
  std::int64_t shots = 8192;             // 0 = analytic probabilities
  double prep = 0.0;                     // initial Rx(prep) applied before the sweep
  int repeat_m = 1;                      // Rx(θ) split into M gates of θ/M
  int qubit = 0;

  void validate() const {
    if (n_points < 4) throw Error(ErrorKind::invalid_parameter, "a sweep needs at least 4 points");
    if (shots < 0) throw Error(ErrorKind::invalid_parameter, "shots must be >= 0");
    if (repeat_m < 1 || repeat_m > kMaxRepeat)
      throw Error(ErrorKind::invalid_parameter, "repeat_m must lie in [1, " + std::to_string(kMaxRepeat) + "]");
    if (qubit < 0 || qubit >= kMaxQubits) throw Error(ErrorKind::invalid_parameter, "qubit out of range");
    require_finite(phi, "phi");
    bool allowed = false;
    for (double p : kAllowedPreps) allowed = allowed || std::abs(prep - p) < 1e-9;
    if (!allowed) throw Error(ErrorKind::invalid_parameter, "prep must be one of 0, pi/4, pi/2, 3pi/4");
  }
};

/// [ideal Rx(prep)] + M × U3(θ/M, φ, −φ) + measure on `spec.qubit`.
/// The prep is emitted as its error-free physical pulse sequence, so only
/// the swept gates carry off-resonance error.
inline Circuit build_sweep_circuit(const SweepSpec& spec, double theta) {
  Circuit c{spec.qubit + 1, {}};
  if (spec.prep != 0.0)
    for (auto& op : transpile_u3(spec.prep, -std::numbers::pi / 2.0, std::numbers::pi / 2.0, spec.qubit, 0.0))
      c.add(op);
  for (int k = 0; k < spec.repeat_m; ++k) c.add(U3{spec.qubit, theta / spec.repeat_m, spec.phi, -spec.phi});
  c.add(Measure{});
  return c;
}

namespace detail {

/// Estimated true counts after optional readout mitigation.
inline std::vector<double> execute(const Backend& backend, const Circuit& circuit, std::int64_t shots,
                                   std::uint64_t seed, const MitigationPolicy* policy, Counts* raw_out = nullptr) {
  if (shots == 0) {
    auto probs = backend.exact_probabilities(circuit);
    if (!probs) throw Error(ErrorKind::capability_exceeded, backend.capability().id + " has no analytic mode");
    if (policy && policy->readout_mode != ReadoutMode::none) {
      const auto cal = policy->cal.first(circuit.n_qubits);
      return policy->readout_mode == ReadoutMode::inversion ? mitigate_readout_inversion(cal, *probs)
                                                            : mitigate_readout_bounded(cal, *probs);
    }
    return *probs;
  }
  auto counts = backend.run(circuit, shots, seed);
  if (raw_out) *raw_out = counts;
  if (policy) return mitigate_counts(*policy, counts);
  return {counts.begin(), counts.end()};
}

}  // namespace detail

/// One sweep over θ_i = π i/(n−1). With a policy, U3 angles are α-shifted
/// and its readout mode is applied to the counts before estimating P0.
inline SweepRecord run_sweep(const Backend& backend, const SweepSpec& spec, std::uint64_t seed,
                             const MitigationPolicy* policy = nullptr) {
  spec.validate();
  if (policy) policy->validate();
  SweepRecord sweep;
  sweep.thetas = theta_grid(spec.n_points);
  sweep.shots = spec.shots;
  sweep.seed = seed;
  sweep.prep = spec.prep;
  for (std::size_t i = 0; i < sweep.thetas.size(); ++i) {
    Circuit circuit = build_sweep_circuit(spec, sweep.thetas[i]);
    if (policy) circuit = apply_alpha_shift(circuit, *policy);
    Counts raw;
    const auto estimate = detail::execute(backend, circuit, spec.shots, derive_seed(seed, i), policy, &raw);
    double total = 0.0;
    for (double x : estimate) total += x;
    const double p0 = marginal_zero(estimate, spec.qubit) / total;
    sweep.p0_estimates.push_back(std::clamp(p0, 0.0, 1.0));
    if (spec.shots > 0) sweep.counts.push_back(std::move(raw));
  }
  return sweep;
}

struct JobOptions {
  std::string timestamp = "1970-01-01T00:00:00Z";
  const MitigationPolicy* policy = nullptr;
  std::map<std::string, std::string> metadata;
};

namespace detail {

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

/// n_s consecutive sweeps under the backend's fixed noise configuration.
inline JobRecord run_job(const Backend& backend, const SweepSpec& spec, int n_sweeps, std::uint64_t seed,
                         const JobOptions& options = {}) {
  if (n_sweeps < 1) throw Error(ErrorKind::invalid_parameter, "a job needs at least one sweep");
  spec.validate();
  JobRecord job;
  job.backend_id = backend.capability().id;
  job.timestamp = options.timestamp;
  if (auto noise = backend.noise_config()) job.noise_config = *noise;
  job.metadata = options.metadata;
  job.metadata["qubit"] = std::to_string(spec.qubit);
  job.metadata["phi"] = detail::format_double(spec.phi);
  job.metadata["repeat_m"] = std::to_string(spec.repeat_m);
  job.metadata["prep"] = detail::format_double(spec.prep);
  job.metadata["seed"] = std::to_string(seed);
  if (options.policy) {
    const auto it = options.policy->alpha.find(spec.qubit);
    if (it != options.policy->alpha.end()) job.metadata["mitigation_alpha"] = detail::format_double(it->second);
    job.metadata["readout_mode"] = to_string(options.policy->readout_mode);
  }
  for (int s = 0; s < n_sweeps; ++s)
    job.sweeps.push_back(run_sweep(backend, spec, derive_seed(seed, static_cast<std::uint64_t>(s)), options.policy));

  std::string identity = job.backend_id + "|" + std::to_string(n_sweeps) + "|" + std::to_string(spec.n_points) + "|" +
                         std::to_string(spec.shots);
  for (const auto& [k, v] : job.metadata) identity += "|" + k + "=" + v;
  char id[24];
  std::snprintf(id, sizeof id, "job-%016llx", static_cast<unsigned long long>(detail::fnv1a64(identity)));
  job.job_id = id;
  return job;
}

/// Shift-fit α of one job: mean and sample std over its sweeps.
struct AlphaPoint {
  double x = 0.0;  // the varied setting (M, prep or φ)
  Stat alpha;
  Stat r2_shift;
};

inline AlphaPoint summarize_job(double x, const JobRecord& job) {
  const auto fits = fit_job(job);
  return AlphaPoint{x, fits.summary.alpha, fits.summary.r2_shift};
}

/// α_M for each M: Rx(θ) realized as M gates of θ/M.
inline std::vector<AlphaPoint> run_repeated_gate_study(const Backend& backend, SweepSpec spec,
                                                       std::span<const int> m_values, int n_sweeps,
                                                       std::uint64_t seed) {
  std::vector<AlphaPoint> out;
  for (int m : m_values) {
    if (m < 1 || m > kMaxRepeat) throw Error(ErrorKind::invalid_parameter, "M must lie in [1, 10]");
    spec.repeat_m = m;
    out.push_back(summarize_job(m, run_job(backend, spec, n_sweeps, derive_seed(seed, static_cast<std::uint64_t>(m)))));
  }
  return out;
}

/// α for sweeps started from Rx(prep)|0⟩; fits use θ + prep in the model.
inline std::vector<AlphaPoint> run_initial_state_study(const Backend& backend, SweepSpec spec,
                                                       std::span<const double> preps, int n_sweeps,
                                                       std::uint64_t seed) {
  std::vector<AlphaPoint> out;
  for (std::size_t k = 0; k < preps.size(); ++k) {
    spec.prep = preps[k];
    out.push_back(summarize_job(preps[k], run_job(backend, spec, n_sweeps, derive_seed(seed, k))));
  }
  return out;
}

/// α along `n_phi` meridians φ_k = 2πk/n_phi.
inline std::vector<AlphaPoint> run_meridian_scan(const Backend& backend, SweepSpec spec, int n_phi, int n_sweeps,
                                                 std::uint64_t seed) {
  if (n_phi < 1) throw Error(ErrorKind::invalid_parameter, "n_phi must be >= 1");
  std::vector<AlphaPoint> out;
  for (int k = 0; k < n_phi; ++k) {
    spec.phi = 2.0 * std::numbers::pi * k / n_phi;
    out.push_back(summarize_job(spec.phi, run_job(backend, spec, n_sweeps, derive_seed(seed, static_cast<std::uint64_t>(k)))));
  }
  return out;
}

struct CampaignSpec {
  std::vector<int> sweeps_per_job;  // one entry per job
  double delta_mean = 0.0;
  double delta_std = 0.0;
  QubitReadout readout;
};

/// Several jobs on one qubit, each under its own δ drawn from
/// N(delta_mean, delta_std); models calibration drift between jobs.
inline std::vector<JobRecord> run_campaign(const CampaignSpec& campaign, const SweepSpec& spec, std::uint64_t seed,
                                           const std::string& backend_id = "simulator") {
  std::vector<JobRecord> jobs;
  for (std::size_t j = 0; j < campaign.sweeps_per_job.size(); ++j) {
    std::mt19937_64 gen(derive_seed(seed, 1000 + j));
    // Box-Muller on portable uniforms
    const double u1 = 1.0 - uniform53(gen);
    const double u2 = uniform53(gen);
    const double normal = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    const double delta = campaign.delta_mean + campaign.delta_std * normal;

    NoiseConfig noise = NoiseConfig::ideal(spec.qubit + 1);
    noise.delta[spec.qubit] = delta;
    noise.readout.qubits[spec.qubit] = campaign.readout;
    SimulatorBackend backend(noise, backend_id);
    JobOptions options;
    options.metadata["campaign_job"] = std::to_string(j);
    jobs.push_back(run_job(backend, spec, campaign.sweeps_per_job[j], derive_seed(seed, j), options));
  }
  return jobs;
}

// ---------------------------------------------------------------------------
// CHSH

enum class ChshSetting { ab, ab_prime, a_prime_b, a_prime_b_prime };

inline constexpr std::array<ChshSetting, 4> kChshSettings = {ChshSetting::ab, ChshSetting::ab_prime,
                                                             ChshSetting::a_prime_b, ChshSetting::a_prime_b_prime};

inline const char* to_string(ChshSetting s) {
  switch (s) {
    case ChshSetting::ab: return "AB";
    case ChshSetting::ab_prime: return "AB'";
    case ChshSetting::a_prime_b: return "A'B";
    case ChshSetting::a_prime_b_prime: return "A'B'";
  }
  return "?";
}

/// Basis-change gate measuring A = Z (none) or A' = X (Hadamard) on qubit 0.
inline std::optional<U3> basis_change_a(bool prime) {
  if (!prime) return std::nullopt;
  return U3{0, std::numbers::pi / 2.0, 0.0, std::numbers::pi};
}

/// Basis-change gate measuring B = (X+Z)/√2 or B' = (−X+Z)/√2 on qubit 1.
inline U3 basis_change_b(bool prime) {
  return U3{1, prime ? std::numbers::pi / 4.0 : -std::numbers::pi / 4.0, 0.0, 0.0};
}

/// Bell pair (H via U3(π/2, 0, π), then CX) followed by the basis changes
/// of `setting` and a measurement.
inline Circuit chsh_circuit(ChshSetting setting) {
  const bool a_prime = setting == ChshSetting::a_prime_b || setting == ChshSetting::a_prime_b_prime;
  const bool b_prime = setting == ChshSetting::ab_prime || setting == ChshSetting::a_prime_b_prime;
  Circuit c{2, {}};
  c.add(U3{0, std::numbers::pi / 2.0, 0.0, std::numbers::pi});
  c.add(CX{0, 1});
  if (auto g = basis_change_a(a_prime)) c.add(*g);
  c.add(basis_change_b(b_prime));
  c.add(Measure{});
  return c;
}

/// ⟨AB⟩ = Σ (−1)^(a⊕b) v_ab / Σ v_ab over a (possibly quasi-) count vector.
inline double parity_expectation(std::span<const double> v) {
  if (v.size() != 4) throw Error(ErrorKind::invalid_input, "two-qubit counts expected");
  const double total = v[0] + v[1] + v[2] + v[3];
  if (total == 0.0) throw Error(ErrorKind::invalid_input, "empty counts");
  return (v[0] - v[1] - v[2] + v[3]) / total;
}

/// C = ⟨AB⟩ + ⟨AB'⟩ + ⟨A'B⟩ − ⟨A'B'⟩.
inline double chsh_correlation(const std::array<double, 4>& e) { return e[0] + e[1] + e[2] - e[3]; }

struct ChshSpec {
  std::int64_t shots = 819200;  // per setting; 0 = analytic
  std::array<int, 2> qubit_labels = {0, 1};
};

struct ChshResult {
  std::array<double, 4> expectation_raw{};
  std::array<double, 4> expectation_mitigated{};
  double c_raw = 0.0;
  double c_mitigated = 0.0;
  double sigma_raw = 0.0;
  double sigma_mitigated = 0.0;
  std::array<double, 2> alpha{};
};

/// Runs the four settings unmitigated and with `policy` (α-shift on every
/// U3, then its readout mode). Both passes reuse the same per-setting seeds.
inline ChshResult run_chsh(const Backend& backend, const ChshSpec& spec, const MitigationPolicy& policy,
                           std::uint64_t seed) {
  if (backend.capability().n_qubits_max < 2)
    throw Error(ErrorKind::capability_exceeded, "CHSH needs a two-qubit backend");
  if (spec.shots < 0) throw Error(ErrorKind::invalid_parameter, "shots must be >= 0");
  policy.validate();
  MitigationPolicy shift_policy = policy;
  for (int q : {0, 1}) shift_policy.alpha.try_emplace(q, 0.0);

  ChshResult r;
  r.alpha = {shift_policy.alpha.at(0), shift_policy.alpha.at(1)};
  double var_raw = 0.0;
  double var_mit = 0.0;
  double gain = 1.0;
  if (policy.readout_mode != ReadoutMode::none)
    for (const auto& q : policy.cal.first(2).qubits) gain /= std::abs(q.determinant());
  for (std::size_t k = 0; k < kChshSettings.size(); ++k) {
    const Circuit circuit = chsh_circuit(kChshSettings[k]);
    const std::uint64_t s = derive_seed(seed, k);
    const auto raw = detail::execute(backend, circuit, spec.shots, s, nullptr);
    const auto mitigated = detail::execute(backend, apply_alpha_shift(circuit, shift_policy), spec.shots, s, &shift_policy);
    r.expectation_raw[k] = parity_expectation(raw);
    r.expectation_mitigated[k] = parity_expectation(mitigated);
    if (spec.shots > 0) {
      var_raw += (1.0 - r.expectation_raw[k] * r.expectation_raw[k]) / spec.shots;
      const double e_obs = policy.readout_mode == ReadoutMode::none ? r.expectation_mitigated[k]
                                                                      : r.expectation_mitigated[k] / gain;
      var_mit += std::max(0.0, 1.0 - e_obs * e_obs) * gain * gain / spec.shots;
    }
  }
  r.c_raw = chsh_correlation(r.expectation_raw);
  r.c_mitigated = chsh_correlation(r.expectation_mitigated);
  r.sigma_raw = std::sqrt(var_raw);
  r.sigma_mitigated = std::sqrt(var_mit);
  return r;
}

/// Calibration job for one qubit (default 10 sweeps), fitted in place.
inline JobRecord calibrate_qubit(const Backend& backend, int qubit, std::int64_t shots, int n_sweeps,
                                 std::uint64_t seed, const std::string& timestamp = "1970-01-01T00:00:00Z") {
  SweepSpec spec;
  spec.qubit = qubit;
  spec.shots = shots;
  JobOptions options;
  options.timestamp = timestamp;
  options.metadata["role"] = "calibration";
  auto job = run_job(backend, spec, n_sweeps, seed, options);
  job.fits = fit_job(job);
  return job;
}

}  // namespace qshift
