#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qshift/core.hpp"
#include "qshift/error.hpp"
#include "qshift/job.hpp"
#include "qshift/noise.hpp"

namespace qshift {

enum class ReadoutMode { none, inversion, bounded };

inline const char* to_string(ReadoutMode m) {
  switch (m) {
    case ReadoutMode::none: return "none";
    case ReadoutMode::inversion: return "inversion";
    case ReadoutMode::bounded: return "bounded";
  }
  return "unknown";
}

inline ReadoutMode readout_mode_from_string(const std::string& s) {
  if (s == "none") return ReadoutMode::none;
  if (s == "inversion") return ReadoutMode::inversion;
  if (s == "bounded") return ReadoutMode::bounded;
  throw Error(ErrorKind::bad_config, "unknown readout mode '" + s + "' (none, inversion, bounded)");
}

inline constexpr double kSingularTolerance = 1e-12;

struct MitigationPolicy {
  std::map<int, double> alpha;  // qubit -> shift subtracted from every U3 θ
  ReadoutMode readout_mode = ReadoutMode::none;
  ReadoutCal cal;

  bool operator==(const MitigationPolicy&) const = default;

  void validate() const {
    for (const auto& [q, a] : alpha) {
      if (!std::isfinite(a) || std::abs(a) > std::numbers::pi / 2.0)
        throw Error(ErrorKind::invalid_parameter, "alpha for qubit " + std::to_string(q) + " outside [-pi/2, pi/2]");
    }
    cal.validate();
    if (readout_mode == ReadoutMode::inversion)
      for (const auto& q : cal.qubits)
        if (std::abs(q.determinant()) < kSingularTolerance)
          throw Error(ErrorKind::singular_matrix, "inversion requires an invertible calibration matrix");
  }
};

/// U3(θ, φ, λ) on qubit q becomes U3(θ − α_q, φ, λ); nothing else changes.
inline Circuit apply_alpha_shift(const Circuit& circuit, const MitigationPolicy& policy) {
  Circuit out = circuit;
  for (auto& op : out.ops) {
    if (auto* g = std::get_if<U3>(&op)) {
      const auto it = policy.alpha.find(g->qubit);
      if (it == policy.alpha.end())
        throw Error(ErrorKind::missing_alpha, "no alpha for qubit " + std::to_string(g->qubit));
      g->theta -= it->second;
    }
  }
  return out;
}

/// M_cal⁻¹ · counts, applied one tensor factor at a time. Entries may come
/// out negative; their sum equals the input sum.
inline std::vector<double> mitigate_readout_inversion(const ReadoutCal& cal, std::span<const double> counts) {
  if (counts.size() != cal.dim()) throw Error(ErrorKind::invalid_input, "counts length does not match calibration");
  std::vector<double> v(counts.begin(), counts.end());
  for (int q = 0; q < cal.n_qubits(); ++q) {
    const auto& r = cal.qubits[q];
    const double det = r.determinant();
    if (std::abs(det) < kSingularTolerance)
      throw Error(ErrorKind::singular_matrix, "calibration matrix of qubit " + std::to_string(q) + " is singular");
    const double inv[4] = {r.p1 / det, -(1.0 - r.p1) / det, -(1.0 - r.p0) / det, r.p0 / det};
    const std::size_t bit = std::size_t{1} << q;
    for (std::size_t i0 = 0; i0 < v.size(); ++i0) {
      if (i0 & bit) continue;
      const std::size_t i1 = i0 | bit;
      const double a = v[i0];
      const double b = v[i1];
      v[i0] = inv[0] * a + inv[1] * b;
      v[i1] = inv[2] * a + inv[3] * b;
    }
  }
  return v;
}

inline std::vector<double> mitigate_readout_inversion(const ReadoutCal& cal, const Counts& counts) {
  const std::vector<double> as_double(counts.begin(), counts.end());
  return mitigate_readout_inversion(cal, std::span<const double>(as_double));
}

/// Euclidean projection onto {v ≥ 0, Σv = total}.
inline std::vector<double> project_to_simplex(std::span<const double> y, double total = 1.0) {
  std::vector<double> sorted(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double shift = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumulative += sorted[k];
    const double t = (cumulative - total) / static_cast<double>(k + 1);
    if (sorted[k] - t > 0.0) shift = t;
  }
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = std::max(0.0, y[i] - shift);
  return out;
}

/// ‖M v − target‖₂.
inline double readout_residual(const ReadoutCal& cal, std::span<const double> v, std::span<const double> target) {
  const auto mv = apply_readout(cal, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < mv.size(); ++i) sum += (mv[i] - target[i]) * (mv[i] - target[i]);
  return std::sqrt(sum);
}

/// Inversion with negative entries clipped to zero and the result rescaled
/// to the input total.
inline std::vector<double> clipped_inversion(const ReadoutCal& cal, std::span<const double> counts) {
  auto v = mitigate_readout_inversion(cal, counts);
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double kept = 0.0;
  for (auto& x : v) {
    x = std::max(0.0, x);
    kept += x;
  }
  if (kept > 0.0)
    for (auto& x : v) x *= total / kept;
  return v;
}

struct BoundedSolverOptions {
  int max_iterations = 10000;
  double residual_change_tol = 1e-10;
};

/// arg min ‖M v − counts‖₂ subject to v ≥ 0 and Σv = Σcounts, by projected
/// gradient descent with step 1/‖MᵀM‖_F. The start is the better of the raw
/// counts and the clipped inversion; descent is monotone, so the result is
/// never worse than either.
inline std::vector<double> mitigate_readout_bounded(const ReadoutCal& cal, std::span<const double> counts,
                                                    BoundedSolverOptions opts = {}) {
  if (counts.size() != cal.dim()) throw Error(ErrorKind::invalid_input, "counts length does not match calibration");
  cal.validate();
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (!(total > 0.0)) return std::vector<double>(counts.size(), 0.0);

  std::vector<double> target(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) target[i] = counts[i] / total;

  const RealMatrix m = cal.matrix();
  const RealMatrix mt = m.transpose();
  const RealMatrix gram = mt * m;
  double lipschitz = 0.0;
  for (double x : gram.data) lipschitz += x * x;
  lipschitz = std::sqrt(lipschitz);
  const double step = 1.0 / lipschitz;

  std::vector<double> v = project_to_simplex(target);
  double residual = readout_residual(cal, v, target);
  bool invertible = true;
  for (const auto& q : cal.qubits) invertible = invertible && std::abs(q.determinant()) >= kSingularTolerance;
  if (invertible) {
    auto candidate = clipped_inversion(cal, target);
    const double r = readout_residual(cal, candidate, target);
    if (r < residual) {
      v = std::move(candidate);
      residual = r;
    }
  }

  std::vector<double> next(v.size());
  for (int it = 0; it < opts.max_iterations; ++it) {
    auto mv = m * v;
    for (std::size_t i = 0; i < mv.size(); ++i) mv[i] -= target[i];
    const auto grad = mt * mv;
    for (std::size_t i = 0; i < v.size(); ++i) next[i] = v[i] - step * grad[i];
    next = project_to_simplex(next);
    const double r = readout_residual(cal, next, target);
    const double change = residual - r;
    if (r <= residual) {
      v = next;
      residual = r;
    }
    if (std::abs(change) < opts.residual_change_tol) break;
  }
  for (auto& x : v) x *= total;
  return v;
}

inline std::vector<double> mitigate_readout_bounded(const ReadoutCal& cal, const Counts& counts,
                                                    BoundedSolverOptions opts = {}) {
  const std::vector<double> as_double(counts.begin(), counts.end());
  return mitigate_readout_bounded(cal, std::span<const double>(as_double), opts);
}

inline int qubits_for(std::size_t dim) {
  if (dim == 2) return 1;
  if (dim == 4) return 2;
  throw Error(ErrorKind::invalid_input, "counts vector must have length 2 or 4");
}

/// Applies the policy's readout mode to raw counts, returning estimated
/// true counts (raw counts for ReadoutMode::none).
inline std::vector<double> mitigate_counts(const MitigationPolicy& policy, const Counts& counts) {
  switch (policy.readout_mode) {
    case ReadoutMode::none: return {counts.begin(), counts.end()};
    case ReadoutMode::inversion: return mitigate_readout_inversion(policy.cal.first(qubits_for(counts.size())), counts);
    case ReadoutMode::bounded: return mitigate_readout_bounded(policy.cal.first(qubits_for(counts.size())), counts);
  }
  return {counts.begin(), counts.end()};
}

/// α per qubit from fitted jobs: the Shift-fit summary mean of each job's
/// qubit, later jobs overriding earlier ones. Jobs without stored fits are
/// fitted here.
inline std::map<int, double> alpha_from_jobs(std::span<const JobRecord> jobs) {
  std::map<int, double> alpha;
  for (const auto& job : jobs) {
    const auto fits = job.fits ? *job.fits : fit_job(job);
    if (fits.summary.alpha.n == 0)
      throw Error(ErrorKind::degenerate_fit, "job " + job.job_id + " has no usable Shift-fit");
    alpha[job.qubit()] = fits.summary.alpha.mean;
  }
  return alpha;
}

inline nlohmann::ordered_json policy_to_json(const MitigationPolicy& policy) {
  nlohmann::ordered_json alpha = nlohmann::ordered_json::object();
  for (const auto& [q, a] : policy.alpha) alpha[std::to_string(q)] = a;
  nlohmann::ordered_json readout = nlohmann::ordered_json::array();
  for (const auto& q : policy.cal.qubits) readout.push_back({{"p0", q.p0}, {"p1", q.p1}});
  return {{"alpha", alpha}, {"readout_mode", to_string(policy.readout_mode)}, {"readout", readout}};
}

inline MitigationPolicy policy_from_json(const nlohmann::ordered_json& j) {
  MitigationPolicy policy;
  try {
    for (const auto& [key, value] : j.at("alpha").items()) policy.alpha[std::stoi(key)] = value.get<double>();
    policy.readout_mode = readout_mode_from_string(j.value("readout_mode", std::string{"none"}));
    if (j.contains("readout"))
      for (const auto& q : j.at("readout")) policy.cal.qubits.push_back({q.at("p0").get<double>(), q.at("p1").get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::bad_config, std::string("malformed mitigation policy: ") + e.what());
  }
  policy.validate();
  return policy;
}

}  // namespace qshift
