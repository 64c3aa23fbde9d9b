#pragma once

// Job records: n_s sweeps taken under one noise configuration, persisted as
// versioned JSON.
//
//   {
//     "schema_version": 1,
//     "job_id": "...", "backend_id": "...", "timestamp": "2026-01-01T00:00:00Z",
//     "noise_config": {"delta": [..], "readout": [{"p0": .., "p1": ..}, ..]},
//     "metadata": {"qubit": "0", ...},
//     "sweeps": [{"seed": .., "shots": .., "prep": .., "thetas": [..],
//                 "p0_estimates": [..], "counts": [[n0, n1], ..]}, ..],
//     "fits": {"shift": [..], "ibm": [..], "summary": {..}}      (optional)
//   }
//
// Counts are integer arrays in little-endian basis order. NaN fit values are
// written as null.

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qshift/error.hpp"
#include "qshift/fitting.hpp"
#include "qshift/noise.hpp"

namespace qshift {

inline constexpr int kJobSchemaVersion = 1;

struct JobRecord {
  std::string job_id;
  std::string backend_id;
  std::string timestamp;
  NoiseConfig noise_config;
  std::vector<SweepRecord> sweeps;
  std::map<std::string, std::string> metadata;
  std::optional<SweepFits> fits;

  bool operator==(const JobRecord&) const = default;

  void validate() const {
    if (sweeps.empty()) throw Error(ErrorKind::invalid_input, "job " + job_id + " has no sweeps");
    for (const auto& s : sweeps) {
      s.validate();
      if (s.thetas != sweeps.front().thetas)
        throw Error(ErrorKind::invalid_input, "job " + job_id + ": sweeps use different theta grids");
    }
  }

  int qubit() const {
    const auto it = metadata.find("qubit");
    return it == metadata.end() ? 0 : std::stoi(it->second);
  }
};

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson number_or_null(double x) { return std::isnan(x) ? ojson(nullptr) : ojson(x); }

inline double number_or_nan(const ojson& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline ojson fit_to_json(const FitResult& f) {
  return ojson{{"model", to_string(f.model)},
               {"alpha", number_or_null(f.alpha)},
               {"p0", number_or_null(f.p0)},
               {"p1", number_or_null(f.p1)},
               {"r_squared", number_or_null(f.r_squared)},
               {"residual_norm", number_or_null(f.residual_norm)},
               {"flagged", f.flagged},
               {"diagnostic", f.diagnostic}};
}

inline FitResult fit_from_json(const ojson& j) {
  FitResult f;
  f.model = fit_model_from_string(j.at("model").get<std::string>());
  f.alpha = number_or_nan(j.at("alpha"));
  f.p0 = number_or_nan(j.at("p0"));
  f.p1 = number_or_nan(j.at("p1"));
  f.r_squared = number_or_nan(j.at("r_squared"));
  f.residual_norm = number_or_nan(j.at("residual_norm"));
  f.flagged = j.at("flagged").get<bool>();
  f.diagnostic = j.value("diagnostic", std::string{});
  return f;
}

inline ojson stat_to_json(const Stat& s) {
  return ojson{{"mean", number_or_null(s.mean)},
               {"std", number_or_null(s.std)},
               {"min", number_or_null(s.min)},
               {"max", number_or_null(s.max)},
               {"n", s.n}};
}

}  // namespace detail

inline nlohmann::ordered_json noise_to_json(const NoiseConfig& noise) {
  detail::ojson readout = detail::ojson::array();
  for (const auto& q : noise.readout.qubits) readout.push_back({{"p0", q.p0}, {"p1", q.p1}});
  return {{"delta", noise.delta}, {"readout", readout}};
}

inline NoiseConfig noise_from_json(const nlohmann::ordered_json& j) {
  NoiseConfig noise;
  noise.delta = j.at("delta").get<std::vector<double>>();
  for (const auto& q : j.at("readout")) noise.readout.qubits.push_back({q.at("p0").get<double>(), q.at("p1").get<double>()});
  return noise;
}

inline nlohmann::ordered_json fits_to_json(const SweepFits& fits) {
  detail::ojson j;
  auto& shift = j["shift"] = detail::ojson::array();
  for (const auto& f : fits.shift) shift.push_back(detail::fit_to_json(f));
  auto& ibm = j["ibm"] = detail::ojson::array();
  for (const auto& f : fits.ibm) ibm.push_back(detail::fit_to_json(f));
  const auto& s = fits.summary;
  j["summary"] = {{"n_sweeps", s.n_sweeps},
                  {"n_flagged", s.n_flagged},
                  {"alpha", detail::stat_to_json(s.alpha)},
                  {"p0", detail::stat_to_json(s.p0)},
                  {"p1", detail::stat_to_json(s.p1)},
                  {"r2_shift", detail::stat_to_json(s.r2_shift)},
                  {"r2_ibm", detail::stat_to_json(s.r2_ibm)},
                  {"alpha_concise", s.alpha.n ? s.alpha_concise() : "nan"}};
  return j;
}

/// The summary is recomputed from the per-sweep fits rather than trusted.
inline SweepFits fits_from_json(const nlohmann::ordered_json& j) {
  SweepFits fits;
  for (const auto& f : j.at("shift")) fits.shift.push_back(detail::fit_from_json(f));
  for (const auto& f : j.at("ibm")) fits.ibm.push_back(detail::fit_from_json(f));
  fits.summary = summarize(fits.shift, fits.ibm);
  return fits;
}

inline nlohmann::ordered_json job_to_json(const JobRecord& job) {
  detail::ojson j;
  j["schema_version"] = kJobSchemaVersion;
  j["job_id"] = job.job_id;
  j["backend_id"] = job.backend_id;
  j["timestamp"] = job.timestamp;
  j["noise_config"] = noise_to_json(job.noise_config);
  j["metadata"] = job.metadata;
  auto& sweeps = j["sweeps"] = detail::ojson::array();
  for (const auto& s : job.sweeps) {
    detail::ojson sj{{"seed", s.seed}, {"shots", s.shots}, {"prep", s.prep}, {"thetas", s.thetas},
                     {"p0_estimates", s.p0_estimates}};
    sj["counts"] = s.counts;
    sweeps.push_back(std::move(sj));
  }
  if (job.fits) j["fits"] = fits_to_json(*job.fits);
  return j;
}

inline JobRecord job_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw Error(ErrorKind::invalid_input, "job file is not a JSON object");
  const auto version_it = j.find("schema_version");
  if (version_it == j.end() || !version_it->is_number_integer())
    throw Error(ErrorKind::schema_version, "job file has no integer schema_version");
  const int version = version_it->get<int>();
  if (version != kJobSchemaVersion)
    throw Error(ErrorKind::schema_version, "unsupported job schema_version " + std::to_string(version) +
                                               " (expected " + std::to_string(kJobSchemaVersion) + ")");
  try {
    JobRecord job;
    job.job_id = j.at("job_id").get<std::string>();
    job.backend_id = j.at("backend_id").get<std::string>();
    job.timestamp = j.at("timestamp").get<std::string>();
    job.noise_config = noise_from_json(j.at("noise_config"));
    if (j.contains("metadata")) job.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    for (const auto& sj : j.at("sweeps")) {
      SweepRecord s;
      s.seed = sj.value("seed", std::uint64_t{0});
      s.shots = sj.at("shots").get<std::int64_t>();
      s.prep = sj.value("prep", 0.0);
      s.thetas = sj.at("thetas").get<std::vector<double>>();
      s.p0_estimates = sj.at("p0_estimates").get<std::vector<double>>();
      if (sj.contains("counts")) s.counts = sj.at("counts").get<std::vector<Counts>>();
      job.sweeps.push_back(std::move(s));
    }
    if (j.contains("fits")) job.fits = fits_from_json(j.at("fits"));
    job.validate();
    return job;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, std::string("malformed job record: ") + e.what());
  }
}

inline void store_job(const JobRecord& job, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  out << job_to_json(job).dump(2) << '\n';
  if (!out) throw Error(ErrorKind::io, "write failed for " + path);
}

inline JobRecord load_job(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path);
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, path + ": " + e.what());
  }
  return job_from_json(j);
}

/// Readout calibration of the job's swept qubit from its noise config.
inline std::optional<QubitReadout> job_readout(const JobRecord& job) {
  const int q = job.qubit();
  if (q < 0 || q >= job.noise_config.readout.n_qubits()) return std::nullopt;
  return job.noise_config.readout.qubits[q];
}

/// Shift- and IBM-fits for every sweep of the job. The IBM calibration is
/// `cal` when given, else each sweep's endpoints.
inline SweepFits fit_job(const JobRecord& job, std::optional<QubitReadout> cal = std::nullopt) {
  job.validate();
  return fit_sweeps(job.sweeps, cal);
}

}  // namespace qshift
