// qshift: meridian-sweep calibration, α-shift mitigation and CHSH runs from
// the command line.
//
// Exit codes: 0 success, 2 bad config, 3 missing input file, 4 fit failure,
// 5 backend error.

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qshift/qshift.hpp"

namespace fs = std::filesystem;
using namespace qshift;

namespace {

enum ExitCode { kOk = 0, kBadConfig = 2, kMissingInput = 3, kFitFailure = 4, kBackendError = 5 };

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return kMissingInput;
    case ErrorKind::degenerate_fit:
    case ErrorKind::undefined_r_squared:
    case ErrorKind::empty_report: return kFitFailure;
    case ErrorKind::capability_exceeded:
    case ErrorKind::missing_record:
    case ErrorKind::invalid_circuit: return kBackendError;
    default: return kBadConfig;
  }
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::bad_config, std::string("cannot parse ") + what + " value '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorKind::bad_config, std::string("empty ") + what + " list");
  return out;
}

void require_input(const std::string& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::io, "input file not found: " + path);
}

/// Settings shared by the run subcommands. Filled from the config file
/// first, then overridden by any flag given on the command line.
struct Settings {
  std::uint64_t seed = 1;
  std::int64_t shots = 8192;
  std::string delta = "0";
  std::string readout = "1,1";
  int grid = kDefaultGridPoints;
  double meridian = -std::numbers::pi / 2.0;
  int repeat_m = 1;
  double prep = 0.0;
  int sweeps = 10;
  int qubit = 0;
  std::vector<std::string> alpha_from;
  std::string alpha;  // explicit "a0[,a1]"
  std::string readout_mode = "none";
  std::string timestamp;
  std::string backend_id = "simulator";
  std::string output;
  std::string record;  // write replay records here
  std::string replay;  // run against stored records
};

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> shots;
  std::optional<std::string> delta;
  std::optional<std::string> readout;
  std::optional<int> grid;
  std::optional<double> meridian;
  std::optional<int> repeat_m;
  std::optional<double> prep;
  std::optional<int> sweeps;
  std::optional<int> qubit;
  std::vector<std::string> alpha_from;
  std::optional<std::string> alpha;
  std::optional<std::string> readout_mode;
  std::optional<std::string> timestamp;
  std::optional<std::string> backend_id;
  std::optional<std::string> output;
  std::optional<std::string> record;
  std::optional<std::string> replay;
};

void add_run_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config file; flags override its values");
  app->add_option("--seed", f.seed, "Root seed (u64)");
  app->add_option("--shots", f.shots, "Shots per circuit (0 = analytic probabilities)");
  app->add_option("--delta", f.delta, "Off-resonance delta per qubit, comma separated");
  app->add_option("--readout", f.readout, "Readout fidelities p0,p1[,p0,p1] per qubit");
  app->add_option("--grid", f.grid, "Number of theta grid points");
  app->add_option("--meridian", f.meridian, "Meridian phi (radians)");
  app->add_option("--repeat-m", f.repeat_m, "Split Rx(theta) into M gates");
  app->add_option("--prep", f.prep, "Initial Rx(prep) angle: 0, pi/4, pi/2 or 3pi/4 (radians)");
  app->add_option("--sweeps", f.sweeps, "Sweeps per job");
  app->add_option("--qubit", f.qubit, "Swept qubit");
  app->add_option("--alpha-from", f.alpha_from, "Fitted job file(s) providing alpha per qubit");
  app->add_option("--alpha", f.alpha, "Explicit alpha per qubit, comma separated");
  app->add_option("--readout-mode", f.readout_mode, "Readout mitigation: none, inversion or bounded");
  app->add_option("--timestamp", f.timestamp, "ISO-8601 timestamp stored in job records");
  app->add_option("--backend-id", f.backend_id, "Backend id recorded in outputs");
  app->add_option("-o,--output", f.output, "Output path");
  app->add_option("--record", f.record, "Store every run's counts in this replay file");
  app->add_option("--replay", f.replay, "Serve counts from this replay file instead of simulating");
}

Settings resolve(const Flags& f) {
  Settings s;
  if (!f.config.empty()) {
    require_input(f.config);
    std::ifstream in(f.config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
      auto text = [&](const char* key, std::string& out) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (v.is_string()) {
          out = v.get<std::string>();
        } else if (v.is_array()) {
          std::string joined;
          for (const auto& x : v) joined += (joined.empty() ? "" : ",") + x.dump();
          out = joined;
        } else {
          out = v.dump();
        }
      };
      if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
      if (j.contains("shots")) s.shots = j.at("shots").get<std::int64_t>();
      text("delta", s.delta);
      if (j.contains("readout") && j.at("readout").is_array() && !j.at("readout").empty() &&
          j.at("readout").front().is_object()) {
        std::string joined;
        for (const auto& q : j.at("readout"))
          joined += (joined.empty() ? "" : ",") + q.at("p0").dump() + "," + q.at("p1").dump();
        s.readout = joined;
      } else {
        text("readout", s.readout);
      }
      if (j.contains("grid")) s.grid = j.at("grid").get<int>();
      if (j.contains("meridian")) s.meridian = j.at("meridian").get<double>();
      if (j.contains("repeat_m")) s.repeat_m = j.at("repeat_m").get<int>();
      if (j.contains("prep")) s.prep = j.at("prep").get<double>();
      if (j.contains("sweeps")) s.sweeps = j.at("sweeps").get<int>();
      if (j.contains("qubit")) s.qubit = j.at("qubit").get<int>();
      if (j.contains("alpha_from")) {
        const auto& v = j.at("alpha_from");
        if (v.is_string()) s.alpha_from = {v.get<std::string>()};
        else s.alpha_from = v.get<std::vector<std::string>>();
      }
      text("alpha", s.alpha);
      text("readout_mode", s.readout_mode);
      text("timestamp", s.timestamp);
      text("backend_id", s.backend_id);
      text("output", s.output);
      text("record", s.record);
      text("replay", s.replay);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::bad_config, f.config + ": " + e.what());
    }
  }
  if (f.seed) s.seed = *f.seed;
  if (f.shots) s.shots = *f.shots;
  if (f.delta) s.delta = *f.delta;
  if (f.readout) s.readout = *f.readout;
  if (f.grid) s.grid = *f.grid;
  if (f.meridian) s.meridian = *f.meridian;
  if (f.repeat_m) s.repeat_m = *f.repeat_m;
  if (f.prep) s.prep = *f.prep;
  if (f.sweeps) s.sweeps = *f.sweeps;
  if (f.qubit) s.qubit = *f.qubit;
  if (!f.alpha_from.empty()) s.alpha_from = f.alpha_from;
  if (f.alpha) s.alpha = *f.alpha;
  if (f.readout_mode) s.readout_mode = *f.readout_mode;
  if (f.timestamp) s.timestamp = *f.timestamp;
  if (f.backend_id) s.backend_id = *f.backend_id;
  if (f.output) s.output = *f.output;
  if (f.record) s.record = *f.record;
  if (f.replay) s.replay = *f.replay;
  static_cast<void>(readout_mode_from_string(s.readout_mode));
  return s;
}

/// --timestamp, else SOURCE_DATE_EPOCH, else the wall clock (UTC).
std::string resolve_timestamp(const Settings& s) {
  if (!s.timestamp.empty()) return s.timestamp;
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

NoiseConfig noise_from(const Settings& s, int min_qubits) {
  const auto deltas = parse_list(s.delta, "--delta");
  const auto readout = parse_list(s.readout, "--readout");
  if (readout.size() % 2 != 0) throw Error(ErrorKind::bad_config, "--readout takes p0,p1 pairs");
  const int n = std::max({min_qubits, static_cast<int>(deltas.size()), static_cast<int>(readout.size() / 2)});
  if (n > kMaxQubits) throw Error(ErrorKind::bad_config, "at most 2 qubits are supported");
  NoiseConfig noise = NoiseConfig::ideal(n);
  // a single value applies to every qubit
  for (int q = 0; q < n; ++q) noise.delta[q] = deltas.size() == 1 ? deltas[0] : (q < (int)deltas.size() ? deltas[q] : 0.0);
  for (int q = 0; q < n; ++q) {
    const std::size_t k = readout.size() == 2 ? 0 : static_cast<std::size_t>(2 * q);
    if (k + 1 < readout.size()) noise.readout.qubits[q] = {readout[k], readout[k + 1]};
  }
  try {
    noise.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::bad_config, e.what());
  }
  return noise;
}

SweepSpec sweep_spec_from(const Settings& s) {
  SweepSpec spec;
  spec.n_points = s.grid;
  spec.phi = s.meridian;
  spec.shots = s.shots;
  spec.prep = s.prep;
  spec.repeat_m = s.repeat_m;
  spec.qubit = s.qubit;
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::bad_config, e.what());
  }
  if (s.sweeps < 1) throw Error(ErrorKind::bad_config, "--sweeps must be >= 1");
  return spec;
}

/// Output path: -o, else $QSHIFT_OUTPUT_DIR/<name>, else ./<name>.
std::string output_path(const Settings& s, const std::string& default_name) {
  if (!s.output.empty()) return s.output;
  if (const char* dir = std::getenv("QSHIFT_OUTPUT_DIR")) {
    fs::create_directories(dir);
    return (fs::path(dir) / default_name).string();
  }
  return default_name;
}

std::vector<JobRecord> load_jobs(const std::vector<std::string>& paths) {
  std::vector<JobRecord> jobs;
  for (const auto& p : paths) {
    require_input(p);
    jobs.push_back(load_job(p));
  }
  return jobs;
}

MitigationPolicy policy_from(const Settings& s, const NoiseConfig& noise) {
  MitigationPolicy policy;
  policy.readout_mode = readout_mode_from_string(s.readout_mode);
  policy.cal = noise.readout;
  if (!s.alpha.empty()) {
    const auto alphas = parse_list(s.alpha, "--alpha");
    for (std::size_t q = 0; q < alphas.size(); ++q) policy.alpha[static_cast<int>(q)] = alphas[q];
  }
  if (!s.alpha_from.empty()) {
    const auto jobs = load_jobs(s.alpha_from);
    for (const auto& [q, a] : alpha_from_jobs(jobs)) policy.alpha[q] = a;
  }
  policy.validate();
  return policy;
}

/// Simulator, optionally wrapped to record, or a replay of stored counts.
struct BackendHolder {
  std::unique_ptr<SimulatorBackend> simulator;
  std::unique_ptr<RecordStore> store;
  std::unique_ptr<Backend> wrapper;
  std::string record_path;

  const Backend& get() const { return wrapper ? *wrapper : *simulator; }

  void save() const {
    if (store && !record_path.empty()) store->save(record_path);
  }
};

BackendHolder make_backend(const Settings& s, const NoiseConfig& noise) {
  BackendHolder h;
  if (!s.replay.empty()) {
    require_input(s.replay);
    h.wrapper = std::make_unique<ReplayBackend>(RecordStore::load(s.replay), noise);
    return h;
  }
  h.simulator = std::make_unique<SimulatorBackend>(noise, s.backend_id);
  if (!s.record.empty()) {
    h.store = std::make_unique<RecordStore>();
    h.wrapper = std::make_unique<RecordingBackend>(*h.simulator, *h.store);
    h.record_path = s.record;
  }
  return h;
}

void print_fits(const JobRecord& job, const SweepFits& fits, bool show_shift, bool show_ibm) {
  std::printf("job %s (%s, qubit %d, %zu sweeps)\n", job.job_id.c_str(), job.backend_id.c_str(), job.qubit(),
              job.sweeps.size());
  std::printf("%5s %12s %10s %10s %12s %12s %s\n", "sweep", "alpha", "p0'", "p1'", "R2_shift", "R2_ibm", "flags");
  for (std::size_t i = 0; i < fits.shift.size(); ++i) {
    const auto& f = fits.shift[i];
    const auto& g = fits.ibm[i];
    std::string flags;
    if (f.flagged) flags += "shift: " + f.diagnostic + " ";
    if (g.flagged) flags += "ibm: " + g.diagnostic;
    std::printf("%5zu %12.6f %10.6f %10.6f %12.8f %12.8f %s\n", i, f.alpha, f.p0, f.p1, f.r_squared, g.r_squared,
                flags.c_str());
  }
  const auto& sm = fits.summary;
  if (show_shift && sm.alpha.n > 0)
    std::printf("shift-fit: alpha = %s  p0' = %s  p1' = %s  mean R2 = %.6f\n", sm.alpha_concise().c_str(),
                sm.p0_concise().c_str(), sm.p1_concise().c_str(), sm.r2_shift.mean);
  if (show_ibm && sm.r2_ibm.n > 0) std::printf("ibm-fit:   mean R2 = %.6f\n", sm.r2_ibm.mean);
}

int cmd_sweep(const Flags& f) {
  const Settings s = resolve(f);
  const SweepSpec spec = sweep_spec_from(s);
  const NoiseConfig noise = noise_from(s, spec.qubit + 1);
  auto backend = make_backend(s, noise);
  JobOptions options;
  options.timestamp = resolve_timestamp(s);
  const auto job = run_job(backend.get(), spec, s.sweeps, s.seed, options);
  const auto path = output_path(s, job.job_id + ".json");
  store_job(job, path);
  backend.save();
  std::printf("wrote %s (%s, %zu sweeps)\n", path.c_str(), job.job_id.c_str(), job.sweeps.size());
  return kOk;
}

int cmd_fit(const std::string& job_path, const std::string& model, const std::string& cal_from,
            const std::string& output) {
  require_input(job_path);
  auto job = load_job(job_path);
  std::optional<QubitReadout> cal;
  if (!cal_from.empty()) {
    require_input(cal_from);
    const auto source = load_job(cal_from);
    cal = job_readout(source);
    if (!cal) throw Error(ErrorKind::missing_calibration, cal_from + " has no readout for qubit " + std::to_string(source.qubit()));
  }
  const auto fits = fit_job(job, cal);
  job.fits = fits;
  const bool shift = model == "shift" || model == "both";
  const bool ibm = model == "ibm" || model == "both";
  if (!shift && !ibm) throw Error(ErrorKind::bad_config, "--model must be shift, ibm or both");
  print_fits(job, fits, shift, ibm);
  if (!output.empty()) store_job(job, output);
  return fits.any_flagged() ? kFitFailure : kOk;
}

int cmd_mitigate(const Flags& f, const std::string& circuit_path) {
  const Settings s = resolve(f);
  if (s.alpha_from.empty() && s.alpha.empty()) throw Error(ErrorKind::bad_config, "mitigate needs --alpha-from or --alpha");
  const SweepSpec spec = sweep_spec_from(s);
  const NoiseConfig noise = noise_from(s, spec.qubit + 1);
  const MitigationPolicy policy = policy_from(s, noise);
  auto backend = make_backend(s, noise);

  if (!circuit_path.empty()) {
    require_input(circuit_path);
    std::ifstream in(circuit_path);
    nlohmann::ordered_json cj;
    try {
      cj = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::bad_config, circuit_path + ": " + e.what());
    }
    const Circuit circuit = circuit_from_json(cj);
    const Circuit shifted = apply_alpha_shift(circuit, policy);
    const auto raw = backend.get().run(circuit, s.shots, s.seed);
    const auto counts = backend.get().run(shifted, s.shots, s.seed);
    nlohmann::ordered_json out{{"fingerprint", fingerprint(circuit)},
                               {"raw_counts", raw},
                               {"mitigated_circuit", circuit_to_json(shifted)},
                               {"mitigated_counts", counts},
                               {"mitigated_estimate", mitigate_counts(policy, counts)}};
    std::cout << out.dump(2) << '\n';
    if (!s.output.empty()) {
      std::ofstream os(s.output);
      os << out.dump(2) << '\n';
    }
    backend.save();
    return kOk;
  }

  JobOptions options;
  options.timestamp = resolve_timestamp(s);
  options.policy = &policy;
  auto job = run_job(backend.get(), spec, s.sweeps, s.seed, options);
  job.fits = fit_job(job);
  const auto path = output_path(s, job.job_id + ".json");
  store_job(job, path);
  backend.save();
  std::printf("applied alpha = %.6f on qubit %d; residual shift-fit alpha = %s\n", policy.alpha.at(spec.qubit),
              spec.qubit, job.fits->summary.alpha.n ? job.fits->summary.alpha_concise().c_str() : "nan");
  std::printf("wrote %s\n", path.c_str());
  return job.fits->any_flagged() ? kFitFailure : kOk;
}

int cmd_chsh(const Flags& f, int calibration_sweeps, std::int64_t calibration_shots) {
  Settings s = resolve(f);
  if (!f.shots && f.config.empty()) s.shots = 819200;
  const NoiseConfig noise = noise_from(s, 2);
  auto backend = make_backend(s, noise);
  MitigationPolicy policy = policy_from(s, noise);
  for (int q : {0, 1}) {
    if (policy.alpha.count(q)) continue;
    const auto job = calibrate_qubit(backend.get(), q, calibration_shots, calibration_sweeps, derive_seed(s.seed, 100 + q),
                                     resolve_timestamp(s));
    if (job.fits->summary.alpha.n == 0) throw Error(ErrorKind::degenerate_fit, "calibration of qubit " + std::to_string(q) + " failed");
    policy.alpha[q] = job.fits->summary.alpha.mean;
  }
  ChshSpec spec;
  spec.shots = s.shots;
  const auto r = run_chsh(backend.get(), spec, policy, s.seed);
  ChshRow row;
  char id[32];
  std::snprintf(id, sizeof id, "chsh-%016llx", static_cast<unsigned long long>(derive_seed(s.seed, 0xC45)));
  row.run_id = id;
  row.backend_id = backend.get().capability().id;
  row.alpha = r.alpha;
  row.c_raw = r.c_raw;
  row.c_corr = r.c_mitigated;
  row.sigma_raw = r.sigma_raw;
  row.sigma_corr = r.sigma_mitigated;
  std::printf("%-6s %12s %12s\n", "basis", "E_raw", "E_mitigated");
  for (std::size_t k = 0; k < 4; ++k)
    std::printf("%-6s %12.6f %12.6f\n", to_string(kChshSettings[k]), r.expectation_raw[k], r.expectation_mitigated[k]);
  std::cout << chsh_table(std::vector<ChshRow>{row});
  if (!s.output.empty()) {
    std::ofstream os(s.output);
    if (!os) throw Error(ErrorKind::io, "cannot write " + s.output);
    os << chsh_csv(std::vector<ChshRow>{row});
  }
  backend.save();
  return kOk;
}

int cmd_report(const std::vector<std::string>& paths, const std::string& hist_key, int bins,
               const std::string& out_dir) {
  if (paths.empty()) throw Error(ErrorKind::empty_report, "no job files given");
  auto jobs = load_jobs(paths);
  const auto bundle = build_report(jobs);
  std::cout << summary_table(bundle.summary_rows) << '\n' << r2_table(bundle.r2_stats);
  std::optional<Histogram> hist;
  if (!hist_key.empty()) {
    if (hist_key != "alpha") throw Error(ErrorKind::bad_config, "only --histogram alpha is supported");
    hist = histogram(sweep_alphas(jobs), bins);
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    auto write = [&](const char* name, const std::string& text) {
      std::ofstream os(fs::path(out_dir) / name);
      if (!os) throw Error(ErrorKind::io, "cannot write " + (fs::path(out_dir) / name).string());
      os << text;
    };
    write("summary.csv", summary_csv(bundle.summary_rows));
    write("r2_stats.csv", r2_csv(bundle.r2_stats));
    write("plot_series.csv", plot_csv(bundle.plot_series));
    if (hist) write("histogram_alpha.csv", histogram_csv(*hist));
  } else if (hist) {
    std::cout << '\n' << histogram_csv(*hist);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibration and mitigation of the U3 angle shift"};
  app.require_subcommand(1);

  Flags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "Run a job of meridian sweeps and write a job record");
  add_run_flags(sweep, sweep_flags);

  std::string fit_job_path, fit_model = "both", fit_cal_from, fit_output;
  auto* fit = app.add_subcommand("fit", "Fit a stored job record");
  fit->add_option("job", fit_job_path, "Job record")->required();
  fit->add_option("--model", fit_model, "shift, ibm or both");
  fit->add_option("--cal-from", fit_cal_from, "Job whose readout calibration feeds the IBM-fit");
  fit->add_option("-o,--output", fit_output, "Write the job with fits to this path");

  Flags mitigate_flags;
  std::string circuit_path;
  auto* mitigate = app.add_subcommand("mitigate", "Re-run a sweep or circuit with alpha-shift mitigation");
  add_run_flags(mitigate, mitigate_flags);
  mitigate->add_option("--circuit", circuit_path, "Circuit JSON file to run instead of a sweep");

  Flags chsh_flags;
  int calibration_sweeps = 10;
  std::int64_t calibration_shots = 8192;
  auto* chsh = app.add_subcommand("chsh", "CHSH correlation, raw and mitigated");
  add_run_flags(chsh, chsh_flags);
  chsh->add_option("--calibration-sweeps", calibration_sweeps, "Sweeps per calibration job when alpha is not given");
  chsh->add_option("--calibration-shots", calibration_shots, "Shots per calibration circuit");

  std::vector<std::string> report_paths;
  std::string hist_key, out_dir;
  int bins = 20;
  auto* report = app.add_subcommand("report", "Aggregate job records into summary tables and CSV");
  report->add_option("jobs", report_paths, "Job records")->required();
  report->add_option("--histogram", hist_key, "Histogram of per-sweep values (alpha)");
  report->add_option("--bins", bins, "Histogram bins over [-pi/2, pi/2]");
  report->add_option("--out-dir", out_dir, "Directory for CSV outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadConfig;
  }

  try {
    if (*sweep) return cmd_sweep(sweep_flags);
    if (*fit) return cmd_fit(fit_job_path, fit_model, fit_cal_from, fit_output);
    if (*mitigate) return cmd_mitigate(mitigate_flags, circuit_path);
    if (*chsh) return cmd_chsh(chsh_flags, calibration_sweeps, calibration_shots);
    if (*report) return cmd_report(report_paths, hist_key, bins, out_dir);
  } catch (const Error& e) {
    std::cerr << "qshift: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "qshift: " << e.what() << '\n';
    return kBadConfig;
  }
  return kOk;
}
