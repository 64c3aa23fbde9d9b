#pragma once

// Report generation: Table-I style fit summaries, Table-II style CHSH rows,
// plot series, histograms and R² statistics, emitted as CSV (header row,
// fixed column order, 12 significant digits) or fixed-width text.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "qshift/error.hpp"
#include "qshift/experiments.hpp"
#include "qshift/fitting.hpp"
#include "qshift/job.hpp"

namespace qshift {

inline std::string csv_number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct SummaryRow {
  std::string job_id;
  std::string backend_id;
  int qubit = 0;
  std::size_t n_sweeps = 0;
  Stat alpha;
  Stat p0;
  Stat p1;
  Stat r2_shift;
  Stat r2_ibm;
};

struct ChshRow {
  std::string run_id;
  std::string backend_id;
  std::array<int, 2> qubits{0, 1};
  std::array<double, 2> alpha{};
  double c_raw = 0.0;
  double c_corr = 0.0;
  double sigma_raw = 0.0;
  double sigma_corr = 0.0;
};

struct PlotSeries {
  std::string name;
  std::string job_id;
  std::string backend_id;
  std::vector<double> x;
  std::vector<double> y;
};

struct R2Stats {
  Stat ideal;
  Stat shift;
  Stat ibm;
};

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<std::size_t> counts;
};

struct ReportBundle {
  std::vector<SummaryRow> summary_rows;
  std::vector<ChshRow> chsh_rows;
  std::vector<PlotSeries> plot_series;
  R2Stats r2_stats;
};

inline void require_provenance(const std::string& job_id, const std::string& backend_id) {
  if (job_id.empty() || backend_id.empty())
    throw Error(ErrorKind::invalid_input, "report row lacks job_id or backend_id provenance");
}

inline const SweepFits& ensure_fits(JobRecord& job) {
  if (!job.fits) job.fits = fit_job(job);
  return *job.fits;
}

inline SummaryRow summary_row(JobRecord job) {
  require_provenance(job.job_id, job.backend_id);
  const auto& fits = ensure_fits(job);
  return SummaryRow{job.job_id, job.backend_id, job.qubit(), job.sweeps.size(), fits.summary.alpha,
                    fits.summary.p0, fits.summary.p1, fits.summary.r2_shift, fits.summary.r2_ibm};
}

/// R² of the ideal curve, the Shift-fit and the IBM-fit over every sweep of
/// every job. Flagged fits are skipped.
inline R2Stats r2_statistics(std::span<const JobRecord> jobs) {
  std::vector<double> ideal, shift, ibm;
  for (JobRecord job : jobs) {
    const auto& fits = ensure_fits(job);
    for (std::size_t i = 0; i < job.sweeps.size(); ++i) {
      if (!fits.shift[i].flagged) shift.push_back(fits.shift[i].r_squared);
      if (!fits.ibm[i].flagged) ibm.push_back(fits.ibm[i].r_squared);
      const auto id = ideal_fit(job.sweeps[i]);
      if (!id.flagged) ideal.push_back(id.r_squared);
    }
  }
  if (shift.empty() && ibm.empty()) throw Error(ErrorKind::empty_report, "no fitted sweeps to summarize");
  return R2Stats{describe(ideal), describe(shift), describe(ibm)};
}

/// Fixed-width bins over [lo, hi]; values outside the range land in the
/// first or last bin so the counts always sum to the number of values.
inline Histogram histogram(std::span<const double> values, int bins, double lo = -std::numbers::pi / 2.0,
                           double hi = std::numbers::pi / 2.0) {
  if (bins < 1) throw Error(ErrorKind::invalid_parameter, "histogram needs at least one bin");
  if (!(hi > lo)) throw Error(ErrorKind::invalid_parameter, "histogram range is empty");
  Histogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (int b = 0; b <= bins; ++b) h.edges.push_back(lo + (hi - lo) * b / bins);
  for (double v : values) {
    if (std::isnan(v)) continue;
    const int b = std::clamp(static_cast<int>(std::floor((v - lo) / (hi - lo) * bins)), 0, bins - 1);
    ++h.counts[b];
  }
  return h;
}

/// Per-sweep Shift-fit α of every job, in job then sweep order.
inline std::vector<double> sweep_alphas(std::span<const JobRecord> jobs) {
  std::vector<double> out;
  for (JobRecord job : jobs)
    for (const auto& f : ensure_fits(job).shift)
      if (!f.flagged) out.push_back(f.alpha);
  return out;
}

/// Sweep data plus Shift- and IBM-fit curves for each sweep, and the
/// per-sweep α against sweep index.
inline std::vector<PlotSeries> plot_series(JobRecord job) {
  require_provenance(job.job_id, job.backend_id);
  const auto& fits = ensure_fits(job);
  std::vector<PlotSeries> out;
  PlotSeries alpha{"alpha_by_sweep", job.job_id, job.backend_id, {}, {}};
  for (std::size_t s = 0; s < job.sweeps.size(); ++s) {
    const auto& sweep = job.sweeps[s];
    const std::string tag = "sweep" + std::to_string(s);
    PlotSeries data{tag + "_p0", job.job_id, job.backend_id, sweep.thetas, sweep.p0_estimates};
    PlotSeries shift{tag + "_shift_fit", job.job_id, job.backend_id, sweep.thetas, {}};
    PlotSeries ibm{tag + "_ibm_fit", job.job_id, job.backend_id, sweep.thetas, {}};
    const auto& fs = fits.shift[s];
    const auto& fi = fits.ibm[s];
    for (double t : sweep.thetas) {
      shift.y.push_back(fs.flagged ? std::nan("") : shift_model(t + sweep.prep, fs.alpha, fs.p0, fs.p1));
      ibm.y.push_back(fi.flagged ? std::nan("") : shift_model(t + sweep.prep, 0.0, fi.p0, fi.p1));
    }
    out.push_back(std::move(data));
    out.push_back(std::move(shift));
    out.push_back(std::move(ibm));
    alpha.x.push_back(static_cast<double>(s));
    alpha.y.push_back(fs.alpha);
  }
  out.push_back(std::move(alpha));
  return out;
}

inline std::string summary_csv(std::span<const SummaryRow> rows) {
  std::ostringstream os;
  os << "job_id,backend_id,computer,qubit,n_sweeps,alpha,p0,p1,alpha_mean,alpha_std,p0_mean,p0_std,p1_mean,p1_std,"
        "r2_shift_mean,r2_ibm_mean\n";
  for (const auto& r : rows) {
    require_provenance(r.job_id, r.backend_id);
    os << csv_field(r.job_id) << ',' << csv_field(r.backend_id) << ',' << csv_field(r.backend_id) << ',' << r.qubit
       << ',' << r.n_sweeps << ',' << concise(r.alpha.mean, r.alpha.std) << ',' << concise(r.p0.mean, r.p0.std) << ','
       << concise(r.p1.mean, r.p1.std) << ',' << csv_number(r.alpha.mean) << ',' << csv_number(r.alpha.std) << ','
       << csv_number(r.p0.mean) << ',' << csv_number(r.p0.std) << ',' << csv_number(r.p1.mean) << ','
       << csv_number(r.p1.std) << ',' << csv_number(r.r2_shift.mean) << ',' << csv_number(r.r2_ibm.mean) << '\n';
  }
  return os.str();
}

inline std::string chsh_csv(std::span<const ChshRow> rows) {
  std::ostringstream os;
  os << "run_id,backend_id,computer,qubits,alpha0,alpha1,c_raw,c_corr,c_raw_concise,c_corr_concise,sigma_raw,sigma_corr\n";
  for (const auto& r : rows) {
    require_provenance(r.run_id, r.backend_id);
    os << csv_field(r.run_id) << ',' << csv_field(r.backend_id) << ',' << csv_field(r.backend_id) << ",\""
       << r.qubits[0] << ',' << r.qubits[1] << "\"," << csv_number(r.alpha[0]) << ',' << csv_number(r.alpha[1]) << ','
       << csv_number(r.c_raw) << ',' << csv_number(r.c_corr) << ',' << concise(r.c_raw, r.sigma_raw) << ','
       << concise(r.c_corr, r.sigma_corr) << ',' << csv_number(r.sigma_raw) << ',' << csv_number(r.sigma_corr) << '\n';
  }
  return os.str();
}

inline std::string r2_csv(const R2Stats& s) {
  std::ostringstream os;
  os << "statistic,ideal,shift,ibm\n";
  os << "mean," << csv_number(s.ideal.mean) << ',' << csv_number(s.shift.mean) << ',' << csv_number(s.ibm.mean) << '\n';
  os << "std," << csv_number(s.ideal.std) << ',' << csv_number(s.shift.std) << ',' << csv_number(s.ibm.std) << '\n';
  os << "min," << csv_number(s.ideal.min) << ',' << csv_number(s.shift.min) << ',' << csv_number(s.ibm.min) << '\n';
  os << "max," << csv_number(s.ideal.max) << ',' << csv_number(s.shift.max) << ',' << csv_number(s.ibm.max) << '\n';
  return os.str();
}

inline std::string histogram_csv(const Histogram& h) {
  std::ostringstream os;
  os << "bin,lower,upper,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    os << b << ',' << csv_number(h.edges[b]) << ',' << csv_number(h.edges[b + 1]) << ',' << h.counts[b] << '\n';
  return os.str();
}

inline std::string plot_csv(std::span<const PlotSeries> series) {
  std::ostringstream os;
  os << "series,job_id,backend_id,x,y\n";
  for (const auto& s : series) {
    require_provenance(s.job_id, s.backend_id);
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << csv_field(s.name) << ',' << csv_field(s.job_id) << ',' << csv_field(s.backend_id) << ','
         << csv_number(s.x[i]) << ',' << csv_number(s.y[i]) << '\n';
  }
  return os.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline double parse_number(const std::string& s) {
  if (s == "nan") return std::nan("");
  return std::stod(s);
}

}  // namespace detail

/// Inverse of plot_csv; consecutive rows with the same series, job and
/// backend form one series.
inline std::vector<PlotSeries> parse_plot_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "series,job_id,backend_id,x,y")
    throw Error(ErrorKind::invalid_input, "not a plot-series CSV");
  std::vector<PlotSeries> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 5) throw Error(ErrorKind::invalid_input, "malformed plot CSV row: " + line);
    if (out.empty() || out.back().name != f[0] || out.back().job_id != f[1] || out.back().backend_id != f[2])
      out.push_back(PlotSeries{f[0], f[1], f[2], {}, {}});
    out.back().x.push_back(detail::parse_number(f[3]));
    out.back().y.push_back(detail::parse_number(f[4]));
  }
  return out;
}

/// Table-I style fixed-width text.
inline std::string summary_table(std::span<const SummaryRow> rows) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-22s %-14s %5s %6s %-12s %-12s %-12s\n", "job_id", "computer", "qubit", "sweeps",
                "alpha", "p0'", "p1'");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-22s %-14s %5d %6zu %-12s %-12s %-12s\n", r.job_id.c_str(), r.backend_id.c_str(),
                  r.qubit, r.n_sweeps, concise(r.alpha.mean, r.alpha.std).c_str(), concise(r.p0.mean, r.p0.std).c_str(),
                  concise(r.p1.mean, r.p1.std).c_str());
    os << buf;
  }
  return os.str();
}

inline std::string r2_table(const R2Stats& s) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-6s %10s %10s %10s\n", "R^2", "Ideal", "Shift-fit", "IBM");
  os << buf;
  const std::pair<const char*, double Stat::*> rows[] = {
      {"Mean", &Stat::mean}, {"STD", &Stat::std}, {"Min", &Stat::min}, {"Max", &Stat::max}};
  for (const auto& [label, field] : rows) {
    std::snprintf(buf, sizeof buf, "%-6s %10.4f %10.4f %10.4f\n", label, s.ideal.*field, s.shift.*field, s.ibm.*field);
    os << buf;
  }
  return os.str();
}

inline std::string chsh_table(std::span<const ChshRow> rows) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s %-7s %-10s %-10s %-12s %-12s\n", "computer", "qubits", "alpha0", "alpha1",
                "C_raw", "C_corr");
  os << buf;
  for (const auto& r : rows) {
    const std::string qubits = std::to_string(r.qubits[0]) + "," + std::to_string(r.qubits[1]);
    std::snprintf(buf, sizeof buf, "%-14s %-7s %-10.4f %-10.4f %-12s %-12s\n", r.backend_id.c_str(), qubits.c_str(),
                  r.alpha[0], r.alpha[1], concise(r.c_raw, r.sigma_raw).c_str(), concise(r.c_corr, r.sigma_corr).c_str());
    os << buf;
  }
  return os.str();
}

/// Summary rows, plot series and R² statistics for a set of jobs.
inline ReportBundle build_report(std::span<const JobRecord> jobs) {
  if (jobs.empty()) throw Error(ErrorKind::empty_report, "no jobs given");
  ReportBundle bundle;
  for (const auto& job : jobs) {
    bundle.summary_rows.push_back(summary_row(job));
    for (auto& s : plot_series(job)) bundle.plot_series.push_back(std::move(s));
  }
  bundle.r2_stats = r2_statistics(jobs);
  return bundle;
}

}  // namespace qshift
