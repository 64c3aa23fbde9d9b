#pragma once

// Meridian-sweep fits.
//
//   IBM-fit:    P0(θ) = p0 cos²(θ/2) + (1 − p1) sin²(θ/2), (p0, p1) from a calibration
//   Shift-fit:  P0(θ) = p0' cos²((θ+α)/2) + (1 − p1') sin²((θ+α)/2), all three fitted
//
// The Shift-fit is separable: for fixed α the model is linear in (p0', p1'),
// so the least-squares problem is profiled over α (coarse grid, then golden
// section) with an exact box-constrained 2x2 solve inside.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qshift/error.hpp"
#include "qshift/noise.hpp"

namespace qshift {

inline constexpr int kDefaultGridPoints = 31;
inline constexpr double kAlphaBound = std::numbers::pi / 2.0;
inline constexpr int kAlphaGridPoints = 65;

/// θ_i = π i / (n − 1), i = 0..n−1.
inline std::vector<double> theta_grid(int n_points) {
  if (n_points < 2) throw Error(ErrorKind::invalid_parameter, "theta grid needs at least 2 points");
  std::vector<double> grid(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) grid[i] = std::numbers::pi * (static_cast<double>(i) / (n_points - 1));
  return grid;
}

/// One meridian sweep: P(read 0) estimates on a θ grid. `shots == 0` marks
/// analytic (infinite-shot) data. `prep` is the polar angle of the initial
/// state; fits evaluate the model at θ + prep.
struct SweepRecord {
  std::vector<double> thetas;
  std::vector<double> p0_estimates;
  std::int64_t shots = 0;
  std::uint64_t seed = 0;
  double prep = 0.0;
  std::vector<Counts> counts;

  bool operator==(const SweepRecord&) const = default;

  std::size_t size() const { return thetas.size(); }

  void validate() const {
    if (thetas.size() != p0_estimates.size())
      throw Error(ErrorKind::invalid_input, "thetas and p0_estimates differ in length");
    if (!counts.empty() && counts.size() != thetas.size())
      throw Error(ErrorKind::invalid_input, "counts and thetas differ in length");
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      if (i > 0 && !(thetas[i] > thetas[i - 1]))
        throw Error(ErrorKind::invalid_input, "thetas must be strictly increasing");
      if (!(p0_estimates[i] >= 0.0 && p0_estimates[i] <= 1.0))
        throw Error(ErrorKind::invalid_input, "p0 estimate outside [0, 1]");
    }
    if (shots < 0) throw Error(ErrorKind::invalid_input, "negative shot count");
  }
};

inline double shift_model(double theta, double alpha, double p0, double p1) {
  const double half = (theta + alpha) / 2.0;
  const double c = std::cos(half);
  const double s = std::sin(half);
  return p0 * c * c + (1.0 - p1) * s * s;
}

enum class FitModel { shift, ibm, ideal };

inline const char* to_string(FitModel m) {
  switch (m) {
    case FitModel::shift: return "shift";
    case FitModel::ibm: return "ibm";
    case FitModel::ideal: return "ideal";
  }
  return "unknown";
}

inline FitModel fit_model_from_string(const std::string& s) {
  if (s == "shift") return FitModel::shift;
  if (s == "ibm") return FitModel::ibm;
  if (s == "ideal") return FitModel::ideal;
  throw Error(ErrorKind::invalid_input, "unknown fit model '" + s + "'");
}

struct FitResult {
  FitModel model = FitModel::shift;
  double alpha = 0.0;
  double p0 = 1.0;
  double p1 = 1.0;
  double r_squared = std::numeric_limits<double>::quiet_NaN();
  double residual_norm = 0.0;
  bool flagged = false;
  std::string diagnostic;

  // NaN-aware so that flagged results compare equal after a round trip.
  bool operator==(const FitResult& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return model == o.model && same(alpha, o.alpha) && same(p0, o.p0) && same(p1, o.p1) &&
           same(r_squared, o.r_squared) && same(residual_norm, o.residual_norm) && flagged == o.flagged &&
           diagnostic == o.diagnostic;
  }
};

/// Coefficient of determination 1 − SS_res / SS_tot.
inline double r_squared(std::span<const double> observed, std::span<const double> predicted) {
  if (observed.size() != predicted.size()) throw Error(ErrorKind::invalid_input, "R^2 inputs differ in length");
  if (observed.size() < 2) throw Error(ErrorKind::invalid_input, "R^2 needs at least 2 points");
  if (std::all_of(observed.begin(), observed.end(), [&](double y) { return y == observed.front(); }))
    throw Error(ErrorKind::undefined_r_squared, "observed values are all identical");
  const double mean = std::accumulate(observed.begin(), observed.end(), 0.0) / observed.size();
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    ss_tot += (observed[i] - mean) * (observed[i] - mean);
    ss_res += (observed[i] - predicted[i]) * (observed[i] - predicted[i]);
  }
  if (ss_tot == 0.0) throw Error(ErrorKind::undefined_r_squared, "observed values are all identical");
  return 1.0 - ss_res / ss_tot;
}

namespace detail {

inline std::vector<double> predict(const SweepRecord& sweep, double alpha, double p0, double p1) {
  std::vector<double> out(sweep.size());
  for (std::size_t i = 0; i < sweep.size(); ++i) out[i] = shift_model(sweep.thetas[i] + sweep.prep, alpha, p0, p1);
  return out;
}

inline FitResult finish(const SweepRecord& sweep, FitModel model, double alpha, double p0, double p1) {
  FitResult r;
  r.model = model;
  r.alpha = alpha;
  r.p0 = p0;
  r.p1 = p1;
  const auto pred = predict(sweep, alpha, p0, p1);
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) ss += (sweep.p0_estimates[i] - pred[i]) * (sweep.p0_estimates[i] - pred[i]);
  r.residual_norm = std::sqrt(ss);
  try {
    r.r_squared = r_squared(sweep.p0_estimates, pred);
  } catch (const Error& e) {
    r.flagged = true;
    r.diagnostic = e.what();
  }
  return r;
}

/// Best (p0', p1') ∈ [0,1]² for fixed α, and its residual sum of squares.
struct ProfilePoint {
  double p0 = 1.0;
  double p1 = 1.0;
  double ss = std::numeric_limits<double>::infinity();
};

inline ProfilePoint solve_readout_at(const SweepRecord& sweep, double alpha) {
  // model = s + a·c − b·s with c = cos², s = sin²; target z = y − s
  const std::size_t n = sweep.size();
  std::vector<double> c(n), s(n), z(n);
  double cc = 0.0, ss = 0.0, cs = 0.0, cz = 0.0, sz = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double half = (sweep.thetas[i] + sweep.prep + alpha) / 2.0;
    c[i] = std::cos(half) * std::cos(half);
    s[i] = std::sin(half) * std::sin(half);
    z[i] = sweep.p0_estimates[i] - s[i];
    cc += c[i] * c[i];
    ss += s[i] * s[i];
    cs += c[i] * s[i];
    cz += c[i] * z[i];
    sz += s[i] * z[i];
  }
  auto objective = [&](double a, double b) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = z[i] - a * c[i] + b * s[i];
      total += r * r;
    }
    return total;
  };
  ProfilePoint best;
  auto consider = [&](double a, double b) {
    const double f = objective(a, b);
    if (f < best.ss) best = {a, b, f};
  };
  // normal equations: [cc  −cs; −cs  ss] [a; b] = [cz; −sz]
  const double det = cc * ss - cs * cs;
  if (std::abs(det) > 1e-14 * std::max(1.0, cc * ss)) {
    const double a = (cz * ss - cs * sz) / det;
    const double b = (cs * cz - cc * sz) / det;
    if (a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0) consider(a, b);
  }
  // edges: one variable at a bound, the other minimized in 1-D and clamped
  for (double a : {0.0, 1.0}) {
    const double b = ss > 0.0 ? std::clamp((a * cs - sz) / ss, 0.0, 1.0) : 1.0;
    consider(a, b);
  }
  for (double b : {0.0, 1.0}) {
    const double a = cc > 0.0 ? std::clamp((cz + b * cs) / cc, 0.0, 1.0) : 1.0;
    consider(a, b);
  }
  return best;
}

}  // namespace detail

/// Least-squares (p0', p1') with α held fixed. With α = 0 this is the
/// restricted subproblem the Shift-fit must never do worse than.
inline FitResult shift_fit_at(const SweepRecord& sweep, double alpha) {
  sweep.validate();
  const auto pt = detail::solve_readout_at(sweep, alpha);
  return detail::finish(sweep, FitModel::shift, alpha, pt.p0, pt.p1);
}

/// Three-parameter Shift-fit. Deterministic: 65-point α grid over
/// [−π/2, π/2], then golden-section refinement between the neighbours of
/// the best grid point.
inline FitResult shift_fit(const SweepRecord& sweep) {
  sweep.validate();
  if (sweep.size() < 4) throw Error(ErrorKind::invalid_input, "Shift-fit needs at least 4 points");

  auto profile = [&](double alpha) { return detail::solve_readout_at(sweep, alpha).ss; };

  const double step = 2.0 * kAlphaBound / (kAlphaGridPoints - 1);
  int best_k = 0;
  double best_f = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kAlphaGridPoints; ++k) {
    const double f = profile(-kAlphaBound + k * step);
    if (f < best_f) {
      best_f = f;
      best_k = k;
    }
  }
  double best_alpha = -kAlphaBound + best_k * step;

  double lo = std::max(-kAlphaBound, best_alpha - step);
  double hi = std::min(kAlphaBound, best_alpha + step);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = profile(x1);
  double f2 = profile(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = profile(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = profile(x2);
    }
  }
  const double refined = f1 <= f2 ? x1 : x2;
  if (std::min(f1, f2) < best_f) best_alpha = refined;

  const auto pt = detail::solve_readout_at(sweep, best_alpha);
  auto result = detail::finish(sweep, FitModel::shift, best_alpha, pt.p0, pt.p1);
  if (std::abs(pt.p0 + pt.p1 - 1.0) < 1e-9) {
    result.flagged = true;
    result.alpha = std::numeric_limits<double>::quiet_NaN();
    if (!result.diagnostic.empty()) result.diagnostic += "; ";
    result.diagnostic += "flat model (p0' + p1' = 1): alpha is indeterminate";
  }
  return result;
}

/// Readout calibration read off the sweep endpoints, the way the standard
/// calibration measures |0⟩ and Rx(π)|0⟩: p0 = P0(0), p1 = 1 − P0(π).
inline QubitReadout endpoint_calibration(const SweepRecord& sweep) {
  if (sweep.size() < 2) throw Error(ErrorKind::missing_calibration, "sweep too short for endpoint calibration");
  constexpr double tol = 1e-9;
  const double first = sweep.thetas.front() + sweep.prep;
  const double last = sweep.thetas.back() + sweep.prep;
  if (std::abs(first) > tol || std::abs(last - std::numbers::pi) > tol)
    throw Error(ErrorKind::missing_calibration, "sweep does not start at 0 and end at pi");
  return QubitReadout{sweep.p0_estimates.front(), 1.0 - sweep.p0_estimates.back()};
}

/// IBM-fit: no free parameters, the curve is fixed by the calibration.
inline FitResult ibm_fit(const SweepRecord& sweep, const QubitReadout& cal) {
  sweep.validate();
  cal.validate();
  return detail::finish(sweep, FitModel::ibm, 0.0, cal.p0, cal.p1);
}

/// Ideal curve cos²(θ/2): p0 = p1 = 1, α = 0.
inline FitResult ideal_fit(const SweepRecord& sweep) {
  sweep.validate();
  return detail::finish(sweep, FitModel::ideal, 0.0, 1.0, 1.0);
}

struct Stat {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t n = 0;
};

/// Mean, sample standard deviation (0 for a single value), min and max.
/// NaN entries are skipped.
inline Stat describe(std::span<const double> values) {
  Stat s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    ++s.n;
  }
  if (s.n == 0) return Stat{std::numeric_limits<double>::quiet_NaN(), 0.0, std::numeric_limits<double>::quiet_NaN(),
                            std::numeric_limits<double>::quiet_NaN(), 0};
  if (s.min == s.max) {
    s.mean = s.min;
    return s;
  }
  s.mean = sum / s.n;
  if (s.n > 1) {
    double sq = 0.0;
    for (double v : values)
      if (!std::isnan(v)) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / (s.n - 1));
  }
  return s;
}

namespace detail {

inline double round_half_away(double x) {
  // nudge exact decimal ties that binary floating point lands just below
  const double nudge = std::copysign(1e-9 * std::max(1.0, std::abs(x)), x);
  return std::round(x + nudge);
}

}  // namespace detail

/// Concise uncertainty notation "m(s)": s rounded to one significant digit,
/// m rounded to the same decimal place. (-0.141, 0.068) -> "-0.14(7)".
inline std::string concise(double mean, double std) {
  char buf[64];
  if (std::isnan(mean)) return "nan";
  if (!(std >= 0.0) || !std::isfinite(std)) throw Error(ErrorKind::invalid_input, "std must be finite and >= 0");
  if (std == 0.0) {
    std::snprintf(buf, sizeof buf, "%.3f(0)", mean);
    return buf;
  }
  int place = static_cast<int>(std::floor(std::log10(std)));
  double digit = detail::round_half_away(std / std::pow(10.0, place));
  if (digit >= 10.0) {
    ++place;
    digit = 1.0;
  }
  const double scale = std::pow(10.0, place);
  const double rounded = detail::round_half_away(mean / scale) * scale;
  const int decimals = std::max(0, -place);
  const double shown_std = place > 0 ? digit * scale : digit;
  std::snprintf(buf, sizeof buf, "%.*f(%.0f)", decimals, rounded == 0.0 ? 0.0 : rounded, shown_std);
  return buf;
}

struct FitSummary {
  Stat alpha;
  Stat p0;
  Stat p1;
  Stat r2_shift;
  Stat r2_ibm;
  std::size_t n_sweeps = 0;
  std::size_t n_flagged = 0;

  std::string alpha_concise() const { return concise(alpha.mean, alpha.std); }
  std::string p0_concise() const { return concise(p0.mean, p0.std); }
  std::string p1_concise() const { return concise(p1.mean, p1.std); }
};

struct SweepFits {
  std::vector<FitResult> shift;
  std::vector<FitResult> ibm;
  FitSummary summary;

  bool operator==(const SweepFits& o) const { return shift == o.shift && ibm == o.ibm; }
  bool any_flagged() const { return summary.n_flagged > 0; }
};

/// Summary over the non-flagged Shift-fits; `ibm[i]` pairs with `shift[i]`.
inline FitSummary summarize(std::span<const FitResult> shift, std::span<const FitResult> ibm) {
  FitSummary summary;
  std::vector<double> alpha, p0, p1, r2s, r2i;
  for (std::size_t i = 0; i < shift.size(); ++i) {
    const auto& f = shift[i];
    if (f.flagged) {
      ++summary.n_flagged;
      continue;
    }
    alpha.push_back(f.alpha);
    p0.push_back(f.p0);
    p1.push_back(f.p1);
    r2s.push_back(f.r_squared);
    if (i < ibm.size() && !ibm[i].flagged) r2i.push_back(ibm[i].r_squared);
  }
  summary.n_sweeps = shift.size();
  summary.alpha = describe(alpha);
  summary.p0 = describe(p0);
  summary.p1 = describe(p1);
  summary.r2_shift = describe(r2s);
  summary.r2_ibm = describe(r2i);
  return summary;
}

/// One Shift-fit and one IBM-fit per sweep, plus the summary over the
/// non-flagged Shift-fits. The IBM calibration is `cal` when given, else
/// each sweep's own endpoints.
inline SweepFits fit_sweeps(std::span<const SweepRecord> sweeps, std::optional<QubitReadout> cal = std::nullopt) {
  if (sweeps.empty()) throw Error(ErrorKind::invalid_input, "no sweeps to fit");
  SweepFits out;
  for (const auto& sweep : sweeps) {
    FitResult shift;
    try {
      shift = shift_fit(sweep);
    } catch (const Error& e) {
      shift.flagged = true;
      shift.alpha = std::numeric_limits<double>::quiet_NaN();
      shift.diagnostic = e.what();
    }
    FitResult ibm;
    ibm.model = FitModel::ibm;
    try {
      ibm = ibm_fit(sweep, cal ? *cal : endpoint_calibration(sweep));
    } catch (const Error& e) {
      ibm.flagged = true;
      ibm.diagnostic = e.what();
    }
    out.shift.push_back(shift);
    out.ibm.push_back(ibm);
  }
  out.summary = summarize(out.shift, out.ibm);
  return out;
}

}  // namespace qshift
