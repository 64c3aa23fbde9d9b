#pragma once

// The two noise channels of the model: the off-resonance error on physical
// Rx(±π/2) pulses (see pulse.hpp) and the readout confusion matrix, plus
// seeded shot sampling.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qshift/core.hpp"
#include "qshift/error.hpp"
#include "qshift/pulse.hpp"

namespace qshift {

using Counts = std::vector<std::int64_t>;

/// Readout fidelities of one qubit: p0 = P(read 0 | prepared 0),
/// p1 = P(read 1 | prepared 1).
struct QubitReadout {
  double p0 = 1.0;
  double p1 = 1.0;

  bool operator==(const QubitReadout&) const = default;

  void validate() const {
    if (!(p0 >= 0.0 && p0 <= 1.0 && p1 >= 0.0 && p1 <= 1.0))
      throw Error(ErrorKind::invalid_parameter, "readout probabilities must lie in [0, 1]");
  }

  /// Column-stochastic [[p0, 1−p1], [1−p0, p1]], row-major.
  std::array<double, 4> matrix() const { return {p0, 1.0 - p1, 1.0 - p0, p1}; }

  double determinant() const { return p0 + p1 - 1.0; }
};

/// Dense real matrix, row-major. Only used for 2^n x 2^n with n <= 2.
struct RealMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::vector<double> operator*(std::span<const double> v) const {
    if (v.size() != cols) throw Error(ErrorKind::invalid_input, "matrix-vector dimension mismatch");
    std::vector<double> out(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out[r] += (*this)(r, c) * v[c];
    return out;
  }

  RealMatrix transpose() const {
    RealMatrix t(cols, rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  friend RealMatrix operator*(const RealMatrix& a, const RealMatrix& b) {
    RealMatrix out(a.rows, b.cols);
    for (std::size_t r = 0; r < a.rows; ++r)
      for (std::size_t k = 0; k < a.cols; ++k)
        for (std::size_t c = 0; c < b.cols; ++c) out(r, c) += a(r, k) * b(k, c);
    return out;
  }
};

/// Kronecker product a ⊗ b.
inline RealMatrix kron(const RealMatrix& a, const RealMatrix& b) {
  RealMatrix out(a.rows * b.rows, a.cols * b.cols);
  for (std::size_t ar = 0; ar < a.rows; ++ar)
    for (std::size_t ac = 0; ac < a.cols; ++ac)
      for (std::size_t br = 0; br < b.rows; ++br)
        for (std::size_t bc = 0; bc < b.cols; ++bc)
          out(ar * b.rows + br, ac * b.cols + bc) = a(ar, ac) * b(br, bc);
  return out;
}

/// Per-qubit readout calibration; the joint matrix is the tensor product
/// M_{n-1} ⊗ ... ⊗ M_0 (qubit 0 is the least significant index bit).
struct ReadoutCal {
  std::vector<QubitReadout> qubits;

  bool operator==(const ReadoutCal&) const = default;

  static ReadoutCal ideal(int n_qubits) {
    return ReadoutCal{std::vector<QubitReadout>(static_cast<std::size_t>(n_qubits))};
  }

  int n_qubits() const { return static_cast<int>(qubits.size()); }
  std::size_t dim() const { return std::size_t{1} << qubits.size(); }

  void validate() const {
    for (const auto& q : qubits) q.validate();
  }

  /// Restriction to the first `n` qubits.
  ReadoutCal first(int n) const {
    if (n > n_qubits()) throw Error(ErrorKind::missing_calibration, "calibration covers fewer qubits than requested");
    return ReadoutCal{{qubits.begin(), qubits.begin() + n}};
  }

  RealMatrix matrix() const {
    RealMatrix total(1, 1);
    total(0, 0) = 1.0;
    for (const auto& q : qubits) {
      RealMatrix single(2, 2);
      single.data.assign(q.matrix().begin(), q.matrix().end());
      total = kron(single, total);
    }
    return total;
  }
};

/// observed = M_cal · true, applied factor by factor.
inline std::vector<double> apply_readout(const ReadoutCal& cal, std::span<const double> true_probs) {
  if (true_probs.size() != cal.dim())
    throw Error(ErrorKind::invalid_input, "probability vector length " + std::to_string(true_probs.size()) +
                                              " does not match " + std::to_string(cal.dim()));
  std::vector<double> v(true_probs.begin(), true_probs.end());
  for (int q = 0; q < cal.n_qubits(); ++q) {
    const auto m = cal.qubits[q].matrix();
    const std::size_t bit = std::size_t{1} << q;
    for (std::size_t i0 = 0; i0 < v.size(); ++i0) {
      if (i0 & bit) continue;
      const std::size_t i1 = i0 | bit;
      const double a = v[i0];
      const double b = v[i1];
      v[i0] = m[0] * a + m[1] * b;
      v[i1] = m[2] * a + m[3] * b;
    }
  }
  return v;
}

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
inline double uniform53(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

/// Multinomial draw of `shots` outcomes. Each shot is placed by inverse CDF
/// on one std::mt19937_64 draw, so equal inputs give equal counts on every
/// conforming standard library.
inline Counts sample_counts(std::span<const double> probabilities, std::int64_t shots, std::uint64_t seed) {
  if (shots < 1) throw Error(ErrorKind::invalid_input, "shots must be >= 1");
  if (probabilities.empty()) throw Error(ErrorKind::invalid_input, "empty probability vector");
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0)) throw Error(ErrorKind::invalid_input, "negative or NaN probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::invalid_input, "probabilities do not sum to 1");

  std::vector<double> cumulative(probabilities.size());
  double running = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    running += probabilities[i] / total;
    cumulative[i] = running;
  }
  // last populated bin absorbs rounding in the running sum
  std::size_t last = probabilities.size() - 1;
  while (last > 0 && probabilities[last] == 0.0) --last;
  for (std::size_t i = last; i < cumulative.size(); ++i) cumulative[i] = 1.0;

  std::mt19937_64 gen(seed);
  Counts counts(probabilities.size(), 0);
  for (std::int64_t s = 0; s < shots; ++s) {
    const double u = uniform53(gen);
    std::size_t k = 0;
    while (u >= cumulative[k]) ++k;
    ++counts[k];
  }
  return counts;
}

/// Noise applied by the simulator: δ per qubit and the readout calibration.
struct NoiseConfig {
  std::vector<double> delta;
  ReadoutCal readout;

  bool operator==(const NoiseConfig&) const = default;

  static NoiseConfig ideal(int n_qubits) {
    return NoiseConfig{std::vector<double>(static_cast<std::size_t>(n_qubits), 0.0), ReadoutCal::ideal(n_qubits)};
  }

  int n_qubits() const { return static_cast<int>(delta.size()); }

  void validate() const {
    if (delta.size() != readout.qubits.size())
      throw Error(ErrorKind::invalid_parameter, "delta and readout must cover the same qubits");
    for (double d : delta) require_finite(d, "delta");
    readout.validate();
  }
};

/// Rewrites every logical U3 on qubit q into its physical pulse sequence
/// with δ = deltas[q]. Other ops, including explicit RxPulse ops, pass
/// through unchanged.
inline Circuit lower_to_pulses(const Circuit& circuit, std::span<const double> deltas) {
  Circuit out{circuit.n_qubits, {}};
  for (const auto& op : circuit.ops) {
    if (const auto* g = std::get_if<U3>(&op)) {
      const double d = static_cast<std::size_t>(g->qubit) < deltas.size() ? deltas[g->qubit] : 0.0;
      for (auto& p : transpile_u3(g->theta, g->phi, g->lambda, g->qubit, d)) out.ops.push_back(p);
    } else {
      out.ops.push_back(op);
    }
  }
  return out;
}

/// Exact P(read 0) for the meridian sweep gate U3(θ, −π/2, π/2) on |0⟩ with
/// both pulses off-resonant by δ, followed by readout confusion.
inline double noisy_p0_orr(double theta, double delta, const QubitReadout& cal) {
  require_finite(theta, "theta");
  require_finite(delta, "delta");
  cal.validate();
  Circuit c{1, {}};
  for (auto& op : transpile_u3(theta, -std::numbers::pi / 2.0, std::numbers::pi / 2.0, 0, delta)) c.add(op);
  const auto observed = apply_readout(ReadoutCal{{cal}}, ideal_probabilities(c));
  return observed[0];
}

/// Second-order small-δ expansion of noisy_p0_orr.
inline double p0_orr_expansion(double theta, double delta, const QubitReadout& cal) {
  return (1.0 + cal.p0 - cal.p1) / 2.0 +
         (cal.p0 + cal.p1 - 1.0) / 2.0 *
             ((1.0 - 2.0 * delta * delta) * std::cos(theta) - 2.0 * delta * std::sin(theta));
}

}  // namespace qshift
