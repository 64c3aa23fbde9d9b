#pragma once

// Statevector simulation of 1-2 qubits and the U3 / virtual-Z / Rx(±π/2)
// gate set.
//
// Basis ordering is little-endian throughout the library: qubit q is bit q
// of the basis index, so for two qubits index = b0 + 2·b1.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "qshift/error.hpp"
#include "qshift/matrix.hpp"
#include "qshift/pulse.hpp"

namespace qshift {

inline constexpr int kMaxQubits = 2;

/// Logical U3(θ, φ, λ). Rewritten to physical pulses before noisy execution.
struct U3 {
  int qubit = 0;
  double theta = 0.0;
  double phi = 0.0;
  double lambda = 0.0;
  bool operator==(const U3&) const = default;
};

/// Frame change Rz(ω); executed exactly.
struct VirtualZ {
  int qubit = 0;
  double angle = 0.0;
  bool operator==(const VirtualZ&) const = default;
};

/// Physical Rx(sign·π/2) pulse carrying its off-resonance error.
struct RxPulse {
  int qubit = 0;
  int sign = 1;
  double delta = 0.0;
  bool operator==(const RxPulse&) const = default;
};

struct CX {
  int control = 0;
  int target = 1;
  bool operator==(const CX&) const = default;
};

/// Terminal measurement of every qubit in the Z basis.
struct Measure {
  bool operator==(const Measure&) const = default;
};

using GateOp = std::variant<U3, VirtualZ, RxPulse, CX, Measure>;

struct Circuit {
  int n_qubits = 1;
  std::vector<GateOp> ops;

  bool operator==(const Circuit&) const = default;

  Circuit& add(GateOp op) {
    ops.push_back(op);
    return *this;
  }

  /// Throws invalid_circuit when a qubit index is out of range, a parameter
  /// is not finite, or a Measure is followed by another op.
  void validate() const;
};

inline void validate_qubit(int qubit, int n_qubits) {
  if (qubit < 0 || qubit >= n_qubits)
    throw Error(ErrorKind::invalid_circuit,
                "qubit index " + std::to_string(qubit) + " out of range for " +
                    std::to_string(n_qubits) + "-qubit circuit");
}

inline void Circuit::validate() const {
  if (n_qubits < 1 || n_qubits > kMaxQubits)
    throw Error(ErrorKind::invalid_circuit, "circuits hold 1 or 2 qubits, got " + std::to_string(n_qubits));
  bool measured = false;
  for (const auto& op : ops) {
    if (measured) throw Error(ErrorKind::invalid_circuit, "Measure must be the last op");
    std::visit(
        [&](const auto& g) {
          using T = std::decay_t<decltype(g)>;
          if constexpr (std::is_same_v<T, U3>) {
            validate_qubit(g.qubit, n_qubits);
            if (!std::isfinite(g.theta) || !std::isfinite(g.phi) || !std::isfinite(g.lambda))
              throw Error(ErrorKind::invalid_circuit, "non-finite U3 angle");
          } else if constexpr (std::is_same_v<T, VirtualZ>) {
            validate_qubit(g.qubit, n_qubits);
            if (!std::isfinite(g.angle)) throw Error(ErrorKind::invalid_circuit, "non-finite VirtualZ angle");
          } else if constexpr (std::is_same_v<T, RxPulse>) {
            validate_qubit(g.qubit, n_qubits);
            if (g.sign != 1 && g.sign != -1) throw Error(ErrorKind::invalid_circuit, "pulse sign must be ±1");
            if (!std::isfinite(g.delta)) throw Error(ErrorKind::invalid_circuit, "non-finite pulse delta");
          } else if constexpr (std::is_same_v<T, CX>) {
            validate_qubit(g.control, n_qubits);
            validate_qubit(g.target, n_qubits);
            if (g.control == g.target) throw Error(ErrorKind::invalid_circuit, "CX control equals target");
          } else {
            measured = true;
          }
        },
        op);
  }
}

inline Mat2 u3_matrix(double theta, double phi, double lambda) {
  require_finite(theta, "theta");
  require_finite(phi, "phi");
  require_finite(lambda, "lambda");
  const double c = std::cos(theta / 2.0);
  const double s = std::sin(theta / 2.0);
  Mat2 m;
  m(0, 0) = c;
  m(0, 1) = -std::polar(1.0, lambda) * s;
  m(1, 0) = std::polar(1.0, phi) * s;
  m(1, 1) = std::polar(1.0, lambda + phi) * c;
  return m;
}

/// Rz(ω) = diag(e^{-iω/2}, e^{iω/2}).
inline Mat2 rz_matrix(double omega) {
  require_finite(omega, "omega");
  Mat2 m;
  m(0, 0) = std::polar(1.0, -omega / 2.0);
  m(1, 1) = std::polar(1.0, omega / 2.0);
  return m;
}

/// Physical sequence for U3(θ, φ, λ) in application order:
/// Rz(λ), Rx(+π/2), Rz(θ), Rx(−π/2), Rz(φ). Both pulses carry `delta`.
inline std::vector<GateOp> transpile_u3(double theta, double phi, double lambda, int qubit = 0,
                                        double delta = 0.0) {
  require_finite(theta, "theta");
  require_finite(phi, "phi");
  require_finite(lambda, "lambda");
  require_finite(delta, "delta");
  return {VirtualZ{qubit, lambda}, RxPulse{qubit, +1, delta}, VirtualZ{qubit, theta},
          RxPulse{qubit, -1, delta}, VirtualZ{qubit, phi}};
}

/// Matrix of a single-qubit op, or nothing for CX / Measure.
inline Mat2 single_qubit_matrix(const GateOp& op) {
  if (const auto* g = std::get_if<U3>(&op)) return u3_matrix(g->theta, g->phi, g->lambda);
  if (const auto* g = std::get_if<VirtualZ>(&op)) return rz_matrix(g->angle);
  if (const auto* g = std::get_if<RxPulse>(&op)) return orr_rx_matrix(g->sign, g->delta);
  throw Error(ErrorKind::invalid_circuit, "op is not a single-qubit gate");
}

/// Product of the single-qubit ops of a sequence (last op leftmost).
inline Mat2 compose(std::span<const GateOp> ops) {
  Mat2 total = Mat2::identity();
  for (const auto& op : ops) total = single_qubit_matrix(op) * total;
  return total;
}

class StateVector {
 public:
  /// |0...0⟩ on `n_qubits` qubits.
  explicit StateVector(int n_qubits = 1) : n_qubits_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits)
      throw Error(ErrorKind::invalid_circuit, "state holds 1 or 2 qubits");
    amps_.assign(std::size_t{1} << n_qubits, cplx{});
    amps_[0] = 1.0;
  }

  /// Normalizes the given amplitudes; throws if their norm vanishes.
  static StateVector from_amplitudes(std::vector<cplx> amps) {
    int n = 0;
    if (amps.size() == 2) n = 1;
    else if (amps.size() == 4) n = 2;
    else throw Error(ErrorKind::invalid_input, "amplitude vector must have length 2 or 4");
    double norm2 = 0.0;
    for (const auto& a : amps) norm2 += std::norm(a);
    if (!(norm2 > 0.0) || !std::isfinite(norm2)) throw Error(ErrorKind::invalid_input, "zero-norm state");
    const double scale = 1.0 / std::sqrt(norm2);
    for (auto& a : amps) a *= scale;
    StateVector s(n);
    s.amps_ = std::move(amps);
    return s;
  }

  int n_qubits() const { return n_qubits_; }
  std::size_t size() const { return amps_.size(); }
  std::span<const cplx> amplitudes() const { return amps_; }
  const cplx& operator[](std::size_t i) const { return amps_[i]; }

  double norm() const {
    double sum = 0.0;
    for (const auto& a : amps_) sum += std::norm(a);
    return std::sqrt(sum);
  }

  std::vector<double> probabilities() const {
    std::vector<double> p(amps_.size());
    for (std::size_t i = 0; i < amps_.size(); ++i) p[i] = std::norm(amps_[i]);
    return p;
  }

  void apply(const Mat2& m, int qubit) {
    validate_qubit(qubit, n_qubits_);
    const std::size_t bit = std::size_t{1} << qubit;
    for (std::size_t i0 = 0; i0 < amps_.size(); ++i0) {
      if (i0 & bit) continue;
      const std::size_t i1 = i0 | bit;
      const cplx a0 = amps_[i0];
      const cplx a1 = amps_[i1];
      amps_[i0] = m(0, 0) * a0 + m(0, 1) * a1;
      amps_[i1] = m(1, 0) * a0 + m(1, 1) * a1;
    }
  }

  void apply_cx(int control, int target) {
    validate_qubit(control, n_qubits_);
    validate_qubit(target, n_qubits_);
    if (control == target) throw Error(ErrorKind::invalid_circuit, "CX control equals target");
    const std::size_t c = std::size_t{1} << control;
    const std::size_t t = std::size_t{1} << target;
    for (std::size_t i = 0; i < amps_.size(); ++i)
      if ((i & c) && !(i & t)) std::swap(amps_[i], amps_[i | t]);
  }

 private:
  int n_qubits_;
  std::vector<cplx> amps_;
};

inline StateVector apply_gate(StateVector state, const GateOp& op) {
  std::visit(
      [&](const auto& g) {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, CX>) {
          state.apply_cx(g.control, g.target);
        } else if constexpr (std::is_same_v<T, Measure>) {
          // sampling happens in the backend
        } else {
          state.apply(single_qubit_matrix(op), g.qubit);
        }
      },
      op);
  return state;
}

inline StateVector simulate(const Circuit& circuit) {
  circuit.validate();
  StateVector state(circuit.n_qubits);
  for (const auto& op : circuit.ops) state = apply_gate(std::move(state), op);
  return state;
}

/// Exact outcome distribution of `circuit` started from |0...0⟩.
inline std::vector<double> ideal_probabilities(const Circuit& circuit) {
  return simulate(circuit).probabilities();
}

/// Probability that `qubit` reads 0, marginalized over the other qubits.
inline double marginal_zero(std::span<const double> probs, int qubit) {
  const std::size_t bit = std::size_t{1} << qubit;
  double p = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (!(i & bit)) p += probs[i];
  return p;
}

}  // namespace qshift
