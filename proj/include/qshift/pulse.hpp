#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "qshift/error.hpp"
#include "qshift/matrix.hpp"

namespace qshift {

/// Off-resonance strength of a qubit's Rx(±π/2) pulses. The pulse area is
/// fixed at π/2, so δ is the only free parameter.
struct OrrParams {
  double delta = 0.0;

  double d() const { return std::sqrt(1.0 + delta * delta); }
};

inline void require_finite(double value, const char* name) {
  if (!std::isfinite(value))
    throw Error(ErrorKind::invalid_parameter, std::string(name) + " must be finite");
}

/// Physical Rx(sign·π/2) pulse with off-resonance error δ:
///
///   [ cos(πd/4) − i(δ/d) sin(πd/4)      ∓ i/d sin(πd/4)          ]
///   [      ∓ i/d sin(πd/4)         cos(πd/4) + i(δ/d) sin(πd/4)  ]
///
/// with d = √(1+δ²). At δ = 0 this is exp(∓iπσX/4). The matrix equals
/// exp[(iπ/4)(∓σX − δσZ)]; with this sign a positive δ over-rotates the
/// U3 meridian sweep, giving a fitted shift α ≈ +2δ.
inline Mat2 orr_rx_matrix(int sign, double delta) {
  if (sign != 1 && sign != -1) throw Error(ErrorKind::invalid_parameter, "pulse sign must be +1 or -1");
  require_finite(delta, "delta");
  const double d = OrrParams{delta}.d();
  const double angle = std::numbers::pi * d / 4.0;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const cplx i{0.0, 1.0};
  Mat2 m;
  m(0, 0) = c - i * (delta / d) * s;
  m(0, 1) = -static_cast<double>(sign) * i * s / d;
  m(1, 0) = m(0, 1);
  m(1, 1) = c + i * (delta / d) * s;
  return m;
}

}  // namespace qshift
