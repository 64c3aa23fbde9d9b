#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>

namespace qshift {

using cplx = std::complex<double>;

/// Dense row-major N x N complex matrix. N is 2 or 4 in practice.
template <std::size_t N>
struct SquareMatrix {
  std::array<cplx, N * N> data{};

  static constexpr std::size_t dim = N;

  static SquareMatrix identity() {
    SquareMatrix m;
    for (std::size_t i = 0; i < N; ++i) m(i, i) = 1.0;
    return m;
  }

  cplx& operator()(std::size_t r, std::size_t c) { return data[r * N + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data[r * N + c]; }

  SquareMatrix adjoint() const {
    SquareMatrix out;
    for (std::size_t r = 0; r < N; ++r)
      for (std::size_t c = 0; c < N; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
  }

  friend SquareMatrix operator*(const SquareMatrix& a, const SquareMatrix& b) {
    SquareMatrix out;
    for (std::size_t r = 0; r < N; ++r)
      for (std::size_t k = 0; k < N; ++k) {
        const cplx a_rk = a(r, k);
        for (std::size_t c = 0; c < N; ++c) out(r, c) += a_rk * b(k, c);
      }
    return out;
  }

  friend SquareMatrix operator*(cplx s, SquareMatrix m) {
    for (auto& x : m.data) x *= s;
    return m;
  }
};

using Mat2 = SquareMatrix<2>;
using Mat4 = SquareMatrix<4>;

template <std::size_t N>
double max_abs_diff(const SquareMatrix<N>& a, const SquareMatrix<N>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < N * N; ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  return worst;
}

/// Largest entrywise deviation of U·U† from the identity.
template <std::size_t N>
double unitarity_error(const SquareMatrix<N>& u) {
  return max_abs_diff(u * u.adjoint(), SquareMatrix<N>::identity());
}

/// Entrywise distance between `a` and `b` after removing the global phase.
/// The phase is taken from the largest-magnitude entry of `b`.
template <std::size_t N>
double phase_insensitive_distance(const SquareMatrix<N>& a, const SquareMatrix<N>& b) {
  std::size_t pivot = 0;
  for (std::size_t i = 1; i < N * N; ++i)
    if (std::abs(b.data[i]) > std::abs(b.data[pivot])) pivot = i;
  if (std::abs(a.data[pivot]) == 0.0) return max_abs_diff(a, b);
  const cplx phase = (a.data[pivot] / std::abs(a.data[pivot])) /
                     (b.data[pivot] / std::abs(b.data[pivot]));
  return max_abs_diff(a, phase * b);
}

}  // namespace qshift
