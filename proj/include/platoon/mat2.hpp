#pragma once

#include <array>
#include <cmath>

namespace platoon {

using Vec2 = std::array<double, 2>;

// Dense 2x2 matrix, row-major.
struct Mat2 {
  double m00{0.0}, m01{0.0}, m10{0.0}, m11{0.0};

  static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

  // Double-integrator companion form [[0, 1], [pos_gain, vel_gain]].
  static constexpr Mat2 companion(double pos_gain, double vel_gain) {
    return {0.0, 1.0, pos_gain, vel_gain};
  }

  constexpr Mat2 transposed() const { return {m00, m10, m01, m11}; }
  constexpr double trace() const { return m00 + m11; }
  constexpr double det() const { return m00 * m11 - m01 * m10; }
  constexpr bool symmetric() const { return m01 == m10; }

  friend constexpr Mat2 operator+(const Mat2& a, const Mat2& b) {
    return {a.m00 + b.m00, a.m01 + b.m01, a.m10 + b.m10, a.m11 + b.m11};
  }
  friend constexpr Mat2 operator-(const Mat2& a, const Mat2& b) {
    return {a.m00 - b.m00, a.m01 - b.m01, a.m10 - b.m10, a.m11 - b.m11};
  }
  friend constexpr Mat2 operator*(const Mat2& a, const Mat2& b) {
    return {a.m00 * b.m00 + a.m01 * b.m10, a.m00 * b.m01 + a.m01 * b.m11,
            a.m10 * b.m00 + a.m11 * b.m10, a.m10 * b.m01 + a.m11 * b.m11};
  }
  friend constexpr Mat2 operator*(double s, const Mat2& a) {
    return {s * a.m00, s * a.m01, s * a.m10, s * a.m11};
  }
  friend constexpr Vec2 operator*(const Mat2& a, const Vec2& z) {
    return {a.m00 * z[0] + a.m01 * z[1], a.m10 * z[0] + a.m11 * z[1]};
  }
  friend constexpr bool operator==(const Mat2&, const Mat2&) = default;
};

inline double norm(const Vec2& z) { return std::hypot(z[0], z[1]); }

// z^T M z
constexpr double quadratic_form(const Mat2& m, const Vec2& z) {
  return z[0] * (m.m00 * z[0] + m.m01 * z[1]) + z[1] * (m.m10 * z[0] + m.m11 * z[1]);
}

struct SymmetricEigenvalues {
  double min;
  double max;
};

// Closed form for the symmetric part's spectrum. Only the upper triangle is read.
inline SymmetricEigenvalues symmetric_eigenvalues(const Mat2& s) {
  const double mean = 0.5 * (s.m00 + s.m11);
  const double radius = std::hypot(0.5 * (s.m00 - s.m11), s.m01);
  return {mean - radius, mean + radius};
}

// Real 2x2 matrix is Hurwitz iff trace < 0 and det > 0.
constexpr bool is_hurwitz(const Mat2& a) { return a.trace() < 0.0 && a.det() > 0.0; }

}  // namespace platoon
