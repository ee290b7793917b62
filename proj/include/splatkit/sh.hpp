// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatkit/types.hpp"

namespace splat {

// Real spherical harmonics color evaluation, bands 0..3, in the de-facto
// splatting layout: row 0 holds the DC term, rows 1..(deg+1)^2-1 the
// higher bands, columns are RGB. The evaluated polynomial gets a +0.5
// offset and is clamped at 0 from below.

inline constexpr double kShC0 = 0.28209479177387814;
inline constexpr double kShC1 = 0.4886025119029199;
inline constexpr double kShC2[5] = {1.0925484305920792, -1.0925484305920792,
                                    0.31539156525252005, -1.0925484305920792,
                                    0.5462742152960396};
inline constexpr double kShC3[7] = {-0.5900435899266435, 2.890611442640554,
                                    -0.4570457994644658, 0.3731763325901154,
                                    -0.4570457994644658, 1.445305721320277,
                                    -0.5900435899266435};

inline constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

// Basis values for a unit direction, in coefficient-row order.
template <typename T>
inline void sh_basis(const Vec3<T>& dir, int degree, T* basis) {
  const T x = dir[0], y = dir[1], z = dir[2];
  basis[0] = T(kShC0);
  if (degree < 1) return;
  basis[1] = T(-kShC1) * y;
  basis[2] = T(kShC1) * z;
  basis[3] = T(-kShC1) * x;
  if (degree < 2) return;
  const T xx = x * x, yy = y * y, zz = z * z;
  const T xy = x * y, yz = y * z, xz = x * z;
  basis[4] = T(kShC2[0]) * xy;
  basis[5] = T(kShC2[1]) * yz;
  basis[6] = T(kShC2[2]) * (T(2) * zz - xx - yy);
  basis[7] = T(kShC2[3]) * xz;
  basis[8] = T(kShC2[4]) * (xx - yy);
  if (degree < 3) return;
  basis[9] = T(kShC3[0]) * y * (T(3) * xx - yy);
  basis[10] = T(kShC3[1]) * xy * z;
  basis[11] = T(kShC3[2]) * y * (T(4) * zz - xx - yy);
  basis[12] = T(kShC3[3]) * z * (T(2) * zz - T(3) * xx - T(3) * yy);
  basis[13] = T(kShC3[4]) * x * (T(4) * zz - xx - yy);
  basis[14] = T(kShC3[5]) * z * (xx - yy);
  basis[15] = T(kShC3[6]) * x * (xx - T(3) * yy);
}

// d(basis_k)/d(dir) for every row, laid out as basis-major triples.
template <typename T>
inline void sh_basis_jacobian(const Vec3<T>& dir, int degree, Vec3<T>* dbasis) {
  const T x = dir[0], y = dir[1], z = dir[2];
  dbasis[0].setZero();
  if (degree < 1) return;
  dbasis[1] = Vec3<T>(T(0), T(-kShC1), T(0));
  dbasis[2] = Vec3<T>(T(0), T(0), T(kShC1));
  dbasis[3] = Vec3<T>(T(-kShC1), T(0), T(0));
  if (degree < 2) return;
  dbasis[4] = T(kShC2[0]) * Vec3<T>(y, x, T(0));
  dbasis[5] = T(kShC2[1]) * Vec3<T>(T(0), z, y);
  dbasis[6] = T(kShC2[2]) * Vec3<T>(T(-2) * x, T(-2) * y, T(4) * z);
  dbasis[7] = T(kShC2[3]) * Vec3<T>(z, T(0), x);
  dbasis[8] = T(kShC2[4]) * Vec3<T>(T(2) * x, T(-2) * y, T(0));
  if (degree < 3) return;
  const T xx = x * x, yy = y * y, zz = z * z;
  dbasis[9] = T(kShC3[0]) * Vec3<T>(T(6) * x * y, T(3) * xx - T(3) * yy, T(0));
  dbasis[10] = T(kShC3[1]) * Vec3<T>(y * z, x * z, x * y);
  dbasis[11] = T(kShC3[2]) * Vec3<T>(T(-2) * x * y, T(4) * zz - xx - T(3) * yy, T(8) * y * z);
  dbasis[12] = T(kShC3[3]) * Vec3<T>(T(-6) * x * z, T(-6) * y * z, T(6) * zz - T(3) * xx - T(3) * yy);
  dbasis[13] = T(kShC3[4]) * Vec3<T>(T(4) * zz - T(3) * xx - yy, T(-2) * x * y, T(8) * x * z);
  dbasis[14] = T(kShC3[5]) * Vec3<T>(T(2) * x * z, T(-2) * y * z, xx - yy);
  dbasis[15] = T(kShC3[6]) * Vec3<T>(T(3) * xx - T(3) * yy, T(-6) * x * y, T(0));
}

template <typename T>
inline Vec3<T> evaluate_sh(const ShMatrix<T>& sh, const Vec3<T>& view_dir, int degree) {
  const int n = sh_coeff_count(degree);
  T basis[16];
  sh_basis(view_dir, degree, basis);
  Vec3<T> rgb = Vec3<T>::Zero();
  for (int k = 0; k < n; ++k) rgb += basis[k] * sh.row(k).transpose();
  rgb.array() += T(0.5);
  return rgb.cwiseMax(T(0));
}

// Backward of evaluate_sh. d_color is the upstream gradient on the clamped
// output; channels that were clamped to zero pass no gradient.
template <typename T>
inline void evaluate_sh_backward(const ShMatrix<T>& sh, const Vec3<T>& view_dir, int degree,
                                 const Vec3<T>& d_color, ShMatrix<T>& d_sh, Vec3<T>& d_dir) {
  const int n = sh_coeff_count(degree);
  T basis[16];
  Vec3<T> dbasis[16];
  sh_basis(view_dir, degree, basis);
  sh_basis_jacobian(view_dir, degree, dbasis);

  Vec3<T> raw = Vec3<T>::Zero();
  for (int k = 0; k < n; ++k) raw += basis[k] * sh.row(k).transpose();
  raw.array() += T(0.5);
  Vec3<T> d_raw = d_color;
  for (int c = 0; c < 3; ++c)
    if (raw[c] < T(0)) d_raw[c] = T(0);

  d_sh.setZero(sh.rows(), 3);
  d_dir.setZero();
  for (int k = 0; k < n; ++k) {
    d_sh.row(k) = (basis[k] * d_raw).transpose();
    d_dir += dbasis[k] * sh.row(k).transpose().dot(d_raw);
  }
}

}  // namespace splat
