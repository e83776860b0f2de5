// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "engel/core/jet.hpp"
#include "engel/core/point.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace engel {

inline Vec singular_values(const Mat& m)
{
  if (m.size() == 0) return Vec();
  return Eigen::JacobiSVD<Mat>(m).singularValues();
}

/// Numerical rank with a cutoff relative to the largest singular value.
inline int relative_rank(const Vec& sv, double tol)
{
  if (sv.size() == 0 || sv[0] == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > tol * sv[0]) ++r;
  return r;
}

inline Mat orthonormal_basis(const Mat& columns)
{
  Eigen::JacobiSVD<Mat> svd(columns, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(columns.cols());
}

/// Principal angles (radians) between the column spans of a and b, from the
/// sines (singular values of the part of span(a) orthogonal to span(b)).
inline Vec principal_angles(const Mat& a, const Mat& b)
{
  const Mat qa = orthonormal_basis(a), qb = orthonormal_basis(b);
  const Mat resid = qa - qb * (qb.transpose() * qa);
  Vec sines = singular_values(resid);
  for (Eigen::Index i = 0; i < sines.size(); ++i) sines[i] = std::asin(std::clamp(sines[i], 0.0, 1.0));
  return sines;
}

inline double max_principal_angle(const Mat& a, const Mat& b)
{
  const Vec ang = principal_angles(a, b);
  return ang.size() ? ang.maxCoeff() : 0.0;
}

/// Angle between two lines through the origin (orientation ignored).
inline double line_angle(const Vec& a, const Vec& b)
{
  const Vec ua = a.normalized(), ub = b.normalized();
  const double s = (ua - ua.dot(ub) * ub).norm();
  return std::atan2(s, std::abs(ua.dot(ub)));
}

/// Determinant of a square matrix of jets given by columns.
inline Jet det_jets(const std::vector<JetTuple>& cols)
{
  const int n = static_cast<int>(cols.size());
  if (n == 1) return cols[0][0];
  if (n == 2) return cols[0][0] * cols[1][1] - cols[1][0] * cols[0][1];
  // expansion along the first column
  Jet sum(cols[0][0].nvars(), cols[0][0].order());
  for (int row = 0; row < n; ++row) {
    std::vector<JetTuple> minor;
    for (int c = 1; c < n; ++c) {
      JetTuple col;
      for (int r = 0; r < n; ++r)
        if (r != row) col.push_back(cols[c][r]);
      minor.push_back(std::move(col));
    }
    const Jet term = cols[0][row] * det_jets(minor);
    if (row % 2) sum -= term;
    else sum += term;
  }
  return sum;
}

}  // namespace engel
