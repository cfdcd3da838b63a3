#pragma once

#include <algorithm>
#include <cmath>

#include "flowdepth/grid.hpp"

namespace flowdepth::detail {

inline double value_of(double x) { return x; }
template <class Jet>
double value_of(const Jet& x) {
  return x.a;
}

/// Bilinear sample of a grid at a (possibly differentiable) position; the
/// position is clamped to the grid and a clamped axis carries no derivative.
template <class T>
T bilinear(const Grid<double>& img, const T& x, const T& y) {
  const int w = img.width();
  const int h = img.height();
  const double xv = value_of(x);
  const double yv = value_of(y);
  const T xc = xv < 0.0 ? T(0.0) : (xv > w - 1 ? T(static_cast<double>(w - 1)) : x);
  const T yc = yv < 0.0 ? T(0.0) : (yv > h - 1 ? T(static_cast<double>(h - 1)) : y);
  const int x0 = std::clamp(static_cast<int>(std::floor(value_of(xc))), 0, std::max(w - 2, 0));
  const int y0 = std::clamp(static_cast<int>(std::floor(value_of(yc))), 0, std::max(h - 2, 0));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const T ax = xc - static_cast<double>(x0);
  const T ay = yc - static_cast<double>(y0);
  const T bx = 1.0 - ax;
  const T top = bx * img(x0, y0) + ax * img(x1, y0);
  const T bottom = bx * img(x0, y1) + ax * img(x1, y1);
  return (1.0 - ay) * top + ay * bottom;
}

}  // namespace flowdepth::detail
