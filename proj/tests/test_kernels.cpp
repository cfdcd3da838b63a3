#include <doctest.h>

#include <cstring>
#include <random>
#include <vector>

#include "flowdepth/kernels.hpp"

using namespace flowdepth;

namespace {

std::vector<double> random_values(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> x(n);
  for (double& v : x) v = dist(rng);
  return x;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Runs fn once per supported level and checks every output vector matches the scalar run bit for bit.
template <class Fn>
void compare_levels(Fn&& fn) {
  const simd::Level saved = simd::active_level();
  simd::set_level(simd::Level::scalar);
  const auto ref = fn();
  for (auto level : {simd::Level::avx2}) {
    if (!simd::supported(level)) {
      MESSAGE("level not available: ", simd::level_name(level));
      continue;
    }
    simd::set_level(level);
    const auto got = fn();
    REQUIRE(got.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(bitwise_equal(got[i], ref[i]));
  }
  simd::set_level(saved);
}

// Odd widths exercise the scalar tails of the vector loops.
constexpr int kWidths[] = {1, 3, 4, 7, 33};

}  // namespace

TEST_CASE("detected level is supported") {
  CHECK(simd::supported(simd::Level::scalar));
  CHECK(simd::supported(simd::detected_level()));
}

TEST_CASE("rigid flow rows agree across levels") {
  for (int w : kWidths) {
    auto depth = random_values(w, 0.5, 30.0, w);
    if (w > 2) depth[1] = -1.0;
    kernels::ProjectionParams p;
    p.fx = 97.0;
    p.fy = 101.0;
    p.cx = 13.5;
    p.cy = 9.25;
    p.rotation = {0.9998, -0.0174, 0.0087, 0.0175, 0.9998, -0.0052, -0.0086, 0.0054, 0.9999};
    p.translation = {0.3, -0.1, 0.05};
    compare_levels([&] {
      std::vector<double> fu(w), fv(w);
      std::vector<std::uint8_t> valid(w);
      kernels::rigid_flow_row(p, 4, depth, fu, fv, valid);
      std::vector<double> vd(valid.begin(), valid.end());
      return std::vector<std::vector<double>>{fu, fv, vd};
    });
  }
}

TEST_CASE("divergence and gradient rows agree across levels") {
  for (int w : {3, 4, 7, 33}) {
    const int h = 5;
    const auto fu = random_values(static_cast<std::size_t>(w) * h, -3, 3, 11);
    const auto fv = random_values(static_cast<std::size_t>(w) * h, -3, 3, 12);
    for (int v = 0; v < h; ++v)
      compare_levels([&] {
        std::vector<double> div(w), du(w), dv(w);
        kernels::divergence_row(fu, fv, w, h, v, div);
        kernels::central_gradient_row(fu, w, h, v, du, dv);
        return std::vector<std::vector<double>>{div, du, dv};
      });
  }
}

TEST_CASE("triangulation rows agree across levels") {
  for (int w : kWidths) {
    const auto fu = random_values(w, -5, 5, 21);
    const auto fv = random_values(w, -5, 5, 22);
    kernels::TriangulationParams p;
    p.fx = 90;
    p.fy = 95;
    p.cx = 10;
    p.cy = 8;
    p.translation = {0.2, 0.1, 0.3};
    compare_levels([&] {
      std::vector<double> d(w), den(w);
      kernels::triangulate_row(p, 3, fu, fv, d, den);
      return std::vector<std::vector<double>>{d, den};
    });
  }
}

TEST_CASE("differential rows agree across levels") {
  for (int w : kWidths)
    for (bool inverse : {true, false}) {
      auto depth = random_values(w, 1, 10, 31);
      if (w > 2) depth[2] = -0.05;  // |D + t3| below eps_geo
      const auto div = random_values(w, -1, 1, 32);
      const auto gu = random_values(w, -1, 1, 33);
      const auto gv = random_values(w, -1, 1, 34);
      kernels::DifferentialParams p;
      p.t3 = 0.05;
      p.offset_u = 40;
      p.offset_v = 30;
      p.inverse_form = inverse;
      compare_levels([&] {
        std::vector<double> cf(w), cd(w), qu(w), qv(w), inv(w);
        kernels::differential_row(p, 6, depth, div, gu, gv, cf, cd, qu, qv);
        kernels::shifted_inverse_row(p.t3, p.eps_geo, depth, inv);
        return std::vector<std::vector<double>>{cf, cd, qu, qv, inv};
      });
    }
}
