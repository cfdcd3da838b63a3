#include <doctest.h>

#include <algorithm>
#include <random>

#include "flowdepth/error.hpp"
#include "flowdepth/losses.hpp"
#include "flowdepth/scene.hpp"

using namespace flowdepth;

namespace {

Image pattern(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  Image img(h, w, 1);
  for (double& x : img.channel(0).values()) x = d(rng);
  return img;
}

DifferentialFields single(double c_d, double c_f) {
  DifferentialFields f;
  f.c_d = ScalarField(1, 1, c_d);
  f.c_f = ScalarField(1, 1, c_f);
  f.q_u = f.q_v = ScalarField(1, 1, 0.0);
  f.valid = Mask(1, 1, 1);
  return f;
}

TriangulationResult geometric(const DepthMap& d) {
  TriangulationResult r;
  r.depth_g = d;
  r.valid = Mask(d.height(), d.width(), 1);
  r.code = Grid<std::uint8_t>(d.height(), d.width(), 0);
  return r;
}

// Reverses pixel order along both axes.
template <class T>
Grid<T> flipped(const Grid<T>& g) {
  Grid<T> out(g.height(), g.width());
  for (int v = 0; v < g.height(); ++v)
    for (int u = 0; u < g.width(); ++u) out(u, v) = g(g.width() - 1 - u, g.height() - 1 - v);
  return out;
}

}  // namespace

TEST_CASE("ssim") {
  const Image a = pattern(6, 7, 1);
  const ScalarField same = ssim(a, a);
  for (double s : same.values()) CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  Image inv = a;
  for (double& x : inv.channel(0).values()) x = 1.0 - x;
  const ScalarField opposite = ssim(a, inv);
  for (double s : opposite.values()) CHECK(s < 1.0);
  const Image half(4, 4, 1, 0.5);
  const ScalarField constant = ssim(half, half);
  for (double s : constant.values()) CHECK(s == 1.0);
  CHECK_THROWS_AS(ssim(a, pattern(6, 6, 2)), DimensionError);
}

TEST_CASE("photometric loss") {
  const Image a = pattern(5, 5, 3);
  const Mask all(5, 5, 1);
  CHECK(photometric_loss(a, a, all).value == 0.0);
  const LossValue l1 = photometric_loss(Image(5, 5, 1, 0.2), Image(5, 5, 1, 0.5), all, 0.0);
  CHECK(l1.value == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(l1.valid_pixel_count == 25);
  CHECK(kPhotometricAlpha == 0.85);
  CHECK_THROWS_AS(photometric_loss(a, a, all, 1.5), InvalidArgumentError);
  CHECK_THROWS_AS(photometric_loss(a, a, Mask(5, 5, 0)), NoValidPixelsError);
}

TEST_CASE("cgdc loss") {
  CHECK(cgdc_loss(geometric(DepthMap(1, 1, 2.0)), DepthMap(1, 1, 1.0)).value == 1.0);
  CHECK(cgdc_loss(geometric(DepthMap(1, 1, 1.0)), DepthMap(1, 1, 2.0)).value == 0.5);
  DepthMap d(3, 4);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> dist(1.0, 9.0);
  for (double& x : d.values()) x = dist(rng);
  DepthMap g = d;
  for (double& x : g.values()) x *= dist(rng) / 5.0;
  CHECK(cgdc_loss(geometric(d), d).value == 0.0);
  const double base = cgdc_loss(geometric(g), d).value;
  for (double s : {0.5, 2.0, 8.0}) {
    DepthMap gs = g, ds = d;
    for (double& x : gs.values()) x *= s;
    for (double& x : ds.values()) x *= s;
    CHECK(cgdc_loss(geometric(gs), ds).value == doctest::Approx(base).epsilon(1e-15));
  }
  CHECK(cgdc_loss(geometric(flipped(g)), flipped(d)).value == doctest::Approx(base).epsilon(1e-15));
  TriangulationResult none = geometric(d);
  none.valid.fill(0);
  CHECK_THROWS_AS(cgdc_loss(none, d), NoValidPixelsError);
  DepthMap bad = d;
  bad(1, 1) = -1.0;
  CHECK_THROWS_AS(cgdc_loss(geometric(g), bad), InvalidDepthError);
}

TEST_CASE("dpc loss single pixels") {
  CHECK(dpc_loss(single(2.0, 2.0)).value == 0.0);
  CHECK(dpc_loss(single(2.0, 1.0)).value == doctest::Approx(1.0 / (2.0 + kEpsDpc)));
  const LossValue flat = dpc_loss(single(0.0, 0.01));
  CHECK(flat.value == doctest::Approx(100.0));
  CHECK(flat.guard_dominated_count == 1);
  DifferentialFields empty = single(1, 1);
  empty.valid.fill(0);
  CHECK_THROWS_AS(dpc_loss(empty), NoValidPixelsError);
}

TEST_CASE("bsca loss") {
  FlowField r(1, 1), o(1, 1);
  r.u.fill(2.0);
  o.u.fill(1.0);
  CHECK(bsca_loss(r, o).value == doctest::Approx(1.0 / (1.0 + kEpsFlow)));
  CHECK(bsca_loss(o, o).value == 0.0);
  FlowField zero(1, 1), half(1, 1);
  half.u.fill(0.5);
  const LossValue g = bsca_loss(half, zero);
  CHECK(g.value == doctest::Approx(500.0));
  CHECK(g.guard_dominated_count == 1);
  FlowField r3 = r, o3 = o;
  r3.u.fill(6.0);
  o3.u.fill(3.0);
  CHECK(bsca_loss(r3, o3, 0.0).value == bsca_loss(r, o, 0.0).value);
  CHECK_THROWS_AS(bsca_loss(r, FlowField(2, 1)), DimensionError);
}

TEST_CASE("differential fields on analytic scenes") {
  SceneFile f;
  f.camera = CameraIntrinsics(100, 100, 64, 48);
  f.width = 128;
  f.height = 96;
  f.translation = {1, 0, 5};
  f.spec.a = 0.1;
  f.spec.b = f.spec.c = 0.0;
  SceneBundle b = f.synthesize();
  DifferentialFields d = differential_fields(b.camera, b.motion, b.depth_gt, b.flow_gt);
  CHECK(d.q_u(80, 48) == doctest::Approx(-4.0));
  CHECK(d.q_v(80, 48) == doctest::Approx(0.0));

  f.spec = SceneSpec{};
  f.translation = {0.3, 0.1, 0.05};
  b = f.synthesize();
  d = differential_fields(b.camera, b.motion, b.depth_gt, b.flow_gt);
  const auto& s = f.spec;
  for (int v = 1; v < 95; ++v)
    for (int u = 1; u < 127; ++u) {
      REQUIRE(d.valid(u, v));
      const double expect = 2.0 * (d.q_u(u, v) * s.b + d.q_v(u, v) * s.c) / (s.a + s.b * u + s.c * v);
      CHECK(std::abs(d.c_d(u, v) - expect) < 1e-10);
      CHECK(std::abs(d.c_f(u, v) - expect) < 1e-10);
    }
  CHECK(dpc_loss(d).value < 1e-8);

  DifferentialOptions depth_stencil;
  depth_stencil.stencil = GradientStencil::depth;
  const DifferentialFields dd = differential_fields(b.camera, b.motion, b.depth_gt, b.flow_gt, depth_stencil);
  CHECK(dpc_loss(dd).value < 1e-3);

  f.spec.family = SceneFamily::fronto_plane;
  f.translation = {0, 0, 1};
  b = f.synthesize();
  d = differential_fields(b.camera, b.motion, b.depth_gt, b.flow_gt);
  for (std::size_t i = 0; i < d.valid.size(); ++i)
    if (d.valid.data()[i]) {
      CHECK(std::abs(d.c_f.data()[i]) < 1e-12);
      CHECK(std::abs(d.c_d.data()[i]) < 1e-12);
    }

  f.translation = {1, 0, 0};
  b = f.synthesize();
  CHECK_THROWS_AS(differential_fields(b.camera, b.motion, b.depth_gt, b.flow_gt), LateralMotionError);
}

TEST_CASE("edge-aware smoothness") {
  const Image flat(6, 8, 1, 0.5);
  CHECK(edge_aware_smoothness(DepthMap(6, 8, 3.0), flat).value == 0.0);
  DepthMap ramp(6, 8);
  for (int v = 0; v < 6; ++v)
    for (int u = 0; u < 8; ++u) ramp(u, v) = 1.0 + 0.1 * u;
  // mean depth 1.35; each horizontal step is 0.1 / 1.35, vertical steps are 0
  const double sx = 0.1 / 1.35;
  CHECK(edge_aware_smoothness(ramp, flat).value == doctest::Approx(sx));

  DepthMap step(6, 8, 1.0);
  Image edge(6, 8, 1, 0.2);
  for (int v = 0; v < 6; ++v)
    for (int u = 4; u < 8; ++u) {
      step(u, v) = 2.0;
      edge.channel(0)(u, v) = 0.9;
    }
  CHECK(edge_aware_smoothness(step, edge).value < edge_aware_smoothness(step, flat).value);
  CHECK_THROWS(edge_aware_smoothness(DepthMap(1, 5, 1.0), Image(1, 5, 1)));
}

TEST_CASE("depth metrics closed forms") {
  DepthMap gt(4, 5);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(1.0, 50.0);
  for (double& x : gt.values()) x = dist(rng);
  const Mask all(4, 5, 1);
  const DepthMetrics same = depth_metrics(gt, gt, all);
  CHECK(same.abs_rel == 0.0);
  CHECK(same.delta1 == 1.0);
  CHECK(same.delta3 == 1.0);
  for (double s : {1.2, 2.0, 3.0}) {
    DepthMap p = gt;
    for (double& x : p.values()) x *= s;
    const DepthMetrics m = depth_metrics(p, gt, all);
    CHECK(m.abs_rel == doctest::Approx(s - 1.0).epsilon(1e-14));
    CHECK(m.rmse_log == doctest::Approx(std::log(s)).epsilon(1e-14));
    CHECK(m.delta1 == (s < 1.25 ? 1.0 : 0.0));
    CHECK(m.delta2 == (s < 1.5625 ? 1.0 : 0.0));
    CHECK(m.delta3 == (s < 1.953125 ? 1.0 : 0.0));
    CHECK(m.count == 20);
    const DepthMetrics mf = depth_metrics(flipped(p), flipped(gt), all);
    CHECK(mf.abs_rel == doctest::Approx(m.abs_rel).epsilon(1e-15));
  }
  CHECK_THROWS_AS(depth_metrics(gt, gt, Mask(4, 5, 0)), NoValidPixelsError);
}
