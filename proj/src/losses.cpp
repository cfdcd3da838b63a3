#include "flowdepth/losses.hpp"

#include <cmath>
#include <string>

#include "flowdepth/kernels.hpp"
#include "flowdepth/parallel.hpp"
#include "ssim.hpp"
#include "summation.hpp"

namespace flowdepth {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels())
    throw DimensionError(std::string(what) + ": image shapes differ");
}

LossValue finish(const detail::CompensatedSum& sum, long count, long guarded, const char* what) {
  if (count == 0) throw NoValidPixelsError(std::string(what) + ": no valid pixels");
  return {sum.value() / static_cast<double>(count), count, guarded};
}

}  // namespace

namespace {

/// Channel-averaged 1 - SSIM.
ScalarField dissimilarity(const Image& a, const Image& b) {
  const int h = a.height(), w = a.width();
  ScalarField out(h, w);
  parallel_rows(h, [&](int v) {
    double wa[9], wb[9];
    for (int u = 0; u < w; ++u) {
      double acc = 0.0;
      for (int c = 0; c < a.channels(); ++c) {
        detail::gather_window(a.channel(c), u, v, wa);
        detail::gather_window(b.channel(c), u, v, wb);
        acc += detail::dissimilarity_window(wa, wb);
      }
      out(u, v) = acc / a.channels();
    }
  });
  return out;
}

}  // namespace

ScalarField ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  ScalarField out = dissimilarity(a, b);
  for (double& x : out.values()) x = 1.0 - x;
  return out;
}

LossValue photometric_loss(const Image& target, const Image& warped, const Mask& mask, double alpha) {
  require_same_shape(target, warped, "photometric_loss");
  if (mask.height() != target.height() || mask.width() != target.width())
    throw DimensionError("photometric_loss: mask shape differs");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgumentError("photometric_loss: alpha must lie in [0, 1]");
  const ScalarField dis = dissimilarity(target, warped);
  const int channels = target.channels();
  detail::CompensatedSum sum;
  long count = 0;
  for (int v = 0; v < target.height(); ++v)
    for (int u = 0; u < target.width(); ++u) {
      if (!mask(u, v)) continue;
      double l1 = 0.0;
      for (int c = 0; c < channels; ++c) l1 += std::abs(target.channel(c)(u, v) - warped.channel(c)(u, v));
      sum += alpha * dis(u, v) / 2.0 + (1.0 - alpha) * (l1 / channels);
      ++count;
    }
  return finish(sum, count, 0, "photometric_loss");
}

LossValue cgdc_loss(const TriangulationResult& d_g, const DepthMap& d_c, double eps_div) {
  if (!d_g.depth_g.same_shape(d_c)) throw DimensionError("cgdc_loss: depth shapes differ");
  detail::CompensatedSum sum;
  long count = 0, guarded = 0;
  for (int v = 0; v < d_c.height(); ++v)
    for (int u = 0; u < d_c.width(); ++u) {
      if (!d_g.valid(u, v)) continue;
      const double dc = d_c(u, v);
      if (!(dc > 0.0) || !std::isfinite(dc)) throw InvalidDepthError("cgdc_loss: contextual depth must be positive");
      if (dc < eps_div) ++guarded;
      sum += std::abs(d_g.depth_g(u, v) - dc) / std::max(dc, eps_div);
      ++count;
    }
  return finish(sum, count, guarded, "cgdc_loss");
}

namespace {

DifferentialFields assemble(const CameraIntrinsics& camera, const RigidMotion& motion, const DepthMap& d_c,
                            const FlowField& f_tra, const GradientField* analytic, const DifferentialOptions& opt) {
  const Eigen::Vector3d t = motion.translation();
  if (!(std::abs(t.z()) > opt.eps_t3))
    throw LateralMotionError("differential_fields: |t3| is too small for the divergence relation");
  if (!d_c.same_shape(f_tra.u) || !f_tra.u.same_shape(f_tra.v) || !f_tra.u.same_shape(f_tra.valid))
    throw DimensionError("differential_fields: depth and flow shapes differ");
  const int h = d_c.height(), w = d_c.width();
  if (analytic && (!analytic->du.same_shape(d_c) || !analytic->dv.same_shape(d_c)))
    throw DimensionError("differential_fields: gradient shape differs");

  const ScalarField div = divergence(f_tra);
  GradientField grad;
  kernels::DifferentialParams p;
  p.t3 = t.z();
  p.offset_u = camera.cx + camera.fx * t.x() / t.z();
  p.offset_v = camera.cy + camera.fy * t.y() / t.z();
  p.eps_geo = opt.eps_geo;
  if (analytic) {
    grad = *analytic;
    for (double& x : grad.du.values()) x *= 2.0;
    for (double& x : grad.dv.values()) x *= 2.0;
    p.inverse_form = false;
  } else if (opt.stencil == GradientStencil::inverse_depth) {
    ScalarField inv(h, w);
    parallel_rows(h, [&](int v) { kernels::shifted_inverse_row(t.z(), opt.eps_geo, d_c.row(v), inv.row(v)); });
    grad = central_gradient(inv);
    p.inverse_form = true;
  } else {
    grad = central_gradient(d_c);
    p.inverse_form = false;
  }

  DifferentialFields out{ScalarField(h, w), ScalarField(h, w), Grid<double>(h, w), Grid<double>(h, w), Mask(h, w, 0)};
  auto usable = [&](int u, int v) {
    const double d = d_c(u, v);
    return f_tra.valid(u, v) && std::isfinite(f_tra.u(u, v)) && std::isfinite(f_tra.v(u, v)) && d > 0.0 &&
           std::isfinite(d) && std::abs(d + t.z()) >= opt.eps_geo;
  };
  parallel_rows(h, [&](int v) {
    kernels::differential_row(p, v, d_c.row(v), div.row(v), grad.du.row(v), grad.dv.row(v), out.c_f.row(v),
                              out.c_d.row(v), out.q_u.row(v), out.q_v.row(v));
    for (int u = 0; u < w; ++u) {
      const bool ok = u > 0 && v > 0 && u + 1 < w && v + 1 < h && usable(u, v) && usable(u - 1, v) &&
                      usable(u + 1, v) && usable(u, v - 1) && usable(u, v + 1) && std::isfinite(out.c_f(u, v)) &&
                      std::isfinite(out.c_d(u, v));
      out.valid(u, v) = ok ? 1 : 0;
      if (!ok) {
        out.c_f(u, v) = 0.0;
        out.c_d(u, v) = 0.0;
      }
    }
  });
  return out;
}

}  // namespace

DifferentialFields differential_fields(const CameraIntrinsics& camera, const RigidMotion& motion,
                                       const DepthMap& d_c, const FlowField& f_tra,
                                       const DifferentialOptions& options) {
  return assemble(camera, motion, d_c, f_tra, nullptr, options);
}

DifferentialFields differential_fields(const CameraIntrinsics& camera, const RigidMotion& motion,
                                       const DepthMap& d_c, const FlowField& f_tra,
                                       const GradientField& analytic_gradient, const DifferentialOptions& options) {
  return assemble(camera, motion, d_c, f_tra, &analytic_gradient, options);
}

LossValue dpc_loss(const DifferentialFields& fields, double eps_dpc) {
  detail::CompensatedSum sum;
  long count = 0, guarded = 0;
  for (int v = 0; v < fields.valid.height(); ++v)
    for (int u = 0; u < fields.valid.width(); ++u) {
      if (!fields.valid(u, v)) continue;
      const double cd = fields.c_d(u, v);
      if (std::abs(cd) < eps_dpc) ++guarded;
      sum += std::abs(cd - fields.c_f(u, v)) / (std::abs(cd) + eps_dpc);
      ++count;
    }
  return finish(sum, count, guarded, "dpc_loss");
}

LossValue bsca_loss(const FlowField& f_r, const FlowField& f_o, double eps_flow) {
  if (!f_r.u.same_shape(f_o.u)) throw DimensionError("bsca_loss: flow shapes differ");
  detail::CompensatedSum sum;
  long count = 0, guarded = 0;
  for (int v = 0; v < f_r.height(); ++v)
    for (int u = 0; u < f_r.width(); ++u) {
      if (!f_r.valid(u, v) || !f_o.valid(u, v)) continue;
      const double norm_o = std::abs(f_o.u(u, v)) + std::abs(f_o.v(u, v));
      if (norm_o < eps_flow) ++guarded;
      const double diff = std::abs(f_r.u(u, v) - f_o.u(u, v)) + std::abs(f_r.v(u, v) - f_o.v(u, v));
      sum += diff / (norm_o + eps_flow);
      ++count;
    }
  return finish(sum, count, guarded, "bsca_loss");
}

LossValue edge_aware_smoothness(const DepthMap& depth, const Image& image) {
  const int h = depth.height(), w = depth.width();
  if (image.height() != h || image.width() != w) throw DimensionError("edge_aware_smoothness: shapes differ");
  if (h < 2 || w < 2) throw DimensionError("edge_aware_smoothness needs at least 2 x 2");
  const double mean = detail::compensated_mean(depth.values());
  if (!(mean > 0.0)) throw InvalidDepthError("edge_aware_smoothness: mean depth must be positive");
  const int channels = image.channels();
  auto image_step = [&](int u0, int v0, int u1, int v1) {
    double s = 0.0;
    for (int c = 0; c < channels; ++c) s += std::abs(image.channel(c)(u1, v1) - image.channel(c)(u0, v0));
    return std::exp(-s / channels);
  };
  detail::CompensatedSum sx, sy;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u + 1 < w; ++u)
      sx += std::abs(depth(u + 1, v) / mean - depth(u, v) / mean) * image_step(u, v, u + 1, v);
  for (int v = 0; v + 1 < h; ++v)
    for (int u = 0; u < w; ++u)
      sy += std::abs(depth(u, v + 1) / mean - depth(u, v) / mean) * image_step(u, v, u, v + 1);
  const double value = sx.value() / (static_cast<double>(h) * (w - 1)) + sy.value() / (static_cast<double>(h - 1) * w);
  return {value, static_cast<long>(depth.size()), 0};
}

DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt, const Mask& mask) {
  if (!pred.same_shape(gt) || !pred.same_shape(mask)) throw DimensionError("depth_metrics: shapes differ");
  DepthMetrics m;
  detail::CompensatedSum abs_rel, sq_rel, sq, sq_log, log10;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask.data()[i]) continue;
    const double p = pred.data()[i], g = gt.data()[i];
    if (!(p > 0.0) || !(g > 0.0) || !std::isfinite(p) || !std::isfinite(g))
      throw InvalidDepthError("depth_metrics: depths must be positive on the mask");
    const double diff = p - g;
    abs_rel += std::abs(diff) / g;
    sq_rel += diff * diff / g;
    sq += diff * diff;
    const double dl = std::log(p) - std::log(g);
    sq_log += dl * dl;
    log10 += std::abs(std::log10(p) - std::log10(g));
    const double ratio = std::max(p / g, g / p);
    m.delta1 += ratio < 1.25 ? 1.0 : 0.0;
    m.delta2 += ratio < 1.25 * 1.25 ? 1.0 : 0.0;
    m.delta3 += ratio < 1.25 * 1.25 * 1.25 ? 1.0 : 0.0;
    ++m.count;
  }
  if (m.count == 0) throw NoValidPixelsError("depth_metrics: empty mask");
  const double n = static_cast<double>(m.count);
  m.abs_rel = abs_rel.value() / n;
  m.sq_rel = sq_rel.value() / n;
  m.rmse = std::sqrt(sq.value() / n);
  m.rmse_log = std::sqrt(sq_log.value() / n);
  m.log10 = log10.value() / n;
  m.delta1 /= n;
  m.delta2 /= n;
  m.delta3 /= n;
  return m;
}

}  // namespace flowdepth
