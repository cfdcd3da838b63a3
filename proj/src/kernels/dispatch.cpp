#include <atomic>

#include "flowdepth/error.hpp"
#include "flowdepth/kernels.hpp"
#include "kernels/impl.hpp"

namespace flowdepth::simd {
namespace {

bool cpu_has_avx2() {
#if defined(FLOWDEPTH_HAS_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

std::atomic<int>& active_storage() {
  static std::atomic<int> level{static_cast<int>(detected_level())};
  return level;
}

}  // namespace

bool supported(Level level) {
  switch (level) {
    case Level::scalar:
      return true;
    case Level::avx2:
      return cpu_has_avx2();
  }
  return false;
}

Level detected_level() {
  static const Level best = supported(Level::avx2) ? Level::avx2 : Level::scalar;
  return best;
}

Level active_level() { return static_cast<Level>(active_storage().load(std::memory_order_relaxed)); }

void set_level(Level level) {
  if (!supported(level)) throw InvalidArgumentError("SIMD level not supported: " + std::string(level_name(level)));
  active_storage().store(static_cast<int>(level), std::memory_order_relaxed);
}

std::string_view level_name(Level level) {
  switch (level) {
    case Level::scalar:
      return "scalar";
    case Level::avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace flowdepth::simd

namespace flowdepth::kernels {
namespace {

const KernelTable& table() {
#if defined(FLOWDEPTH_HAS_AVX2)
  if (simd::active_level() == simd::Level::avx2) return avx2_table();
#endif
  return scalar_table();
}

void require(bool ok, const char* what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace

void rigid_flow_row(const ProjectionParams& params, int v, std::span<const double> depth, std::span<double> flow_u,
                    std::span<double> flow_v, std::span<std::uint8_t> valid) {
  const auto n = depth.size();
  require(flow_u.size() == n && flow_v.size() == n && valid.size() == n, "rigid_flow_row: row lengths differ");
  table().rigid_flow_row(params, v, static_cast<int>(n), depth.data(), flow_u.data(), flow_v.data(), valid.data());
}

void divergence_row(std::span<const double> fu, std::span<const double> fv, int width, int height, int v,
                    std::span<double> out) {
  require(width >= 2 && height >= 2, "divergence_row: field too small");
  require(fu.size() == static_cast<std::size_t>(width) * height && fv.size() == fu.size(), "divergence_row: size");
  require(out.size() == static_cast<std::size_t>(width) && v >= 0 && v < height, "divergence_row: row");
  table().divergence_row(fu.data(), fv.data(), width, height, v, out.data());
}

void central_gradient_row(std::span<const double> field, int width, int height, int v, std::span<double> du,
                          std::span<double> dv) {
  require(width >= 2 && height >= 2, "central_gradient_row: field too small");
  require(field.size() == static_cast<std::size_t>(width) * height, "central_gradient_row: size");
  require(du.size() == static_cast<std::size_t>(width) && dv.size() == du.size() && v >= 0 && v < height,
          "central_gradient_row: row");
  table().central_gradient_row(field.data(), width, height, v, du.data(), dv.data());
}

void triangulate_row(const TriangulationParams& params, int v, std::span<const double> flow_u,
                     std::span<const double> flow_v, std::span<double> depth, std::span<double> denominator) {
  const auto n = flow_u.size();
  require(flow_v.size() == n && depth.size() == n && denominator.size() == n, "triangulate_row: row lengths differ");
  table().triangulate_row(params, v, static_cast<int>(n), flow_u.data(), flow_v.data(), depth.data(),
                          denominator.data());
}

void differential_row(const DifferentialParams& params, int v, std::span<const double> depth,
                      std::span<const double> divergence, std::span<const double> grad_u,
                      std::span<const double> grad_v, std::span<double> c_f, std::span<double> c_d,
                      std::span<double> q_u, std::span<double> q_v) {
  const auto n = depth.size();
  require(divergence.size() == n && grad_u.size() == n && grad_v.size() == n && c_f.size() == n &&
              c_d.size() == n && q_u.size() == n && q_v.size() == n,
          "differential_row: row lengths differ");
  table().differential_row(params, v, static_cast<int>(n), depth.data(), divergence.data(), grad_u.data(),
                           grad_v.data(), c_f.data(), c_d.data(), q_u.data(), q_v.data());
}

void shifted_inverse_row(double shift, double eps, std::span<const double> depth, std::span<double> out) {
  require(out.size() == depth.size(), "shifted_inverse_row: row lengths differ");
  table().shifted_inverse_row(shift, eps, static_cast<int>(depth.size()), depth.data(), out.data());
}

}  // namespace flowdepth::kernels
