#include "kernels/impl.hpp"
#include "kernels/pixel.hpp"

namespace flowdepth::kernels {
namespace {

void rigid_flow_row(const ProjectionParams& p, int v, int width, const double* depth, double* fu, double* fv,
                    std::uint8_t* valid) {
  for (int u = 0; u < width; ++u) pixel::rigid_flow(p, u, v, depth[u], fu[u], fv[u], valid[u]);
}

void divergence_row(const double* fu, const double* fv, int width, int height, int v, double* out) {
  const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(v) * width;
  for (int u = 0; u < width; ++u) {
    const double du = pixel::axis_difference(fu + row + u, u, width, 1);
    const double dv = pixel::axis_difference(fv + row + u, v, height, width);
    out[u] = du + dv;
  }
}

void central_gradient_row(const double* f, int width, int height, int v, double* du, double* dv) {
  const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(v) * width;
  for (int u = 0; u < width; ++u) {
    du[u] = pixel::axis_difference(f + row + u, u, width, 1);
    dv[u] = pixel::axis_difference(f + row + u, v, height, width);
  }
}

void triangulate_row(const TriangulationParams& p, int v, int width, const double* fu, const double* fv,
                     double* depth, double* den) {
  for (int u = 0; u < width; ++u) pixel::triangulate(p, u, v, fu[u], fv[u], depth[u], den[u]);
}

void differential_row(const DifferentialParams& p, int v, int width, const double* depth, const double* div,
                      const double* gu, const double* gv, double* cf, double* cd, double* qu, double* qv) {
  for (int u = 0; u < width; ++u)
    pixel::differential(p, u, v, depth[u], div[u], gu[u], gv[u], cf[u], cd[u], qu[u], qv[u]);
}

void shifted_inverse_row(double shift, double eps, int width, const double* depth, double* out) {
  for (int u = 0; u < width; ++u) out[u] = pixel::shifted_inverse(shift, eps, depth[u]);
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{rigid_flow_row,  divergence_row,   central_gradient_row,
                                 triangulate_row, differential_row, shifted_inverse_row};
  return table;
}

}  // namespace flowdepth::kernels
