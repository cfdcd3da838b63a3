#pragma once

#include <cstdint>

#include "flowdepth/kernels.hpp"

namespace flowdepth::kernels {

struct KernelTable {
  void (*rigid_flow_row)(const ProjectionParams&, int v, int width, const double* depth, double* fu, double* fv,
                         std::uint8_t* valid);
  void (*divergence_row)(const double* fu, const double* fv, int width, int height, int v, double* out);
  void (*central_gradient_row)(const double* f, int width, int height, int v, double* du, double* dv);
  void (*triangulate_row)(const TriangulationParams&, int v, int width, const double* fu, const double* fv,
                          double* depth, double* den);
  void (*differential_row)(const DifferentialParams&, int v, int width, const double* depth, const double* div,
                           const double* gu, const double* gv, double* cf, double* cd, double* qu, double* qv);
  void (*shifted_inverse_row)(double shift, double eps, int width, const double* depth, double* out);
};

const KernelTable& scalar_table();
#if defined(FLOWDEPTH_HAS_AVX2)
const KernelTable& avx2_table();
#endif

}  // namespace flowdepth::kernels
