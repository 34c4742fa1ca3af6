#include <cstdlib>
#include <string>

#include "hygro/kernels.hpp"

namespace hygro::kernels {

const KernelTable* find(std::string_view name) {
  if (name == "scalar") return &scalar::table();
  if (name == "avx2") return avx2::table();
  return nullptr;
}

const KernelTable& active() {
  static const KernelTable* chosen = [] {
    if (const char* env = std::getenv("HYGRO_SIMD")) {
      if (const KernelTable* t = find(env)) return t;
    }
    if (const KernelTable* t = avx2::table()) return t;
    return &scalar::table();
  }();
  return *chosen;
}

TriangleGeometry compute_geometry(const VertexColumns& x, const VertexColumns& y,
                                  const KernelTable& k) {
  const std::size_t n = x[0].size();
  TriangleGeometry g;
  g.area.resize(n);
  for (int v = 0; v < 3; ++v) {
    g.dndx[v].resize(n);
    g.dndy[v].resize(n);
  }
  k.geometry(x, y, g.area, {g.dndx[0], g.dndx[1], g.dndx[2]}, {g.dndy[0], g.dndy[1], g.dndy[2]});
  return g;
}

}  // namespace hygro::kernels
