#pragma once

// Data-parallel element kernels for linear triangles. Every kernel has a scalar
// reference implementation and, on x86-64, an AVX2/FMA variant; the variant is
// chosen once at startup from the CPU features (override with HYGRO_SIMD=scalar).

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace hygro::kernels {

/// Per-vertex columns of a triangle batch (structure of arrays).
using VertexColumns = std::array<std::span<const double>, 3>;
using MutableVertexColumns = std::array<std::span<double>, 3>;

struct KernelTable {
  const char* name;

  /// area[e] and shape-function gradients dndx[k][e], dndy[k][e].
  void (*geometry)(const VertexColumns& x, const VertexColumns& y, std::span<double> area,
                   const MutableVertexColumns& dndx, const MutableVertexColumns& dndy);

  /// Constant gradient of a linear field: g[e] = sum_k dN_k[e] * u_k[e].
  void (*gradient)(const VertexColumns& dndx, const VertexColumns& dndy,
                   const VertexColumns& u, std::span<double> gx, std::span<double> gy);

  /// Centroid value (u0 + u1 + u2) / 3.
  void (*centroid)(const VertexColumns& u, std::span<double> out);

  /// sum_e w[e] * v[e].
  double (*weighted_sum)(std::span<const double> w, std::span<const double> v);
};

namespace scalar {
const KernelTable& table();
}

namespace avx2 {
/// nullptr when the build has no AVX2 variant or the CPU lacks AVX2/FMA.
const KernelTable* table();
}

/// The table used by the assembly.
const KernelTable& active();

/// Looks a table up by name ("scalar" or "avx2"); nullptr when unavailable.
const KernelTable* find(std::string_view name);

/// Owning SoA storage for the geometry of a fixed triangle set.
struct TriangleGeometry {
  std::vector<double> area;
  std::array<std::vector<double>, 3> dndx;
  std::array<std::vector<double>, 3> dndy;

  std::size_t size() const { return area.size(); }
  VertexColumns dx() const { return {dndx[0], dndx[1], dndx[2]}; }
  VertexColumns dy() const { return {dndy[0], dndy[1], dndy[2]}; }
};

TriangleGeometry compute_geometry(const VertexColumns& x, const VertexColumns& y,
                                  const KernelTable& k = active());

}  // namespace hygro::kernels
