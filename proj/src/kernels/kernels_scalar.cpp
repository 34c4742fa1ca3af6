#include "hygro/kernels.hpp"

namespace hygro::kernels::scalar {

namespace {

void geometry(const VertexColumns& x, const VertexColumns& y, std::span<double> area,
              const MutableVertexColumns& dndx, const MutableVertexColumns& dndy) {
  const std::size_t n = area.size();
  for (std::size_t e = 0; e < n; ++e) {
    const double x0 = x[0][e], x1 = x[1][e], x2 = x[2][e];
    const double y0 = y[0][e], y1 = y[1][e], y2 = y[2][e];
    const double twice = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    const double inv = 1.0 / twice;
    area[e] = 0.5 * twice;
    dndx[0][e] = (y1 - y2) * inv;
    dndx[1][e] = (y2 - y0) * inv;
    dndx[2][e] = (y0 - y1) * inv;
    dndy[0][e] = (x2 - x1) * inv;
    dndy[1][e] = (x0 - x2) * inv;
    dndy[2][e] = (x1 - x0) * inv;
  }
}

void gradient(const VertexColumns& dndx, const VertexColumns& dndy, const VertexColumns& u,
              std::span<double> gx, std::span<double> gy) {
  const std::size_t n = gx.size();
  for (std::size_t e = 0; e < n; ++e) {
    gx[e] = dndx[0][e] * u[0][e] + dndx[1][e] * u[1][e] + dndx[2][e] * u[2][e];
    gy[e] = dndy[0][e] * u[0][e] + dndy[1][e] * u[1][e] + dndy[2][e] * u[2][e];
  }
}

void centroid(const VertexColumns& u, std::span<double> out) {
  const std::size_t n = out.size();
  for (std::size_t e = 0; e < n; ++e) out[e] = (u[0][e] + u[1][e] + u[2][e]) * (1.0 / 3.0);
}

double weighted_sum(std::span<const double> w, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t e = 0; e < w.size(); ++e) s += w[e] * v[e];
  return s;
}

const KernelTable kTable{"scalar", geometry, gradient, centroid, weighted_sum};

}  // namespace

const KernelTable& table() { return kTable; }

}  // namespace hygro::kernels::scalar
