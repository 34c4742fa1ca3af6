#include <doctest.h>

#include <random>
#include <vector>

#include "hygro/kernels.hpp"

using namespace hygro::kernels;

namespace {

struct Batch {
  std::array<std::vector<double>, 3> x, y, u;
  explicit Batch(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int k = 0; k < 3; ++k) {
      x[k].resize(n);
      y[k].resize(n);
      u[k].resize(n);
    }
    for (std::size_t e = 0; e < n; ++e) {
      // Counter-clockwise triangle around a random origin.
      const double ox = U(rng), oy = U(rng);
      x[0][e] = ox;
      y[0][e] = oy;
      x[1][e] = ox + 0.5 + 0.1 * U(rng);
      y[1][e] = oy + 0.1 * U(rng);
      x[2][e] = ox + 0.1 * U(rng);
      y[2][e] = oy + 0.5 + 0.1 * U(rng);
      for (int k = 0; k < 3; ++k) u[k][e] = 20.0 * U(rng);
    }
  }
  VertexColumns cx() const { return {x[0], x[1], x[2]}; }
  VertexColumns cy() const { return {y[0], y[1], y[2]}; }
  VertexColumns cu() const { return {u[0], u[1], u[2]}; }
};

}  // namespace

TEST_CASE("scalar kernels reproduce a linear field exactly") {
  Batch b(5, 1);
  // u = 3 + 2x - 7y
  for (std::size_t e = 0; e < 5; ++e)
    for (int k = 0; k < 3; ++k) b.u[k][e] = 3.0 + 2.0 * b.x[k][e] - 7.0 * b.y[k][e];
  const TriangleGeometry g = compute_geometry(b.cx(), b.cy(), scalar::table());
  std::vector<double> gx(5), gy(5);
  scalar::table().gradient(g.dx(), g.dy(), b.cu(), gx, gy);
  for (std::size_t e = 0; e < 5; ++e) {
    CHECK(g.area[e] > 0.0);
    CHECK(gx[e] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(gy[e] == doctest::Approx(-7.0).epsilon(1e-12));
  }
}

TEST_CASE("AVX2 kernels match the scalar reference") {
  const KernelTable* v = avx2::table();
  if (!v) {
    MESSAGE("AVX2 variant unavailable on this machine; equivalence not exercised");
    return;
  }
  const KernelTable& s = scalar::table();
  // Sizes cover the vector body and every remainder length.
  for (std::size_t n : {1u, 3u, 4u, 5u, 7u, 64u, 1001u}) {
    Batch b(n, 100 + n);
    const TriangleGeometry gs = compute_geometry(b.cx(), b.cy(), s);
    const TriangleGeometry gv = compute_geometry(b.cx(), b.cy(), *v);
    std::vector<double> sx(n), sy(n), vx(n), vy(n), sc(n), vc(n);
    s.gradient(gs.dx(), gs.dy(), b.cu(), sx, sy);
    v->gradient(gs.dx(), gs.dy(), b.cu(), vx, vy);
    s.centroid(b.cu(), sc);
    v->centroid(b.cu(), vc);
    for (std::size_t e = 0; e < n; ++e) {
      CHECK(gv.area[e] == doctest::Approx(gs.area[e]).epsilon(1e-14));
      for (int k = 0; k < 3; ++k) {
        CHECK(gv.dndx[k][e] == doctest::Approx(gs.dndx[k][e]).epsilon(1e-13));
        CHECK(gv.dndy[k][e] == doctest::Approx(gs.dndy[k][e]).epsilon(1e-13));
      }
      CHECK(vx[e] == doctest::Approx(sx[e]).epsilon(1e-12));
      CHECK(vy[e] == doctest::Approx(sy[e]).epsilon(1e-12));
      CHECK(vc[e] == doctest::Approx(sc[e]).epsilon(1e-15));
    }
    CHECK(v->weighted_sum(gs.area, sc) ==
          doctest::Approx(s.weighted_sum(gs.area, sc)).epsilon(1e-13));
  }
}

TEST_CASE("kernel lookup by name") {
  CHECK(find("scalar") == &scalar::table());
  CHECK(find("nonsense") == nullptr);
  CHECK(find(active().name) == &active());
}
