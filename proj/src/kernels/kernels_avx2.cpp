#include "hygro/kernels.hpp"

#if defined(HYGRO_HAVE_AVX2)
#include <immintrin.h>
#endif

namespace hygro::kernels::avx2 {

#if defined(HYGRO_HAVE_AVX2)

namespace {

constexpr std::size_t kLanes = 4;

inline __m256d load(std::span<const double> s, std::size_t i) { return _mm256_loadu_pd(s.data() + i); }
inline void store(std::span<double> s, std::size_t i, __m256d v) { _mm256_storeu_pd(s.data() + i, v); }

void geometry(const VertexColumns& x, const VertexColumns& y, std::span<double> area,
              const MutableVertexColumns& dndx, const MutableVertexColumns& dndy) {
  const std::size_t n = area.size();
  const std::size_t body = n - n % kLanes;
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d one = _mm256_set1_pd(1.0);
  for (std::size_t e = 0; e < body; e += kLanes) {
    const __m256d x0 = load(x[0], e), x1 = load(x[1], e), x2 = load(x[2], e);
    const __m256d y0 = load(y[0], e), y1 = load(y[1], e), y2 = load(y[2], e);
    const __m256d a = _mm256_mul_pd(_mm256_sub_pd(x1, x0), _mm256_sub_pd(y2, y0));
    const __m256d b = _mm256_mul_pd(_mm256_sub_pd(x2, x0), _mm256_sub_pd(y1, y0));
    const __m256d twice = _mm256_sub_pd(a, b);
    const __m256d inv = _mm256_div_pd(one, twice);
    store(area, e, _mm256_mul_pd(half, twice));
    store(dndx[0], e, _mm256_mul_pd(_mm256_sub_pd(y1, y2), inv));
    store(dndx[1], e, _mm256_mul_pd(_mm256_sub_pd(y2, y0), inv));
    store(dndx[2], e, _mm256_mul_pd(_mm256_sub_pd(y0, y1), inv));
    store(dndy[0], e, _mm256_mul_pd(_mm256_sub_pd(x2, x1), inv));
    store(dndy[1], e, _mm256_mul_pd(_mm256_sub_pd(x0, x2), inv));
    store(dndy[2], e, _mm256_mul_pd(_mm256_sub_pd(x1, x0), inv));
  }
  if (body < n) {
    auto tail = [&](std::span<const double> s) { return s.subspan(body); };
    auto mtail = [&](std::span<double> s) { return s.subspan(body); };
    scalar::table().geometry({tail(x[0]), tail(x[1]), tail(x[2])},
                             {tail(y[0]), tail(y[1]), tail(y[2])}, mtail(area),
                             {mtail(dndx[0]), mtail(dndx[1]), mtail(dndx[2])},
                             {mtail(dndy[0]), mtail(dndy[1]), mtail(dndy[2])});
  }
}

void gradient(const VertexColumns& dndx, const VertexColumns& dndy, const VertexColumns& u,
              std::span<double> gx, std::span<double> gy) {
  const std::size_t n = gx.size();
  const std::size_t body = n - n % kLanes;
  for (std::size_t e = 0; e < body; e += kLanes) {
    const __m256d u0 = load(u[0], e), u1 = load(u[1], e), u2 = load(u[2], e);
    __m256d sx = _mm256_mul_pd(load(dndx[0], e), u0);
    sx = _mm256_fmadd_pd(load(dndx[1], e), u1, sx);
    sx = _mm256_fmadd_pd(load(dndx[2], e), u2, sx);
    __m256d sy = _mm256_mul_pd(load(dndy[0], e), u0);
    sy = _mm256_fmadd_pd(load(dndy[1], e), u1, sy);
    sy = _mm256_fmadd_pd(load(dndy[2], e), u2, sy);
    store(gx, e, sx);
    store(gy, e, sy);
  }
  if (body < n) {
    auto t = [&](std::span<const double> s) { return s.subspan(body); };
    scalar::table().gradient({t(dndx[0]), t(dndx[1]), t(dndx[2])},
                             {t(dndy[0]), t(dndy[1]), t(dndy[2])}, {t(u[0]), t(u[1]), t(u[2])},
                             gx.subspan(body), gy.subspan(body));
  }
}

void centroid(const VertexColumns& u, std::span<double> out) {
  const std::size_t n = out.size();
  const std::size_t body = n - n % kLanes;
  const __m256d third = _mm256_set1_pd(1.0 / 3.0);
  for (std::size_t e = 0; e < body; e += kLanes) {
    const __m256d s = _mm256_add_pd(_mm256_add_pd(load(u[0], e), load(u[1], e)), load(u[2], e));
    store(out, e, _mm256_mul_pd(s, third));
  }
  if (body < n) {
    auto t = [&](std::span<const double> s) { return s.subspan(body); };
    scalar::table().centroid({t(u[0]), t(u[1]), t(u[2])}, out.subspan(body));
  }
}

double weighted_sum(std::span<const double> w, std::span<const double> v) {
  const std::size_t n = w.size();
  const std::size_t body = n - n % kLanes;
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t e = 0; e < body; e += kLanes) acc = _mm256_fmadd_pd(load(w, e), load(v, e), acc);
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (std::size_t e = body; e < n; ++e) s += w[e] * v[e];
  return s;
}

const KernelTable kTable{"avx2", geometry, gradient, centroid, weighted_sum};

}  // namespace

const KernelTable* table() {
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &kTable : nullptr;
}

#else

const KernelTable* table() { return nullptr; }

#endif

}  // namespace hygro::kernels::avx2
