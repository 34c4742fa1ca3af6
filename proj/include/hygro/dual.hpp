#pragma once

// Forward-mode dual numbers used to differentiate the constitutive closures.
// Dual<N> carries a value and N partial derivatives.

#include <array>
#include <cmath>
#include <cstddef>

namespace hygro {

template <std::size_t N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT: implicit constant promotion

  static Dual variable(double value, std::size_t slot) {
    Dual r(value);
    r.d[slot] = 1.0;
    return r;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (std::size_t i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] = (d[i] - v * inv * o.d[i]) * inv;
    v *= inv;
    return *this;
  }
};

template <std::size_t N> Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <std::size_t N> Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <std::size_t N> Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <std::size_t N> Dual<N> operator/(Dual<N> a, const Dual<N>& b) { return a /= b; }
template <std::size_t N> Dual<N> operator+(Dual<N> a, double b) { a.v += b; return a; }
template <std::size_t N> Dual<N> operator+(double a, Dual<N> b) { b.v += a; return b; }
template <std::size_t N> Dual<N> operator-(Dual<N> a, double b) { a.v -= b; return a; }
template <std::size_t N> Dual<N> operator-(double a, const Dual<N>& b) { return Dual<N>(a) - b; }
template <std::size_t N> Dual<N> operator*(Dual<N> a, double b) {
  a.v *= b;
  for (auto& x : a.d) x *= b;
  return a;
}
template <std::size_t N> Dual<N> operator*(double a, Dual<N> b) { return b * a; }
template <std::size_t N> Dual<N> operator/(Dual<N> a, double b) { return a * (1.0 / b); }
template <std::size_t N> Dual<N> operator/(double a, const Dual<N>& b) { return Dual<N>(a) / b; }
template <std::size_t N> Dual<N> operator-(Dual<N> a) { return a * -1.0; }

template <std::size_t N> bool operator<(const Dual<N>& a, double b) { return a.v < b; }
template <std::size_t N> bool operator<=(const Dual<N>& a, double b) { return a.v <= b; }
template <std::size_t N> bool operator>(const Dual<N>& a, double b) { return a.v > b; }
template <std::size_t N> bool operator>=(const Dual<N>& a, double b) { return a.v >= b; }

namespace detail {
template <std::size_t N>
Dual<N> chain(const Dual<N>& x, double f, double df) {
  Dual<N> r(f);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = df * x.d[i];
  return r;
}
}  // namespace detail

template <std::size_t N> Dual<N> exp(const Dual<N>& x) {
  const double e = std::exp(x.v);
  return detail::chain(x, e, e);
}
template <std::size_t N> Dual<N> log(const Dual<N>& x) {
  return detail::chain(x, std::log(x.v), 1.0 / x.v);
}
/// x^p for a constant exponent.
template <std::size_t N> Dual<N> pow(const Dual<N>& x, double p) {
  const double f = std::pow(x.v, p);
  return detail::chain(x, f, p * std::pow(x.v, p - 1.0));
}
/// a^x for a constant base.
template <std::size_t N> Dual<N> pow(double a, const Dual<N>& x) {
  const double f = std::pow(a, x.v);
  return detail::chain(x, f, f * std::log(a));
}

inline double value_of(double x) { return x; }
template <std::size_t N> double value_of(const Dual<N>& x) { return x.v; }

}  // namespace hygro
