#pragma once

// Second-order forward-mode dual numbers.
//
// A Dual2 carries a value, its gradient with respect to up to kMaxDim seed
// directions, and the matching Hessian. Arithmetic applies the first- and
// second-order chain rule, so evaluating a smooth map on seeded Dual2 inputs
// yields exact (to rounding) Jacobians and Hessians.

#include <array>
#include <cassert>
#include <cmath>

namespace geodesic_atlas {

inline constexpr int kMaxDim = 8;

class Dual2 {
 public:
  constexpr Dual2() = default;
  constexpr Dual2(double value) : value_(value) {}  // NOLINT: implicit constant lift

  /// Independent variable number `index` out of `n_seeds`.
  static Dual2 variable(double value, int index, int n_seeds) {
    assert(index >= 0 && index < n_seeds && n_seeds <= kMaxDim);
    Dual2 x(value);
    x.n_ = n_seeds;
    x.grad_[index] = 1.0;
    return x;
  }

  /// Constant that participates in an n_seeds-dimensional computation.
  static Dual2 constant(double value, int n_seeds) {
    Dual2 x(value);
    x.n_ = n_seeds;
    return x;
  }

  double value() const { return value_; }
  int seeds() const { return n_; }
  double d(int i) const { return grad_[i]; }
  double dd(int i, int j) const { return hess_[i * kMaxDim + j]; }

  Dual2& operator+=(const Dual2& o) {
    widen(o.n_);
    value_ += o.value_;
    for (int i = 0; i < o.n_; ++i) grad_[i] += o.grad_[i];
    for (int i = 0; i < o.n_; ++i)
      for (int j = 0; j < o.n_; ++j) hess_[i * kMaxDim + j] += o.hess_[i * kMaxDim + j];
    return *this;
  }

  Dual2& operator-=(const Dual2& o) {
    widen(o.n_);
    value_ -= o.value_;
    for (int i = 0; i < o.n_; ++i) grad_[i] -= o.grad_[i];
    for (int i = 0; i < o.n_; ++i)
      for (int j = 0; j < o.n_; ++j) hess_[i * kMaxDim + j] -= o.hess_[i * kMaxDim + j];
    return *this;
  }

  Dual2& operator*=(const Dual2& o) {
    *this = *this * o;
    return *this;
  }

  Dual2& operator/=(const Dual2& o) {
    *this = *this / o;
    return *this;
  }

  Dual2 operator-() const {
    Dual2 r = *this;
    r.value_ = -r.value_;
    for (int i = 0; i < n_; ++i) r.grad_[i] = -r.grad_[i];
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) r.hess_[i * kMaxDim + j] = -r.hess_[i * kMaxDim + j];
    return r;
  }

  friend Dual2 operator+(Dual2 a, const Dual2& b) { return a += b; }
  friend Dual2 operator-(Dual2 a, const Dual2& b) { return a -= b; }

  friend Dual2 operator*(const Dual2& a, const Dual2& b) {
    Dual2 r;
    r.n_ = a.n_ > b.n_ ? a.n_ : b.n_;
    r.value_ = a.value_ * b.value_;
    for (int i = 0; i < r.n_; ++i) r.grad_[i] = a.grad_[i] * b.value_ + a.value_ * b.grad_[i];
    for (int i = 0; i < r.n_; ++i) {
      for (int j = 0; j < r.n_; ++j) {
        const int k = i * kMaxDim + j;
        r.hess_[k] = a.hess_[k] * b.value_ + a.value_ * b.hess_[k] +
                     (a.grad_[i] * b.grad_[j] + b.grad_[i] * a.grad_[j]);
      }
    }
    return r;
  }

  friend Dual2 operator/(const Dual2& a, const Dual2& b) { return a * reciprocal(b); }

  /// Applies a scalar function given its value and first two derivatives at
  /// the argument's value.
  static Dual2 chain(const Dual2& a, double f0, double f1, double f2) {
    Dual2 r;
    r.n_ = a.n_;
    r.value_ = f0;
    for (int i = 0; i < a.n_; ++i) r.grad_[i] = f1 * a.grad_[i];
    for (int i = 0; i < a.n_; ++i) {
      for (int j = 0; j < a.n_; ++j) {
        const int k = i * kMaxDim + j;
        r.hess_[k] = f1 * a.hess_[k] + f2 * (a.grad_[i] * a.grad_[j]);
      }
    }
    return r;
  }

  friend Dual2 reciprocal(const Dual2& a) {
    const double inv = 1.0 / a.value_;
    return chain(a, inv, -inv * inv, 2.0 * inv * inv * inv);
  }

  friend Dual2 exp(const Dual2& a) {
    const double e = std::exp(a.value_);
    return chain(a, e, e, e);
  }

  friend Dual2 log(const Dual2& a) {
    const double inv = 1.0 / a.value_;
    return chain(a, std::log(a.value_), inv, -inv * inv);
  }

  friend Dual2 sqrt(const Dual2& a) {
    const double s = std::sqrt(a.value_);
    return chain(a, s, 0.5 / s, -0.25 / (s * a.value_));
  }

  friend Dual2 sin(const Dual2& a) {
    const double s = std::sin(a.value_);
    return chain(a, s, std::cos(a.value_), -s);
  }

  friend Dual2 cos(const Dual2& a) {
    const double c = std::cos(a.value_);
    return chain(a, c, -std::sin(a.value_), -c);
  }

  friend Dual2 tanh(const Dual2& a) {
    const double t = std::tanh(a.value_);
    const double s = 1.0 - t * t;
    return chain(a, t, s, -2.0 * t * s);
  }

  /// Integer power; exact for the polynomial terms immersions are built from.
  friend Dual2 pow(const Dual2& a, int k) {
    if (k == 0) return constant(1.0, a.n_);
    const double pk1 = std::pow(a.value_, k - 1);
    const double pk2 = k == 1 ? 0.0 : std::pow(a.value_, k - 2);
    return chain(a, pk1 * a.value_, k * pk1, k * (k - 1) * pk2);
  }

 private:
  void widen(int n) {
    if (n > n_) n_ = n;
  }

  double value_ = 0.0;
  int n_ = 0;
  std::array<double, kMaxDim> grad_{};
  std::array<double, kMaxDim * kMaxDim> hess_{};
};

}  // namespace geodesic_atlas
