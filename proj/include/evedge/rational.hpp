#pragma once

#include <compare>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>

#include "evedge/error.hpp"

namespace evedge {

/// Exact rational used for sparse-frame pixel values.
/// Always stored in lowest terms with a positive denominator.
class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t num) : num_(num) {}  // NOLINT implicit
  Rational(std::int64_t num, std::int64_t den) : num_(num), den_(den) {
    if (den_ == 0) throw DomainError("rational with zero denominator");
    normalize();
  }

  constexpr std::int64_t num() const noexcept { return num_; }
  constexpr std::int64_t den() const noexcept { return den_; }

  bool is_zero() const noexcept { return num_ == 0; }
  bool is_positive() const noexcept { return num_ > 0; }
  double to_double() const noexcept {
    return static_cast<double>(num_) / static_cast<double>(den_);
  }

  Rational& operator+=(const Rational& o) {
    const std::int64_t g = std::gcd(den_, o.den_);
    const __int128 n = static_cast<__int128>(num_) * (o.den_ / g) +
                       static_cast<__int128>(o.num_) * (den_ / g);
    const __int128 d = static_cast<__int128>(den_) * (o.den_ / g);
    assign(n, d);
    return *this;
  }
  friend Rational operator+(Rational a, const Rational& b) { return a += b; }

  friend Rational operator*(const Rational& a, std::int64_t k) {
    Rational r;
    r.assign(static_cast<__int128>(a.num_) * k, a.den_);
    return r;
  }
  friend Rational operator/(const Rational& a, std::int64_t k) {
    if (k == 0) throw DomainError("rational division by zero");
    Rational r;
    __int128 d = static_cast<__int128>(a.den_) * k;
    __int128 n = a.num_;
    if (d < 0) {
      d = -d;
      n = -n;
    }
    r.assign(n, d);
    return r;
  }

  friend bool operator==(const Rational&, const Rational&) = default;
  friend std::strong_ordering operator<=>(const Rational& a,
                                          const Rational& b) {
    const __int128 l = static_cast<__int128>(a.num_) * b.den_;
    const __int128 r = static_cast<__int128>(b.num_) * a.den_;
    return l <=> r;
  }

  std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }
  friend std::ostream& operator<<(std::ostream& os, const Rational& r) {
    return os << r.str();
  }

 private:
  void normalize() {
    if (den_ < 0) {
      den_ = -den_;
      num_ = -num_;
    }
    const std::int64_t g = std::gcd(num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }
  void assign(__int128 n, __int128 d) {
    __int128 a = n < 0 ? -n : n;
    __int128 b = d;
    while (b != 0) {
      const __int128 t = a % b;
      a = b;
      b = t;
    }
    if (a > 1) {
      n /= a;
      d /= a;
    }
    constexpr __int128 lim = INT64_MAX;
    if (n > lim || n < -lim || d > lim)
      throw DomainError("rational overflow");
    num_ = static_cast<std::int64_t>(n);
    den_ = static_cast<std::int64_t>(d);
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace evedge
