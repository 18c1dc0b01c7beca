#ifndef HMMFDP_FASTEXP_HPP
#define HMMFDP_FASTEXP_HPP

#include <bit>
#include <cmath>
#include <cstdint>

namespace hmmfdp::detail {

// exp(x) accurate to a few ulp, branch-free so kernel-sum loops vectorize.
//
// Scheme: x = k*ln2 + r with |r| <= ln2/2, exp(r) by a degree-13 Taylor
// polynomial (max relative error ~ 4e-18 on that interval), 2^k applied by
// exponent-field manipulation.  Valid for x in [-690, 690]; callers outside
// that window use fast_exp which falls back to std::exp.
inline double fast_exp_unchecked(double x) {
  constexpr double kInvLn2 = 1.4426950408889634074;
  constexpr double kLn2Hi = 6.93145751953125e-1;
  constexpr double kLn2Lo = 1.42860682030941723212e-6;
  constexpr double kShift = 6755399441055744.0;  // 1.5 * 2^52

  const double t = x * kInvLn2 + kShift;
  const double k = t - kShift;  // nearest integer to x/ln2, as a double
  const double r = (x - k * kLn2Hi) - k * kLn2Lo;

  double p = 1.0 / 6227020800.0;  // 1/13!
  p = p * r + 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;

  // With the 1.5*2^52 shift, the mantissa of t stores 2^51 + k.
  const auto bits = std::bit_cast<std::uint64_t>(t);
  const std::int64_t ki =
      static_cast<std::int64_t>(bits & 0xfffffffffffffULL) - (1LL << 51);
  return p * std::bit_cast<double>(static_cast<std::uint64_t>(ki + 1023) << 52);
}

inline double fast_exp(double x) {
  if (x > 690.0 || x < -690.0 || std::isnan(x)) return std::exp(x);
  return fast_exp_unchecked(x);
}

}  // namespace hmmfdp::detail

#endif
