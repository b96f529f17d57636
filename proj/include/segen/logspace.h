#ifndef SEGEN_LOGSPACE_H
#define SEGEN_LOGSPACE_H

#include <cassert>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

namespace segen::logspace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)), safe against underflow. -inf is the additive
// identity. Exactly commutative: computed from (max, min).
inline double log_add(double a, double b) {
  assert(!std::isnan(a) && !std::isnan(b));
  if (std::isinf(a) && a < 0) return b;
  if (std::isinf(b) && b < 0) return a;
  double hi = a > b ? a : b;
  double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

// log sum_i exp(x_i). Empty input is an error rather than -inf so that a
// lattice cell fed no terms fails loudly instead of vanishing.
inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty())
    throw std::invalid_argument("log_sum_exp: empty sequence");
  double hi = kNegInf;
  for (double x : xs) {
    assert(!std::isnan(x));
    if (x > hi) hi = x;
  }
  if (std::isinf(hi) && hi < 0) return kNegInf;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

}  // namespace segen::logspace

#endif
