#ifndef INCAP_NUMERIC_HPP
#define INCAP_NUMERIC_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace incap {

// Streaming log-sum-exp: accumulates log(sum exp(x_i)) without materializing
// the terms. Safe for -inf entries.
class LogSumAccumulator {
 public:
  void add(double log_term) {
    if (log_term == -std::numeric_limits<double>::infinity()) return;
    if (log_term > max_) {
      if (max_ == -std::numeric_limits<double>::infinity()) {
        max_ = log_term;
        sum_ = 1.0;
        return;
      }
      sum_ = sum_ * std::exp(max_ - log_term) + 1.0;
      max_ = log_term;
    } else {
      sum_ += std::exp(log_term - max_);
    }
  }
  double value() const {
    if (max_ == -std::numeric_limits<double>::infinity()) return max_;
    return max_ + std::log(sum_);
  }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
};

// Kahan compensated accumulator for long plain-double sums.
class KahanAccumulator {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

namespace detail {
inline double simpson_step(const std::function<double(double)>& f, double a, double fa, double b,
                           double fb, double m, double fm, double whole, double tol, int depth) {
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

// Adaptive Simpson quadrature on [a,b] with an absolute tolerance.
// The recursion depth is capped; smooth integrands converge long before.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double abs_tol = 1e-10, int max_depth = 40) {
  double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_step(f, a, fa, b, fb, m, fm, whole, abs_tol, max_depth);
}

inline double rel_diff(double a, double b) {
  double scale = std::max(std::abs(a), std::abs(b));
  if (scale == 0.0) return 0.0;
  return std::abs(a - b) / scale;
}

}  // namespace incap

#endif
