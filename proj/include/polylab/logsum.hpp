#pragma once

#include <cmath>
#include <limits>

namespace polylab {

// Log-domain accumulator: a running max plus a Neumaier-compensated sum of exp(x - max).
class LogSum {
 public:
  void add(double log_term) {
    if (log_term == -std::numeric_limits<double>::infinity()) return;
    if (log_term > max_) {
      double scale = std::exp(max_ - log_term);
      sum_ *= scale;
      comp_ *= scale;
      max_ = log_term;
    }
    accumulate(std::exp(log_term - max_));
  }

  void merge(const LogSum& other) {
    if (other.empty()) return;
    if (other.max_ > max_) {
      double scale = std::exp(max_ - other.max_);
      sum_ *= scale;
      comp_ *= scale;
      max_ = other.max_;
    }
    double scale = std::exp(other.max_ - max_);
    accumulate(other.sum_ * scale);
    accumulate(other.comp_ * scale);
  }

  bool empty() const { return max_ == -std::numeric_limits<double>::infinity(); }

  double value() const {
    if (empty()) return -std::numeric_limits<double>::infinity();
    return max_ + std::log(sum_ + comp_);
  }

 private:
  void accumulate(double v) {
    double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }

  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

// Compensated linear-scale sum.
class KahanSum {
 public:
  void add(double v) {
    double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace polylab
