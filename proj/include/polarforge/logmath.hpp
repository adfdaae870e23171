#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace polarforge {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// ln(e^a + e^b) without overflow; either side may be -inf.
inline double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> xs) {
    double m = kNegInf;
    for (double x : xs) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

/// ln(1 - e^x) for x <= 0.
inline double log1m_exp(double x) {
    if (x == kNegInf) return 0.0;
    if (x > -0.6931471805599453) return std::log(-std::expm1(x));
    return std::log1p(-std::exp(x));
}

/// A nonnegative real carried by its natural log so that doubly tiny values survive.
class LogReal {
public:
    constexpr LogReal() = default;
    static LogReal from_log(double ln) { LogReal r; r.ln_ = ln; return r; }
    static LogReal from_value(double v) { return from_log(v > 0.0 ? std::log(v) : kNegInf); }
    static LogReal zero() { return {}; }

    double log() const { return ln_; }
    double value() const { return std::exp(ln_); }
    bool is_zero() const { return ln_ == kNegInf; }

    LogReal& operator+=(LogReal o) { ln_ = log_add(ln_, o.ln_); return *this; }
    friend LogReal operator+(LogReal a, LogReal b) { return a += b; }
    friend LogReal operator*(LogReal a, LogReal b) {
        if (a.is_zero() || b.is_zero()) return zero();
        return from_log(a.ln_ + b.ln_);
    }
    friend bool operator<(LogReal a, LogReal b) { return a.ln_ < b.ln_; }
    friend bool operator<=(LogReal a, LogReal b) { return a.ln_ <= b.ln_; }

private:
    double ln_ = kNegInf;
};

}  // namespace polarforge
