#pragma once

#include "coxsel/common.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace coxsel {

inline double norm_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double norm_pdf(double x)
{
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double norm_quantile(double prob)
{
    if (!(prob > 0.0 && prob < 1.0)) {
        if (prob == 0.0) return -kInf;
        if (prob == 1.0) return kInf;
        throw Error("norm_quantile: probability outside [0,1]");
    }
    return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
}

namespace detail {

// exp(x^2) erfc(x) for x >= 0.
inline double erfcx(double x)
{
    if (x < 5.0) return std::exp(x * x) * std::erfc(x);
    // Continued fraction, evaluated bottom-up; converges quickly for x >= 5.
    double frac = x;
    for (int k = 60; k >= 1; --k) frac = x + (0.5 * k) / frac;
    return std::numbers::inv_sqrtpi / frac;
}

// log Q(t), Q the standard normal upper tail.
inline double log_upper_tail(double t)
{
    if (t == -kInf) return 0.0;
    if (t == kInf) return -kInf;
    if (t < 0.0) return std::log1p(-0.5 * std::erfc(-t / std::numbers::sqrt2));
    return std::log(0.5 * erfcx(t / std::numbers::sqrt2)) - 0.5 * t * t;
}

// log Q(u) - log Q(a) for 0 <= a <= u, with gap = u - a supplied exactly.
inline double log_tail_ratio(double u, double a, double gap)
{
    if (u == kInf) return -kInf;
    const double r = std::log(erfcx(u / std::numbers::sqrt2) / erfcx(a / std::numbers::sqrt2));
    return r - 0.5 * gap * (u + a);
}

// CDF of N(0,1) truncated to [a, b], evaluated at z, for a >= 0.
// The gaps z - a and b - a are passed separately to avoid cancellation.
inline double upper_branch(double z, double a, double b, double gap_z, double gap_b)
{
    const double dz = log_tail_ratio(z, a, gap_z);
    const double db = log_tail_ratio(b, a, gap_b);
    const double den = std::expm1(db);
    if (den == 0.0) return 0.5;
    return std::expm1(dz) / den;
}

} // namespace detail

/// CDF at x of N(mu, sigma^2) truncated to [v_minus, v_plus].
/// Uses tail ratios so the value stays finite when the truncation region sits
/// far in either tail of the untruncated normal.
inline double truncated_normal_cdf(double x, double mu, double sigma, double v_minus, double v_plus)
{
    if (!(sigma > 0.0)) throw Error("truncated_normal_cdf: sigma must be positive");
    if (!(v_minus < v_plus)) throw Error("truncated_normal_cdf: empty truncation interval");
    if (x <= v_minus) return 0.0;
    if (x >= v_plus) return 1.0;

    const double a = (v_minus - mu) / sigma;
    const double b = (v_plus - mu) / sigma;
    const double z = (x - mu) / sigma;

    double f = 0.0;
    if (a >= 0.0) {
        const double gap_z = (x - v_minus) / sigma;
        const double gap_b = v_plus == kInf ? kInf : (v_plus - v_minus) / sigma;
        f = detail::upper_branch(z, a, b, gap_z, gap_b);
    } else if (b <= 0.0) {
        // Mirror image: reflect to the upper tail and take the complement of
        // the mass above x.
        const double gap_z = (v_plus - x) / sigma;
        const double gap_a = v_minus == -kInf ? kInf : (v_plus - v_minus) / sigma;
        f = 1.0 - detail::upper_branch(-z, -b, -a, gap_z, gap_a);
    } else {
        const double lo = a == -kInf ? 0.0 : norm_cdf(a);
        const double hi = b == kInf ? 1.0 : norm_cdf(b);
        f = (norm_cdf(z) - lo) / (hi - lo);
    }
    return std::clamp(f, 0.0, 1.0);
}

} // namespace coxsel
