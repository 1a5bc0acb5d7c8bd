#include "lpfdr/special_math.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace lpfdr {

namespace {

constexpr double kQuantileTol = 1e-12;

void check_unit_interval(double u, const char* fn) {
    if (!(u >= 0.0 && u <= 1.0)) {
        throw std::domain_error(std::string(fn) + ": argument " + std::to_string(u) +
                                " outside [0,1]");
    }
}

void check_degree(int degree, const char* fn) {
    if (degree < 1) {
        throw std::invalid_argument(std::string(fn) + ": degree must be >= 1, got " +
                                    std::to_string(degree));
    }
}

// Lentz continued fraction for the incomplete beta, NR style.
double beta_cont_frac(double a, double b, double x) {
    constexpr double eps = 1e-16;
    constexpr double fpmin = 1e-300;
    constexpr int max_iter = 500;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw std::runtime_error("beta_cdf: continued fraction did not converge");
}

}  // namespace

bool BetaParams::is_valid() const {
    return std::isfinite(gamma) && std::isfinite(beta) && gamma > 0.0 && beta > 0.0;
}

void BetaParams::validate() const {
    if (!is_valid()) {
        throw std::invalid_argument("BetaParams: gamma and beta must be finite and positive (" +
                                    std::to_string(gamma) + ", " + std::to_string(beta) + ")");
    }
}

double legendre(int degree, double u) {
    check_degree(degree, "legendre");
    check_unit_interval(u, "legendre");
    const double x = 2.0 * u - 1.0;
    double p_prev = 1.0;  // P_0
    double p_cur = x;     // P_1
    for (int j = 2; j <= degree; ++j) {
        const double p_next = ((2.0 * j - 1.0) * x * p_cur - (j - 1.0) * p_prev) / j;
        p_prev = p_cur;
        p_cur = p_next;
    }
    return std::sqrt(2.0 * degree + 1.0) * p_cur;
}

void legendre_all(int max_degree, double u, std::span<double> out) {
    check_degree(max_degree, "legendre_all");
    check_unit_interval(u, "legendre_all");
    if (out.size() < static_cast<size_t>(max_degree)) {
        throw std::invalid_argument("legendre_all: output span too small");
    }
    const double x = 2.0 * u - 1.0;
    double p_prev = 1.0;
    double p_cur = x;
    out[0] = std::sqrt(3.0) * p_cur;
    for (int j = 2; j <= max_degree; ++j) {
        const double p_next = ((2.0 * j - 1.0) * x * p_cur - (j - 1.0) * p_prev) / j;
        p_prev = p_cur;
        p_cur = p_next;
        out[j - 1] = std::sqrt(2.0 * j + 1.0) * p_cur;
    }
}

double legendre_antiderivative(int degree, double x) {
    check_degree(degree, "legendre_antiderivative");
    check_unit_interval(x, "legendre_antiderivative");
    const double y = 2.0 * x - 1.0;
    // Sweep P_0..P_{degree+1} to apply (P_{j+1} - P_{j-1}) / (2 sqrt(2j+1)).
    double p_prev = 1.0;
    double p_cur = y;
    double p_below = 1.0;  // P_{degree-1}
    for (int j = 2; j <= degree + 1; ++j) {
        const double p_next = ((2.0 * j - 1.0) * y * p_cur - (j - 1.0) * p_prev) / j;
        if (j == degree + 1) p_below = p_prev;
        p_prev = p_cur;
        p_cur = p_next;
    }
    if (degree == 1) p_below = 1.0;  // P_0
    return (p_cur - p_below) / (2.0 * std::sqrt(2.0 * degree + 1.0));
}

void legendre_antiderivative_all(int max_degree, double x, std::span<double> out) {
    check_degree(max_degree, "legendre_antiderivative_all");
    check_unit_interval(x, "legendre_antiderivative_all");
    if (out.size() < static_cast<size_t>(max_degree)) {
        throw std::invalid_argument("legendre_antiderivative_all: output span too small");
    }
    const double y = 2.0 * x - 1.0;
    // G_j needs P_{j-1} and P_{j+1}; keep a three-term window while sweeping.
    double p0 = 1.0;  // P_{j-1}, starting at P_0
    double p1 = y;    // P_j
    for (int j = 1; j <= max_degree; ++j) {
        const double p2 = ((2.0 * j + 1.0) * y * p1 - j * p0) / (j + 1.0);  // P_{j+1}
        out[j - 1] = (p2 - p0) / (2.0 * std::sqrt(2.0 * j + 1.0));
        p0 = p1;
        p1 = p2;
    }
}

double legendre_sup(int degree) {
    check_degree(degree, "legendre_sup");
    return std::sqrt(2.0 * degree + 1.0);
}

double beta_pdf(double u, const BetaParams& p) {
    p.validate();
    check_unit_interval(u, "beta_pdf");
    const double log_norm =
        std::lgamma(p.gamma + p.beta) - std::lgamma(p.gamma) - std::lgamma(p.beta);
    if (u == 0.0) {
        if (p.gamma < 1.0) return std::numeric_limits<double>::infinity();
        if (p.gamma > 1.0) return 0.0;
        return std::exp(log_norm);  // gamma == 1: density is beta at the left edge
    }
    if (u == 1.0) {
        if (p.beta < 1.0) return std::numeric_limits<double>::infinity();
        if (p.beta > 1.0) return 0.0;
        return std::exp(log_norm);
    }
    return std::exp(log_norm + (p.gamma - 1.0) * std::log(u) + (p.beta - 1.0) * std::log1p(-u));
}

double beta_cdf(double u, const BetaParams& p) {
    p.validate();
    check_unit_interval(u, "beta_cdf");
    if (u == 0.0) return 0.0;
    if (u == 1.0) return 1.0;
    const double a = p.gamma;
    const double b = p.beta;
    const double log_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(u) + b * std::log1p(-u);
    const double bt = std::exp(log_bt);
    if (u < (a + 1.0) / (a + b + 2.0)) {
        return bt * beta_cont_frac(a, b, u) / a;
    }
    return 1.0 - bt * beta_cont_frac(b, a, 1.0 - u) / b;
}

double beta_quantile(double q, const BetaParams& p) {
    p.validate();
    check_unit_interval(q, "beta_quantile");
    if (q == 0.0) return 0.0;
    if (q == 1.0) return 1.0;
    double lo = 0.0;
    double hi = 1.0;
    for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (beta_cdf(mid, p) < q) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double std_normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2_v<double>);
}

double std_normal_quantile(double q) {
    if (!(q > 0.0 && q < 1.0)) {
        throw std::domain_error("std_normal_quantile: argument " + std::to_string(q) +
                                " outside (0,1)");
    }
    // Acklam's rational approximation, then Halley polish.
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (q < p_low) {
        const double r = std::sqrt(-2.0 * std::log(q));
        x = (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
            ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
    } else if (q <= 1.0 - p_low) {
        const double r = q - 0.5;
        const double s = r * r;
        x = (((((a[0] * s + a[1]) * s + a[2]) * s + a[3]) * s + a[4]) * s + a[5]) * r /
            (((((b[0] * s + b[1]) * s + b[2]) * s + b[3]) * s + b[4]) * s + 1.0);
    } else {
        const double r = std::sqrt(-2.0 * std::log1p(-q));
        x = -(((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
            ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
    }
    for (int i = 0; i < 2 && std::fabs(x) < 37.0; ++i) {
        const double err = std_normal_cdf(x) - q;
        const double u = err * std::sqrt(2.0 * std::numbers::pi_v<double>) *
                         std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

}  // namespace lpfdr
