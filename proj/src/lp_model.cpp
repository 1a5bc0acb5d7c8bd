#include "lpfdr/lp_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "lpfdr/kahan.hpp"

namespace lpfdr {

namespace {

constexpr int kRepairCells = 4096;
constexpr double kEtaFloor = 1e-6;
constexpr double kParamClampLo = 1e-4;
constexpr double kParamClampHi = 1e4;

void check_order(int m, const char* fn) {
    if (m < 1 || m > kMaxOrder) {
        throw std::invalid_argument(std::string(fn) + ": order must be in [1," +
                                    std::to_string(kMaxOrder) + "], got " + std::to_string(m));
    }
}

struct GaussRule {
    std::array<double, 12> x;  // nodes on [-1,1]
    std::array<double, 12> w;
};

// Gauss-Legendre nodes by Newton iteration on P_12; exact for degree <= 23.
const GaussRule& gauss12() {
    static const GaussRule rule = [] {
        GaussRule r{};
        const int n = 12;
        for (int i = 0; i < n / 2; ++i) {
            double z = std::cos(std::numbers::pi_v<double> * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = z;
                for (int j = 2; j <= n; ++j) {
                    const double p2 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p0) / j;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (z * p1 - p0) / (z * z - 1.0);
                const double dz = p1 / dp;
                z -= dz;
                if (std::fabs(dz) < 1e-15) break;
            }
            r.x[i] = -z;
            r.x[n - 1 - i] = z;
            r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        return r;
    }();
    return rule;
}

double bracket_poly(std::span<const double> coeffs, double t) {
    double leg[kMaxOrder];
    const int m = static_cast<int>(coeffs.size());
    if (m == 0) return 1.0;
    legendre_all(m, t, std::span<double>(leg, m));
    double acc = 1.0;
    for (int j = 0; j < m; ++j) acc += coeffs[j] * leg[j];
    return acc;
}

// Integral of max(0, bracket) over [a, b] by 12-point Gauss with node clipping.
double clipped_cell_integral(std::span<const double> coeffs, double a, double b) {
    const GaussRule& g = gauss12();
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double acc = 0.0;
    for (int i = 0; i < 12; ++i) {
        const double v = bracket_poly(coeffs, mid + half * g.x[i]);
        if (v > 0.0) acc += g.w[i] * v;
    }
    return acc * half;
}

// Same integral, but splits at the sign change when the endpoints disagree so
// the quadrature never straddles the clip kink.
double clipped_integral(std::span<const double> coeffs, double a, double b) {
    const double fa = bracket_poly(coeffs, a);
    const double fb = bracket_poly(coeffs, b);
    if ((fa >= 0.0) == (fb >= 0.0)) {
        return clipped_cell_integral(coeffs, a, b);
    }
    double lo = a, hi = b;
    bool lo_pos = fa >= 0.0;
    for (int i = 0; i < 80 && hi - lo > 1e-18; ++i) {
        const double mid = 0.5 * (lo + hi);
        if ((bracket_poly(coeffs, mid) >= 0.0) == lo_pos) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double r = 0.5 * (lo + hi);
    return clipped_cell_integral(coeffs, a, r) + clipped_cell_integral(coeffs, r, b);
}

}  // namespace

LPCoefficients lp_coefficients(std::span<const double> values, const LPBasis& basis, int m) {
    check_order(m, "lp_coefficients");
    if (values.empty()) {
        throw std::invalid_argument("lp_coefficients: empty sample");
    }
    if (basis.kind == LPBasis::Kind::Beta) basis.carrier.validate();

    std::vector<KahanAccumulator> acc(m);
    double leg[kMaxOrder];
    for (size_t i = 0; i < values.size(); ++i) {
        const double u = values[i];
        if (!(u > 0.0 && u < 1.0)) {
            throw std::invalid_argument("lp_coefficients: value at index " + std::to_string(i) +
                                        " outside (0,1): " + std::to_string(u));
        }
        const double t = basis.kind == LPBasis::Kind::Beta ? beta_cdf(u, basis.carrier) : u;
        legendre_all(m, t, std::span<double>(leg, m));
        for (int j = 0; j < m; ++j) acc[j].add(leg[j]);
    }
    LPCoefficients out;
    out.basis = basis;
    out.values.resize(m);
    const double n = static_cast<double>(values.size());
    for (int j = 0; j < m; ++j) out.values[j] = acc[j].total() / n;
    return out;
}

BetaParams fit_beta_moments(double m1, double m2, bool* clamped) {
    if (!(std::isfinite(m1) && std::isfinite(m2)) || m1 <= 0.0 || m1 >= 1.0) {
        throw std::invalid_argument("fit_beta_moments: first moment must be in (0,1), got " +
                                    std::to_string(m1));
    }
    const double var = m2 - m1 * m1;
    const double spread = m1 - m2;
    if (var <= 0.0 || spread <= 0.0) {
        throw std::invalid_argument(
            "fit_beta_moments: infeasible moment pair (m1=" + std::to_string(m1) +
            ", m2=" + std::to_string(m2) + ")");
    }
    BetaParams p;
    p.gamma = m1 * spread / var;
    p.beta = (1.0 - m1) * spread / var;
    bool hit = false;
    auto clamp = [&hit](double v) {
        if (v < kParamClampLo) {
            hit = true;
            return kParamClampLo;
        }
        if (v > kParamClampHi) {
            hit = true;
            return kParamClampHi;
        }
        return v;
    };
    p.gamma = clamp(p.gamma);
    p.beta = clamp(p.beta);
    if (clamped) *clamped = hit;
    return p;
}

LPCoefficients select_coefficients_aic(const LPCoefficients& raw, std::int64_t n_total) {
    if (n_total < 1) {
        throw std::invalid_argument("select_coefficients_aic: n_total must be >= 1");
    }
    const int m = raw.order();
    std::vector<int> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&raw](int a, int b) {
        return raw.values[a] * raw.values[a] > raw.values[b] * raw.values[b];
    });
    const double penalty = 2.0 / static_cast<double>(n_total);
    double best_aic = 0.0;  // AIC(0), the empty model
    int best_k = 0;
    double cum = 0.0;
    for (int k = 1; k <= m; ++k) {
        const double v = raw.values[idx[k - 1]];
        cum += v * v;
        const double aic = cum - penalty * k;
        if (aic > best_aic) {
            best_aic = aic;
            best_k = k;
        }
    }
    LPCoefficients out = raw;
    std::fill(out.values.begin(), out.values.end(), 0.0);
    for (int k = 0; k < best_k; ++k) out.values[idx[k]] = raw.values[idx[k]];
    return out;
}

SkewBetaModel SkewBetaModel::build(const BetaParams& carrier, LPCoefficients selected,
                                   std::int64_t n_total, std::optional<double> eta_override) {
    carrier.validate();
    if (selected.order() > kMaxOrder) {
        throw std::invalid_argument("SkewBetaModel: order exceeds " + std::to_string(kMaxOrder));
    }
    if (selected.order() == 0) {
        selected.basis = LPBasis::beta(carrier);
    } else if (selected.basis.kind != LPBasis::Kind::Beta || !(selected.basis.carrier == carrier)) {
        throw std::invalid_argument("SkewBetaModel: coefficients are not in this carrier's basis");
    }

    SkewBetaModel model;
    model.carrier = carrier;
    model.coefficients = std::move(selected);
    model.n_total = n_total;

    const std::span<const double> c(model.coefficients.values);
    double min_bracket = 1.0;
    for (int i = 0; i <= kRepairCells; ++i) {
        const double t = static_cast<double>(i) / kRepairCells;
        min_bracket = std::min(min_bracket, bracket_poly(c, t));
    }
    if (min_bracket < 0.0) {
        model.repair_applied = true;
        model.repair_cum.resize(kRepairCells + 1);
        model.repair_cum[0] = 0.0;
        KahanAccumulator cum;
        for (int i = 0; i < kRepairCells; ++i) {
            const double a = static_cast<double>(i) / kRepairCells;
            const double b = static_cast<double>(i + 1) / kRepairCells;
            cum.add(clipped_integral(c, a, b));
            model.repair_cum[i + 1] = cum.total();
        }
        model.normalizer = model.repair_cum.back();
        if (!(model.normalizer > 0.0)) {
            throw std::runtime_error("SkewBetaModel: repaired density has no positive mass");
        }
    }

    if (eta_override) {
        if (!(*eta_override > 0.0 && *eta_override <= 1.0)) {
            throw std::invalid_argument("SkewBetaModel: eta override must be in (0,1]");
        }
        model.eta = *eta_override;
    } else {
        model.eta = estimate_eta(model);
    }
    return model;
}

double series_bracket(const SkewBetaModel& model, double t) {
    return bracket_poly(model.coefficients.values, t);
}

double density_eval(const SkewBetaModel& model, double u) {
    const double f = beta_pdf(u, model.carrier);
    const double t = beta_cdf(u, model.carrier);
    const double b = series_bracket(model, t);
    if (b <= 0.0) return 0.0;
    if (std::isinf(f)) return f;
    return f * b / model.normalizer;
}

double density_eval_raw(const SkewBetaModel& model, double u) {
    const double f = beta_pdf(u, model.carrier);
    const double t = beta_cdf(u, model.carrier);
    return f * series_bracket(model, t);
}

double cdf_eval(const SkewBetaModel& model, double u) {
    const double t = beta_cdf(u, model.carrier);
    const int m = model.coefficients.order();
    if (!model.repair_applied) {
        if (m == 0) return t;
        double anti[kMaxOrder];
        legendre_antiderivative_all(m, t, std::span<double>(anti, m));
        double acc = t;
        for (int j = 0; j < m; ++j) acc += model.coefficients.values[j] * anti[j];
        return std::clamp(acc, 0.0, 1.0);
    }
    if (t >= 1.0) return 1.0;
    const double scaled = t * kRepairCells;
    const int cell = std::min(static_cast<int>(scaled), kRepairCells - 1);
    const double a = static_cast<double>(cell) / kRepairCells;
    const std::span<const double> c(model.coefficients.values);
    const double partial = t > a ? clipped_integral(c, a, t) : 0.0;
    return std::min(1.0, (model.repair_cum[cell] + partial) / model.normalizer);
}

double estimate_eta(const SkewBetaModel& model) {
    constexpr int kGrid = 1024;
    double lo = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= kGrid; ++i) {
        const double u = (i - 0.5) / kGrid;
        lo = std::min(lo, density_eval(model, u));
    }
    return std::clamp(lo, kEtaFloor, 1.0);
}

double chi_square_divergence(const LPCoefficients& coeffs) {
    const int m = coeffs.order();
    if (m == 0) return 0.0;
    if (coeffs.basis.kind == LPBasis::Kind::Uniform) {
        double acc = 0.0;
        for (double v : coeffs.values) acc += v * v;
        return acc;
    }
    const BetaParams& p = coeffs.basis.carrier;
    p.validate();

    // Gram matrix Ex_B[Leg_j Leg_k] by tanh-sinh quadrature in log space; the
    // substitution x = sigmoid(pi sinh t) gives weight x^gamma (1-x)^beta
    // * pi cosh(t) / B and stays stable at singular endpoints.
    const double log_b = std::lgamma(p.gamma) + std::lgamma(p.beta) - std::lgamma(p.gamma + p.beta);
    constexpr int kHalf = 1024;
    constexpr double kTMax = 13.0;
    const double h = kTMax / kHalf;
    std::vector<double> gram(m * m, 0.0);
    double mass = 0.0;
    double leg[kMaxOrder];
    for (int i = -kHalf; i <= kHalf; ++i) {
        const double t = i * h;
        const double s = std::numbers::pi_v<double> * std::sinh(t);
        const double lx = -std::log1p(std::exp(-s));
        const double l1x = -std::log1p(std::exp(s));
        const double lw = std::log(h * std::numbers::pi_v<double> * std::cosh(t)) +
                          p.gamma * lx + p.beta * l1x - log_b;
        if (lw < -45.0) continue;
        const double w = std::exp(lw);
        const double x = std::exp(lx);
        mass += w;
        legendre_all(m, std::min(x, 1.0), std::span<double>(leg, m));
        for (int j = 0; j < m; ++j) {
            for (int k = j; k < m; ++k) gram[j * m + k] += w * leg[j] * leg[k];
        }
    }
    if (std::fabs(mass - 1.0) > 1e-6) {
        throw std::runtime_error("chi_square_divergence: carrier quadrature lost mass");
    }
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
        acc += coeffs.values[j] * coeffs.values[j] * gram[j * m + j];
        for (int k = j + 1; k < m; ++k) {
            acc += 2.0 * coeffs.values[j] * coeffs.values[k] * gram[j * m + k];
        }
    }
    return acc;
}

}  // namespace lpfdr
