#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lpfdr/special_math.hpp"

namespace lpfdr {

// Basis the LP coefficients are taken against: scores are Leg_j(F(u)) where
// F is either the identity (uniform carrier) or a Beta(gamma, beta) CDF.
struct LPBasis {
    enum class Kind { Uniform, Beta };

    Kind kind = Kind::Uniform;
    BetaParams carrier;  // meaningful only when kind == Beta

    static LPBasis uniform() { return LPBasis{}; }
    static LPBasis beta(const BetaParams& p) { return LPBasis{Kind::Beta, p}; }

    bool operator==(const LPBasis& o) const {
        if (kind != o.kind) return false;
        return kind == Kind::Uniform || carrier == o.carrier;
    }
};

// LP[1..m] against a tagged basis.
struct LPCoefficients {
    LPBasis basis;
    std::vector<double> values;

    int order() const { return static_cast<int>(values.size()); }
};

// LP[j] = mean of Leg_j(F(u_i)) over the sample, compensated summation in
// input order. All values must lie strictly inside (0,1); m in [1,20].
LPCoefficients lp_coefficients(std::span<const double> values, const LPBasis& basis, int m);

// Method-of-moments Beta fit from raw first and second moments:
//   gamma = m1(m1-m2)/(m2-m1^2), beta = (1-m1)(m1-m2)/(m2-m1^2).
// Estimates outside [1e-4, 1e4] are clamped; *clamped reports when that
// happened. Infeasible moments (m2 <= m1^2 or m2 >= m1) are an error.
BetaParams fit_beta_moments(double m1, double m2, bool* clamped = nullptr);

// AIC truncation: AIC(k) = sum of the k largest squared coefficients - 2k/n,
// maximized over k (smallest k on ties, k = 0 allowed). Non-selected entries
// are zeroed in place, original order kept.
LPCoefficients select_coefficients_aic(const LPCoefficients& raw, std::int64_t n_total);

// Skew-Beta comparison density
//   d(u) = f_B(u; gamma, beta) [1 + sum_j LP[j] Leg_j(F_B(u))]
// with a nonnegativity repair: the bracket is clipped at zero and, when the
// clip actually triggers anywhere, the density is renormalized by its
// numerical integral and the CDF falls back to a cached numerical table.
struct SkewBetaModel {
    BetaParams carrier;
    LPCoefficients coefficients;  // beta-basis, post-selection
    std::int64_t n_total = 0;
    double eta = 1.0;
    bool repair_applied = false;

    // Repair cache over t = F_B(u): cumulative integral of max(0, bracket(t))
    // at grid nodes, and its total (the renormalizer). Empty when no repair.
    std::vector<double> repair_cum;
    double normalizer = 1.0;

    // Builds the model, detects the repair, and fixes eta (estimate_eta unless
    // an override is supplied).
    static SkewBetaModel build(const BetaParams& carrier, LPCoefficients selected,
                               std::int64_t n_total, std::optional<double> eta_override);
};

// 1 + sum_j LP[j] Leg_j(t), the series bracket in carrier-CDF coordinates.
double series_bracket(const SkewBetaModel& model, double t);

// Repaired density estimate, always >= 0.
double density_eval(const SkewBetaModel& model, double u);

// Unclipped series density (may be negative); the superposition identity
// holds for this raw form.
double density_eval_raw(const SkewBetaModel& model, double u);

// Model CDF. Closed form F_B(u) + sum_j LP[j] G_j(F_B(u)) when no repair was
// needed, otherwise the cached numerical integral of the repaired density.
double cdf_eval(const SkewBetaModel& model, double u);

// Plug-in null proportion: min(1, min of density_eval over a 1024-point
// interior grid), floored away from zero.
double estimate_eta(const SkewBetaModel& model);

// Chi-square divergence of the skewed model from its carrier. Uniform basis:
// sum of squared coefficients. Beta basis: quadratic form with the Gram
// matrix Ex_B[Leg_j(U) Leg_k(U)] computed by quadrature against the carrier.
double chi_square_divergence(const LPCoefficients& coeffs);

constexpr int kMaxOrder = 20;

}  // namespace lpfdr
