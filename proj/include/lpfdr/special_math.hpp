#pragma once

#include <span>

namespace lpfdr {

// Parameters of a Beta(gamma, beta) carrier density on [0,1].
struct BetaParams {
    double gamma = 1.0;
    double beta = 1.0;

    bool is_valid() const;
    void validate() const;  // throws std::invalid_argument
    bool operator==(const BetaParams& o) const { return gamma == o.gamma && beta == o.beta; }
};

// ============================================================
// Orthonormal shifted Legendre polynomials on [0,1]
//   Leg_1(u) = sqrt(3)(2u-1)
//   Leg_2(u) = sqrt(5)(6u^2-6u+1)
//   Leg_j(u) = sqrt(2j+1) P_j(2u-1), P_j the classical Legendre polynomial
// ============================================================

// Value of Leg_j(u) for degree j >= 1, u in [0,1].
double legendre(int degree, double u);

// Evaluates Leg_1..Leg_m at u into out[0..m-1] with one recurrence sweep.
void legendre_all(int max_degree, double u, std::span<double> out);

// Antiderivative G_j(x) = integral of Leg_j from 0 to x.
// Closed form: (P_{j+1}(2x-1) - P_{j-1}(2x-1)) / (2 sqrt(2j+1)); G_j(0) = G_j(1) = 0.
double legendre_antiderivative(int degree, double x);
void legendre_antiderivative_all(int max_degree, double x, std::span<double> out);

// sup of |Leg_j| on [0,1], attained at the endpoints.
double legendre_sup(int degree);

// ============================================================
// Beta distribution
// ============================================================

// Density of Beta(gamma, beta) at u in [0,1].
// Endpoint conventions: returns +inf where the density diverges (gamma < 1
// at u = 0, beta < 1 at u = 1) and the exact limit otherwise.
double beta_pdf(double u, const BetaParams& p);

// Regularized incomplete beta I_u(gamma, beta) via Lentz continued fraction,
// symmetry switch at u = (gamma+1)/(gamma+beta+2). Absolute error <= 1e-10.
double beta_cdf(double u, const BetaParams& p);

// Inverse of beta_cdf by bracketed bisection, |error| <= 1e-10.
double beta_quantile(double q, const BetaParams& p);

// ============================================================
// Standard normal
// ============================================================

double std_normal_cdf(double z);

// Inverse standard normal CDF, q in (0,1). Rational initial guess refined
// by Halley steps; |error| <= 1e-12.
double std_normal_quantile(double q);

}  // namespace lpfdr
