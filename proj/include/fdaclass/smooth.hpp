#pragma once

#include "fdaclass/banded.hpp"
#include "fdaclass/basis.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace fdaclass {

// Sampled curve: strictly increasing times inside the basis domain.
struct Observation {
    std::vector<double> times;
    std::vector<double> values;
};

// x(t) = coef' phi(t) over a shared basis.
struct SmoothCurve {
    BasisPtr basis;
    Eigen::VectorXd coef;
    double lambda = 0.0;
    int penalty_order = 2;
    double condition_estimate = 0.0;  // diagnostic from the normal-equation solve

    double value(double t, int deriv = 0) const;
    Eigen::VectorXd evaluate(std::span<const double> grid, int deriv = 0) const;
};

inline constexpr double kLevelLambda = 1e-3;
inline constexpr double kDerivativeLambda = 1e-4;
inline constexpr int kDerivativeOrder = 5;
inline constexpr int kDerivativePenalty = 3;

// Phi' Phi + lambda R, band-assembled.
BandedSymmetric normal_matrix(const Observation& obs, const BasisSystem& sys, double lambda, int m);

// argmin ||y - Phi c||^2 + lambda c' R_m c. Throws SingularSystemError when
// the normal matrix is singular (e.g. lambda = 0 with K > n).
SmoothCurve penalized_fit(const Observation& obs, BasisPtr sys, double lambda, int m);

// penalized_fit for many curves sampled at the same times: one row of
// `values` per curve, one row of coefficients per curve in the result.
Eigen::MatrixXd fit_rows(std::span<const double> times, const Eigen::MatrixXd& values, BasisPtr sys, double lambda,
                         int m);

Eigen::VectorXd evaluate(const SmoothCurve& curve, std::span<const double> grid, int deriv = 0);

// Samples `curve` on `grid` and refits with an order-5 basis (knots at the
// interior grid points) under a third-derivative penalty, so the first
// derivative of the result is itself smooth.
SmoothCurve resmooth_for_derivative(const SmoothCurve& curve, std::span<const double> grid,
                                    double lambda = kDerivativeLambda);

// n * SSE / (n - tr H)^2 with H = Phi (Phi'Phi + lambda R)^-1 Phi'.
double gcv_score(const Observation& obs, BasisPtr sys, double lambda, int m);

void validate_observation(const Observation& obs, const Interval& domain);

}  // namespace fdaclass
