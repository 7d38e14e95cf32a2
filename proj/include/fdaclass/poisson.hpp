#pragma once

#include "fdaclass/basis.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace fdaclass {

// Sorted (non-decreasing) arrival times inside the basis domain. Repeated
// times count with multiplicity.
struct EventTimes {
    std::vector<double> times;
};

struct RateOptions {
    int penalty_order = 1;
    int nodes_per_span = 10;
    double gradient_tolerance = 1e-8;
    double decrement_tolerance = 1e-13;  // relative to |objective|
    int max_iterations = 200;
    double floor_rate = 1e-6;    // intensity returned for an empty event set
    double max_log_rate = 50.0;  // iterates with |c' phi| above this are rejected
};

inline constexpr double kRateLambda = 0.1;

// mu(t) = exp(coef' phi(t)).
struct RateFit {
    BasisPtr basis;
    Eigen::VectorXd coef;
    double lambda = 0.0;
    int penalty_order = 1;
    bool converged = false;
    bool empty_events = false;
    double final_gradient_norm = 0.0;
    int iterations = 0;
    std::vector<double> objective_trace;  // penalized log-likelihood after each accepted step

    double log_rate(double t) const;
    Eigen::VectorXd eval(std::span<const double> grid) const;
};

struct LoglikDerivatives {
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
};

// sum_i c'phi(t_i) - integral exp(c'phi) - lambda c'Rc, the integral by
// Gauss-Legendre on every knot span. Throws NumericalError when
// |c'phi| exceeds options.max_log_rate at a quadrature node.
double penalized_loglik(const Eigen::VectorXd& coef, const EventTimes& events, const BasisSystem& sys, double lambda,
                        const RateOptions& options = {});

// Value, analytic gradient and Hessian of penalized_loglik.
LoglikDerivatives penalized_loglik_derivatives(const Eigen::VectorXd& coef, const EventTimes& events,
                                               const BasisSystem& sys, double lambda, const RateOptions& options = {});

// Maximizes penalized_loglik by damped Newton. Non-convergence is reported
// through RateFit::converged, not by throwing.
RateFit fit_rate(const EventTimes& events, BasisPtr sys, double lambda = kRateLambda, const RateOptions& options = {});

Eigen::VectorXd eval_rate(const RateFit& fit, std::span<const double> grid);

}  // namespace fdaclass
