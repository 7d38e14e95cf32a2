#include "fdaclass/poisson.hpp"

#include "fdaclass/banded.hpp"
#include "fdaclass/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace fdaclass {

namespace {

void validate_events(const EventTimes& events, const Interval& domain) {
    const double slack = 1e-12 * domain.length();
    for (std::size_t i = 0; i < events.times.size(); ++i) {
        const double t = events.times[i];
        if (!(t >= domain.lo - slack && t <= domain.hi + slack)) {
            throw InputError("event time " + std::to_string(t) + " outside the basis domain");
        }
        if (i > 0 && t < events.times[i - 1]) {
            throw InputError("event times must be sorted");
        }
    }
}

// Basis values at the events and at the quadrature nodes, reused across
// Newton iterations.
struct Workspace {
    const BasisSystem& sys;
    Eigen::VectorXd event_sum;  // sum_i phi(t_i)
    std::vector<LocalBasis> nodes;
    std::vector<double> weights;
    const Eigen::MatrixXd& penalty;

    Workspace(const EventTimes& events, const BasisSystem& s, const RateOptions& options)
        : sys(s), event_sum(Eigen::VectorXd::Zero(s.size())), penalty(s.penalty(options.penalty_order)) {
        validate_events(events, s.domain());
        for (double t : events.times) {
            const LocalBasis local = s.eval_local(t, 0);
            event_sum.segment(local.first, local.values.size()) += local.values;
        }
        s.for_each_quadrature_node(options.nodes_per_span, [&](double t, double w) {
            nodes.push_back(s.eval_local(t, 0));
            weights.push_back(w);
        });
    }

    double eta(const LocalBasis& local, const Eigen::VectorXd& coef) const {
        return local.values.dot(coef.segment(local.first, local.values.size()));
    }

    // Returns false when some |eta| exceeds the cap.
    bool within_cap(const Eigen::VectorXd& coef, double cap) const {
        for (const LocalBasis& local : nodes) {
            if (std::abs(eta(local, coef)) > cap) {
                return false;
            }
        }
        return true;
    }

    double value(const Eigen::VectorXd& coef, double lambda) const {
        double integral = 0.0;
        for (std::size_t q = 0; q < nodes.size(); ++q) {
            integral += weights[q] * std::exp(eta(nodes[q], coef));
        }
        return coef.dot(event_sum) - integral - lambda * coef.dot(penalty * coef);
    }

    // Gradient and the band of -Hessian.
    void derivatives(const Eigen::VectorXd& coef, double lambda, Eigen::VectorXd& grad, BandedSymmetric& neg_hess) const {
        grad = event_sum - 2.0 * lambda * (penalty * coef);
        neg_hess = BandedSymmetric(static_cast<std::size_t>(sys.size()), static_cast<std::size_t>(sys.order() - 1));
        for (std::size_t q = 0; q < nodes.size(); ++q) {
            const LocalBasis& local = nodes[q];
            const double mu_w = weights[q] * std::exp(eta(local, coef));
            const Eigen::Index n = local.values.size();
            grad.segment(local.first, n) -= mu_w * local.values;
            for (Eigen::Index a = 0; a < n; ++a) {
                for (Eigen::Index b = 0; b <= a; ++b) {
                    neg_hess.at(static_cast<std::size_t>(local.first + a), static_cast<std::size_t>(local.first + b)) +=
                        mu_w * local.values[a] * local.values[b];
                }
            }
        }
        neg_hess.add_band_of(penalty, 2.0 * lambda);
    }
};

void check_coef(const Eigen::VectorXd& coef, const BasisSystem& sys) {
    if (coef.size() != sys.size() || !coef.allFinite()) {
        throw InputError("rate coefficients must be finite and match the basis size");
    }
}

// Solves W c = value * integral(phi): the basis projection of a constant.
Eigen::VectorXd constant_coefficients(const BasisSystem& sys, double value) {
    BandedSymmetric w(static_cast<std::size_t>(sys.size()), static_cast<std::size_t>(sys.order() - 1));
    w.add_band_of(sys.gram(), 1.0);
    const Eigen::VectorXd phi_integral = sys.gram().rowwise().sum();  // W 1 = integral(phi) by partition of unity
    return solve_symmetric(std::move(w), value * phi_integral).x;
}

}  // namespace

double penalized_loglik(const Eigen::VectorXd& coef, const EventTimes& events, const BasisSystem& sys, double lambda,
                        const RateOptions& options) {
    check_coef(coef, sys);
    const Workspace ws(events, sys, options);
    if (!ws.within_cap(coef, options.max_log_rate)) {
        throw NumericalError("log-rate exceeds " + std::to_string(options.max_log_rate) +
                             " at a quadrature node; exp would overflow");
    }
    return ws.value(coef, lambda);
}

LoglikDerivatives penalized_loglik_derivatives(const Eigen::VectorXd& coef, const EventTimes& events,
                                               const BasisSystem& sys, double lambda, const RateOptions& options) {
    check_coef(coef, sys);
    const Workspace ws(events, sys, options);
    if (!ws.within_cap(coef, options.max_log_rate)) {
        throw NumericalError("log-rate exceeds cap at a quadrature node");
    }
    LoglikDerivatives out;
    out.value = ws.value(coef, lambda);
    BandedSymmetric neg_hess;
    ws.derivatives(coef, lambda, out.gradient, neg_hess);
    out.hessian = -neg_hess.to_dense();
    return out;
}

RateFit fit_rate(const EventTimes& events, BasisPtr sys, double lambda, const RateOptions& options) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InputError("rate smoothing parameter must be finite and >= 0");
    }
    RateFit fit;
    fit.basis = sys;
    fit.lambda = lambda;
    fit.penalty_order = options.penalty_order;

    const auto n = static_cast<double>(events.times.size());
    if (events.times.empty()) {
        validate_events(events, sys->domain());
        fit.coef = constant_coefficients(*sys, std::log(options.floor_rate));
        fit.converged = true;
        fit.empty_events = true;
        return fit;
    }

    const Workspace ws(events, *sys, options);
    Eigen::VectorXd coef = constant_coefficients(*sys, std::log(n));
    double value = ws.value(coef, lambda);
    fit.objective_trace.push_back(value);
    Eigen::VectorXd grad;
    BandedSymmetric neg_hess;

    int iter = 0;
    for (;; ++iter) {
        ws.derivatives(coef, lambda, grad, neg_hess);
        fit.final_gradient_norm = grad.norm();
        if (fit.final_gradient_norm < options.gradient_tolerance) {
            fit.converged = true;
            break;
        }
        if (iter == options.max_iterations) {
            break;
        }
        Eigen::VectorXd step;
        try {
            step = solve_symmetric(std::move(neg_hess), grad).x;
        } catch (const SingularSystemError&) {
            break;
        }
        // g' H^-1 g / 2 estimates the remaining ascent; once it is at the
        // objective's rounding level the gradient cannot shrink further.
        if (grad.dot(step) <= options.decrement_tolerance * std::max(1.0, std::abs(value))) {
            fit.converged = true;
            break;
        }
        bool accepted = false;
        double scale = 1.0;
        for (int halving = 0; halving < 60; ++halving, scale *= 0.5) {
            const Eigen::VectorXd trial = coef + scale * step;
            if (!ws.within_cap(trial, options.max_log_rate)) {
                continue;
            }
            const double trial_value = ws.value(trial, lambda);
            if (trial_value >= value) {
                coef = trial;
                value = trial_value;
                fit.objective_trace.push_back(value);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // No ascent left at working precision: converged if the Newton
            // decrement is at rounding level.
            fit.converged = grad.dot(step) <= 1e-12 * std::max(1.0, std::abs(value));
            break;
        }
    }
    fit.iterations = iter;
    fit.coef = std::move(coef);
    return fit;
}

double RateFit::log_rate(double t) const {
    const LocalBasis local = basis->eval_local(t, 0);
    return local.values.dot(coef.segment(local.first, local.values.size()));
}

Eigen::VectorXd RateFit::eval(std::span<const double> grid) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = std::exp(log_rate(grid[i]));
    }
    return out;
}

Eigen::VectorXd eval_rate(const RateFit& fit, std::span<const double> grid) { return fit.eval(grid); }

}  // namespace fdaclass
