#include "fdaclass/smooth.hpp"

#include "fdaclass/banded_qr.hpp"
#include "fdaclass/error.hpp"

#include <cmath>
#include <string>

namespace fdaclass {

void validate_observation(const Observation& obs, const Interval& domain) {
    if (obs.times.size() != obs.values.size()) {
        throw InputError("observation times and values differ in length");
    }
    if (obs.times.empty()) {
        throw InputError("observation is empty");
    }
    for (std::size_t j = 0; j < obs.times.size(); ++j) {
        if (!std::isfinite(obs.values[j])) {
            throw InputError("non-finite observation value at index " + std::to_string(j));
        }
        if (j > 0 && !(obs.times[j] > obs.times[j - 1])) {
            throw InputError("observation times must be strictly increasing");
        }
    }
    const double slack = 1e-12 * domain.length();
    if (obs.times.front() < domain.lo - slack || obs.times.back() > domain.hi + slack) {
        throw InputError("observation time outside the basis domain");
    }
}

double SmoothCurve::value(double t, int deriv) const {
    const LocalBasis local = basis->eval_local(t, deriv);
    return local.values.dot(coef.segment(local.first, local.values.size()));
}

Eigen::VectorXd SmoothCurve::evaluate(std::span<const double> grid, int deriv) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = value(grid[i], deriv);
    }
    return out;
}

Eigen::VectorXd evaluate(const SmoothCurve& curve, std::span<const double> grid, int deriv) {
    return curve.evaluate(grid, deriv);
}

BandedSymmetric normal_matrix(const Observation& obs, const BasisSystem& sys, double lambda, int m) {
    const auto k = static_cast<std::size_t>(sys.size());
    BandedSymmetric a(k, static_cast<std::size_t>(sys.order() - 1));
    for (double t : obs.times) {
        const LocalBasis local = sys.eval_local(t, 0);
        for (Eigen::Index i = 0; i < local.values.size(); ++i) {
            for (Eigen::Index j = 0; j <= i; ++j) {
                a.at(static_cast<std::size_t>(local.first + i), static_cast<std::size_t>(local.first + j)) +=
                    local.values[i] * local.values[j];
            }
        }
    }
    if (lambda != 0.0) {
        a.add_band_of(sys.penalty(m), lambda);
    }
    return a;
}

namespace {

void check_fit_args(const BasisSystem& sys, double lambda, int m) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InputError("smoothing parameter must be finite and >= 0");
    }
    if (m < 1 || m >= sys.order()) {
        throw InputError("penalty order m=" + std::to_string(m) + " requires 1 <= m < order " +
                         std::to_string(sys.order()));
    }
}

}  // namespace

SmoothCurve penalized_fit(const Observation& obs, BasisPtr sys, double lambda, int m) {
    check_fit_args(*sys, lambda, m);
    validate_observation(obs, sys->domain());
    // Least squares on [Phi; sqrt(lambda) M] with M'M = R, solved by banded
    // Givens QR rather than through the normal equations.
    BandedLeastSquares ls(static_cast<std::size_t>(sys->size()), static_cast<std::size_t>(sys->order()));
    for (std::size_t j = 0; j < obs.times.size(); ++j) {
        const LocalBasis local = sys->eval_local(obs.times[j], 0);
        ls.add_row(static_cast<std::size_t>(local.first), local.values, obs.values[j]);
    }
    if (lambda > 0.0) {
        const double scale = std::sqrt(lambda);
        for (const LocalBasis& row : sys->penalty_factor(m)) {
            ls.add_row(static_cast<std::size_t>(row.first), scale * row.values, 0.0);
        }
    }
    SmoothCurve curve;
    curve.coef = ls.solve();
    curve.basis = std::move(sys);
    curve.lambda = lambda;
    curve.penalty_order = m;
    curve.condition_estimate = ls.condition_estimate();
    if (!curve.coef.allFinite()) {
        throw NumericalError("smoothing produced non-finite coefficients");
    }
    return curve;
}

Eigen::MatrixXd fit_rows(std::span<const double> times, const Eigen::MatrixXd& values, BasisPtr sys, double lambda,
                         int m) {
    check_fit_args(*sys, lambda, m);
    if (values.cols() != static_cast<Eigen::Index>(times.size())) {
        throw InputError("fit_rows: values do not match sampling times");
    }
    if (!values.allFinite()) {
        throw InputError("fit_rows: non-finite values");
    }
    Observation probe{{times.begin(), times.end()}, std::vector<double>(times.size(), 0.0)};
    validate_observation(probe, sys->domain());

    const Eigen::Index n = values.cols();
    const Eigen::Index k = sys->size();
    const std::vector<LocalBasis>* factor = lambda > 0.0 ? &sys->penalty_factor(m) : nullptr;
    const Eigen::Index extra = factor ? static_cast<Eigen::Index>(factor->size()) : 0;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + extra, k);
    a.topRows(n) = sys->design_matrix(times);
    if (factor) {
        const double scale = std::sqrt(lambda);
        for (Eigen::Index r = 0; r < extra; ++r) {
            const LocalBasis& row = (*factor)[static_cast<std::size_t>(r)];
            a.row(n + r).segment(row.first, row.values.size()) = scale * row.values.transpose();
        }
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    const Eigen::VectorXd diag = qr.matrixQR().diagonal().cwiseAbs();
    if (diag.minCoeff() <= 1e-12 * diag.maxCoeff()) {
        throw SingularSystemError("shared-grid smoothing system is rank deficient (n=" + std::to_string(n) +
                                  ", K=" + std::to_string(k) + ")");
    }
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + extra, values.rows());
    rhs.topRows(n) = values.transpose();
    return qr.solve(rhs).transpose();
}

SmoothCurve resmooth_for_derivative(const SmoothCurve& curve, std::span<const double> grid, double lambda) {
    if (grid.size() < 2) {
        throw InputError("derivative refit needs a grid of at least two points");
    }
    Observation obs;
    obs.times.assign(grid.begin(), grid.end());
    const Eigen::VectorXd y = curve.evaluate(grid, 0);
    obs.values.assign(y.data(), y.data() + y.size());
    validate_observation(obs, curve.basis->domain());

    BasisSpec spec;
    spec.order = kDerivativeOrder;
    spec.domain = curve.basis->domain();
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        if (grid[i] > spec.domain.lo && grid[i] < spec.domain.hi) {
            spec.interior_breakpoints.push_back(grid[i]);
        }
    }
    return penalized_fit(obs, make_basis(std::move(spec)), lambda, kDerivativePenalty);
}

double gcv_score(const Observation& obs, BasisPtr sys, double lambda, int m) {
    check_fit_args(*sys, lambda, m);
    validate_observation(obs, sys->domain());
    const Eigen::MatrixXd phi = sys->design_matrix(obs.times);
    const Eigen::Map<const Eigen::VectorXd> y(obs.values.data(), static_cast<Eigen::Index>(obs.values.size()));
    const Eigen::MatrixXd gram = phi.transpose() * phi;
    Eigen::MatrixXd a = gram;
    if (lambda != 0.0) {
        a += lambda * sys->penalty(m);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt_is_singular(ldlt)) {
        throw SingularSystemError("GCV: normal matrix singular");
    }
    const Eigen::VectorXd coef = ldlt.solve(phi.transpose() * y);
    const double sse = (y - phi * coef).squaredNorm();
    // tr(H) = tr(A^-1 Phi'Phi)
    const double trace_h = ldlt.solve(gram).trace();
    const auto n = static_cast<double>(obs.times.size());
    const double dof_left = n - trace_h;
    if (!(dof_left > 1e-8 * n)) {
        throw NumericalError("GCV undefined: effective degrees of freedom reach n");
    }
    return n * sse / (dof_left * dof_left);
}

}  // namespace fdaclass
