#include "fdaclass/fpca.hpp"

#include "fdaclass/banded.hpp"
#include "fdaclass/error.hpp"

#include <cmath>
#include <string>

namespace fdaclass {

namespace {

constexpr double kGramEigenFloor = 1e-12;

void check_set(const CurveSet& set) {
    if (!set.basis) {
        throw InputError("curve set has no basis");
    }
    if (set.coefs.rows() < 1) {
        throw InputError("curve set is empty");
    }
    if (set.coefs.cols() != set.basis->size()) {
        throw InputError("curve set coefficients do not match basis size");
    }
    if (!set.coefs.allFinite()) {
        throw InputError("curve set contains non-finite coefficients");
    }
}

void check_same_basis(const BasisPtr& a, const BasisPtr& b) {
    if (a != b && !(a && b && a->spec() == b->spec())) {
        throw InputError("curve set and FPCA model use different bases");
    }
}

}  // namespace

Eigen::VectorXd mean_curve(const CurveSet& set) {
    check_set(set);
    return set.coefs.colwise().mean().transpose();
}

CurveSet center(const CurveSet& set) {
    CurveSet out = set;
    const Eigen::RowVectorXd mu = mean_curve(set).transpose();
    out.coefs.rowwise() -= mu;
    return out;
}

FpcaModel fit_fpca(const CurveSet& set, Eigen::Index n_components, int penalty_order) {
    check_set(set);
    const Eigen::Index m = set.coefs.rows();
    const Eigen::Index k = set.basis->size();
    if (m < 2) {
        throw InputError("FPCA needs at least two curves");
    }
    if (n_components < 1 || n_components > std::min(m - 1, k)) {
        throw InputError("FPCA: number of components " + std::to_string(n_components) + " must be in [1, " +
                         std::to_string(std::min(m - 1, k)) + "]");
    }

    FpcaModel model;
    model.basis = set.basis;
    model.n_curves = m;
    model.penalty_order = penalty_order;
    model.gram = set.basis->gram();
    model.mean_coef = mean_curve(set);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram_eig(model.gram);
    if (gram_eig.info() != Eigen::Success || gram_eig.eigenvalues().minCoeff() < kGramEigenFloor) {
        throw NumericalError("Gram matrix is not positive definite; basis is degenerate");
    }
    const Eigen::MatrixXd& v = gram_eig.eigenvectors();
    const Eigen::VectorXd sqrt_d = gram_eig.eigenvalues().cwiseSqrt();
    const Eigen::MatrixXd w_half = v * sqrt_d.asDiagonal() * v.transpose();
    const Eigen::MatrixXd w_inv_half = v * sqrt_d.cwiseInverse().asDiagonal() * v.transpose();

    Eigen::MatrixXd centered = set.coefs;
    centered.rowwise() -= model.mean_coef.transpose();
    const Eigen::MatrixXd wc = centered * w_half;  // rows: (W^1/2 c_i)'
    Eigen::MatrixXd s = (wc.transpose() * wc) / static_cast<double>(m - 1);
    s = 0.5 * (s + s.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("FPCA eigensolver failed");
    }
    // Eigen returns ascending order.
    const Eigen::VectorXd evals = eig.eigenvalues().reverse();
    const Eigen::MatrixXd u = eig.eigenvectors().rowwise().reverse();

    model.all_eigenvalues = evals.cwiseMax(0.0);
    Eigen::MatrixXd b = w_inv_half * u.leftCols(n_components);
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
        Eigen::Index arg = 0;
        b.col(j).cwiseAbs().maxCoeff(&arg);
        if (b(arg, j) < 0.0) {
            b.col(j) *= -1.0;
        }
    }
    model.eigen_coefs = std::move(b);
    model.eigenvalues = model.all_eigenvalues.head(n_components);
    model.penalty_star =
        model.eigen_coefs.transpose() * set.basis->penalty(penalty_order) * model.eigen_coefs;
    return model;
}

FpcaModel truncate(const FpcaModel& model, Eigen::Index n) {
    if (n < 1 || n > model.n_components()) {
        throw InputError("truncate: component count out of range");
    }
    FpcaModel out = model;
    out.eigen_coefs = model.eigen_coefs.leftCols(n);
    out.eigenvalues = model.eigenvalues.head(n);
    out.penalty_star = model.penalty_star.topLeftCorner(n, n);
    return out;
}

Eigen::MatrixXd train_scores(const CurveSet& set, const FpcaModel& model) {
    check_set(set);
    check_same_basis(set.basis, model.basis);
    Eigen::MatrixXd centered = set.coefs;
    centered.rowwise() -= model.mean_coef.transpose();
    return centered * model.gram * model.eigen_coefs;
}

Eigen::MatrixXd project_rows(std::span<const double> times, const Eigen::MatrixXd& values, const FpcaModel& model,
                             double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InputError("projection smoothing parameter must be finite and >= 0");
    }
    if (values.cols() != static_cast<Eigen::Index>(times.size())) {
        throw InputError("projection values do not match sampling times");
    }
    const Eigen::MatrixXd phi = model.basis->design_matrix(times);
    const Eigen::MatrixXd xi = phi * model.eigen_coefs;
    const Eigen::VectorXd mu = phi * model.mean_coef;
    Eigen::MatrixXd a = xi.transpose() * xi;
    if (lambda != 0.0) {
        a += lambda * model.penalty_star;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt_is_singular(ldlt)) {
        throw SingularSystemError("FPC projection system is singular (n=" + std::to_string(times.size()) +
                                  ", L=" + std::to_string(model.n_components()) + ")");
    }
    // Row by row, so a curve's scores do not depend on the rest of the batch.
    const Eigen::MatrixXd xit = xi.transpose();
    Eigen::MatrixXd out(values.rows(), xi.cols());
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        const Eigen::VectorXd centered = values.row(i).transpose() - mu;
        const Eigen::VectorXd rhs = xit * centered;
        out.row(i) = ldlt.solve(rhs).transpose();
    }
    return out;
}

Eigen::VectorXd project(const Observation& obs, const FpcaModel& model, double lambda) {
    validate_observation(obs, model.basis->domain());
    const Eigen::Map<const Eigen::RowVectorXd> y(obs.values.data(), static_cast<Eigen::Index>(obs.values.size()));
    return project_rows(obs.times, Eigen::MatrixXd(y), model, lambda).row(0).transpose();
}

double explained_variance(const FpcaModel& model, Eigen::Index n) {
    if (n < 1 || n > model.n_components()) {
        throw InputError("explained_variance: component count out of range");
    }
    const double total = model.all_eigenvalues.sum();
    if (total <= 0.0) {
        return 1.0;
    }
    return model.all_eigenvalues.head(n).sum() / total;
}

double covariance_at(const FpcaModel& model, double s, double t) {
    const Eigen::VectorXd xs = model.eigen_coefs.transpose() * model.basis->eval(s);
    const Eigen::VectorXd xt = model.eigen_coefs.transpose() * model.basis->eval(t);
    // Symmetric in (s, t) term by term.
    double acc = 0.0;
    for (Eigen::Index j = 0; j < xs.size(); ++j) {
        acc += model.eigenvalues[j] * (xs[j] * xt[j]);
    }
    return acc;
}

Eigen::VectorXd FpcaModel::eigenfunction(Eigen::Index j, std::span<const double> grid) const {
    return basis->design_matrix(grid) * eigen_coefs.col(j);
}

Eigen::VectorXd FpcaModel::mean(std::span<const double> grid) const { return basis->design_matrix(grid) * mean_coef; }

}  // namespace fdaclass
