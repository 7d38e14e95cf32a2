#include "fdaclass/banded.hpp"

#include "fdaclass/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fdaclass {

BandedSymmetric::BandedSymmetric(std::size_t n, std::size_t bandwidth)
    : n_(n), bw_(bandwidth), data_(n * (bandwidth + 1), 0.0) {}

double& BandedSymmetric::at(std::size_t i, std::size_t j) {
    if (j > i) {
        std::swap(i, j);
    }
    if (i - j > bw_) {
        throw std::out_of_range("BandedSymmetric: element outside band");
    }
    return raw(i, j);
}

double BandedSymmetric::at(std::size_t i, std::size_t j) const {
    if (j > i) {
        std::swap(i, j);
    }
    if (i - j > bw_) {
        return 0.0;
    }
    return raw(i, j);
}

void BandedSymmetric::add_band_of(const Eigen::MatrixXd& dense, double scale) {
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t j0 = i > bw_ ? i - bw_ : 0;
        for (std::size_t j = j0; j <= i; ++j) {
            raw(i, j) += scale * dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
    }
}

Eigen::MatrixXd BandedSymmetric::to_dense() const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t j0 = i > bw_ ? i - bw_ : 0;
        for (std::size_t j = j0; j <= i; ++j) {
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            out(ii, jj) = raw(i, j);
            out(jj, ii) = raw(i, j);
        }
    }
    return out;
}

bool BandedSymmetric::factorize() {
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        max_diag = std::max(max_diag, std::abs(raw(i, i)));
    }
    if (n_ == 0 || max_diag == 0.0) {
        return false;
    }
    const double tol = static_cast<double>(n_) * std::numeric_limits<double>::epsilon() * max_diag;
    double min_pivot = std::numeric_limits<double>::infinity();
    double max_pivot = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
        const std::size_t k0 = j > bw_ ? j - bw_ : 0;
        double d = raw(j, j);
        for (std::size_t k = k0; k < j; ++k) {
            d -= raw(j, k) * raw(j, k);
        }
        if (!(d > tol)) {
            return false;
        }
        const double ljj = std::sqrt(d);
        raw(j, j) = ljj;
        min_pivot = std::min(min_pivot, d);
        max_pivot = std::max(max_pivot, d);
        const std::size_t i_end = std::min(n_, j + bw_ + 1);
        for (std::size_t i = j + 1; i < i_end; ++i) {
            const std::size_t kk0 = i > bw_ ? i - bw_ : 0;
            double s = raw(i, j);
            for (std::size_t k = std::max(k0, kk0); k < j; ++k) {
                s -= raw(i, k) * raw(j, k);
            }
            raw(i, j) = s / ljj;
        }
    }
    condition_ = max_pivot / min_pivot;
    factored_ = true;
    return true;
}

Eigen::VectorXd BandedSymmetric::solve(const Eigen::VectorXd& rhs) const {
    if (!factored_) {
        throw std::logic_error("BandedSymmetric::solve called before factorize");
    }
    if (static_cast<std::size_t>(rhs.size()) != n_) {
        throw std::invalid_argument("BandedSymmetric::solve: size mismatch");
    }
    Eigen::VectorXd x = rhs;
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t k0 = i > bw_ ? i - bw_ : 0;
        double s = x[static_cast<Eigen::Index>(i)];
        for (std::size_t k = k0; k < i; ++k) {
            s -= raw(i, k) * x[static_cast<Eigen::Index>(k)];
        }
        x[static_cast<Eigen::Index>(i)] = s / raw(i, i);
    }
    for (std::size_t ii = n_; ii-- > 0;) {
        const std::size_t k_end = std::min(n_, ii + bw_ + 1);
        double s = x[static_cast<Eigen::Index>(ii)];
        for (std::size_t k = ii + 1; k < k_end; ++k) {
            s -= raw(k, ii) * x[static_cast<Eigen::Index>(k)];
        }
        x[static_cast<Eigen::Index>(ii)] = s / raw(ii, ii);
    }
    return x;
}

bool ldlt_is_singular(const Eigen::LDLT<Eigen::MatrixXd>& ldlt) {
    if (ldlt.info() != Eigen::Success) {
        return true;
    }
    const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
    if (d.size() == 0) {
        return true;
    }
    const double tol = 1e-13 * static_cast<double>(d.size()) * d.maxCoeff();
    return !(d.minCoeff() > tol) || !(ldlt.rcond() > 1e-13);
}

SymmetricSolve solve_symmetric(BandedSymmetric a, const Eigen::VectorXd& rhs) {
    const BandedSymmetric original = a;
    if (a.factorize()) {
        return {a.solve(rhs), a.condition_estimate(), false};
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(original.to_dense());
    const double rcond = ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0;
    if (ldlt_is_singular(ldlt)) {
        throw SingularSystemError("symmetric system is singular within tolerance (rcond=" + std::to_string(rcond) +
                                  ", n=" + std::to_string(a.size()) + ")");
    }
    return {ldlt.solve(rhs), 1.0 / rcond, true};
}

}  // namespace fdaclass
