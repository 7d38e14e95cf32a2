#include "fdaclass/banded_qr.hpp"

#include "fdaclass/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fdaclass {

BandedLeastSquares::BandedLeastSquares(std::size_t n_cols, std::size_t width)
    : n_(n_cols), w_(width), r_(n_cols * width, 0.0), d_(n_cols, 0.0), filled_(n_cols, false) {}

void BandedLeastSquares::add_row(std::size_t first, const Eigen::VectorXd& values, double rhs) {
    const auto len = static_cast<std::size_t>(values.size());
    if (len > w_ || first + len > n_) {
        throw std::invalid_argument("BandedLeastSquares::add_row: row outside band");
    }
    // Working copy of the row, aligned so row[k] multiplies x[first + k].
    std::vector<double> row(w_, 0.0);
    for (std::size_t k = 0; k < len; ++k) {
        row[k] = values[static_cast<Eigen::Index>(k)];
    }
    double y = rhs;
    std::size_t col = first;
    while (col < n_) {
        // Skip leading zeros.
        std::size_t lead = 0;
        while (lead < w_ && row[lead] == 0.0) {
            ++lead;
        }
        if (lead == w_) {
            return;
        }
        if (lead > 0) {
            std::rotate(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(lead), row.end());
            std::fill(row.end() - static_cast<std::ptrdiff_t>(lead), row.end(), 0.0);
            col += lead;
            if (col >= n_) {
                return;
            }
        }
        if (!filled_[col]) {
            const std::size_t span = std::min(w_, n_ - col);
            for (std::size_t k = 0; k < span; ++k) {
                r(col, k) = row[k];
            }
            d_[col] = y;
            filled_[col] = true;
            return;
        }
        // Rotate (R(col, .), d[col]) against (row, y) to annihilate row[0].
        const double a = r(col, 0);
        const double b = row[0];
        const double h = std::hypot(a, b);
        const double c = a / h;
        const double s = b / h;
        const std::size_t span = std::min(w_, n_ - col);
        for (std::size_t k = 0; k < span; ++k) {
            const double rk = r(col, k);
            const double xk = row[k];
            r(col, k) = c * rk + s * xk;
            row[k] = -s * rk + c * xk;
        }
        const double dk = d_[col];
        d_[col] = c * dk + s * y;
        y = -s * dk + c * y;
        row[0] = 0.0;
    }
}

Eigen::VectorXd BandedLeastSquares::solve() const {
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        max_diag = std::max(max_diag, filled_[i] ? std::abs(r(i, 0)) : 0.0);
    }
    const double tol = static_cast<double>(n_) * std::numeric_limits<double>::epsilon() * max_diag;
    Eigen::VectorXd x(static_cast<Eigen::Index>(n_));
    for (std::size_t ii = n_; ii-- > 0;) {
        if (!filled_[ii] || !(std::abs(r(ii, 0)) > tol)) {
            throw SingularSystemError("least-squares system is rank deficient at column " + std::to_string(ii) +
                                      " of " + std::to_string(n_));
        }
        double s = d_[ii];
        const std::size_t span = std::min(w_, n_ - ii);
        for (std::size_t k = 1; k < span; ++k) {
            s -= r(ii, k) * x[static_cast<Eigen::Index>(ii + k)];
        }
        x[static_cast<Eigen::Index>(ii)] = s / r(ii, 0);
    }
    return x;
}

double BandedLeastSquares::condition_estimate() const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        const double v = filled_[i] ? std::abs(r(i, 0)) : 0.0;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return lo > 0.0 ? (hi / lo) * (hi / lo) : std::numeric_limits<double>::infinity();
}

}  // namespace fdaclass
