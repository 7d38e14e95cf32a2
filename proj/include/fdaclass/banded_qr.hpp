#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace fdaclass {

// Row-by-row Givens QR for least-squares problems whose rows have at most
// `width` consecutive nonzeros (B-spline design and penalty-factor rows).
// Works on the augmented system directly, so its conditioning is the square
// root of that of the normal equations.
class BandedLeastSquares {
public:
    BandedLeastSquares(std::size_t n_cols, std::size_t width);

    // Adds the row  sum_j values[j] * x[first + j]  ~=  rhs.
    void add_row(std::size_t first, const Eigen::VectorXd& values, double rhs);

    // Throws SingularSystemError when the triangular factor has a pivot that
    // is negligible relative to the largest one.
    Eigen::VectorXd solve() const;

    // Ratio of the largest to smallest |diagonal| of the triangular factor
    // squared: an estimate of the normal-equation condition number.
    double condition_estimate() const;

private:
    std::size_t n_ = 0;
    std::size_t w_ = 0;
    std::vector<double> r_;  // row i holds R(i, i .. i + w - 1)
    std::vector<double> d_;
    std::vector<bool> filled_;

    double& r(std::size_t i, std::size_t off) { return r_[i * w_ + off]; }
    double r(std::size_t i, std::size_t off) const { return r_[i * w_ + off]; }
};

}  // namespace fdaclass
