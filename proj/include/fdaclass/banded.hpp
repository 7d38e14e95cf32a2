#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace fdaclass {

// Symmetric banded matrix stored by its lower band, with an in-place
// Cholesky factorization. Used for the B-spline normal equations, whose
// bandwidth is order - 1 regardless of the number of basis functions.
class BandedSymmetric {
public:
    BandedSymmetric() = default;
    BandedSymmetric(std::size_t n, std::size_t bandwidth);

    std::size_t size() const { return n_; }
    std::size_t bandwidth() const { return bw_; }

    // Element (i, j) with |i - j| <= bandwidth; either triangle.
    double& at(std::size_t i, std::size_t j);
    double at(std::size_t i, std::size_t j) const;

    // this += scale * band(dense)
    void add_band_of(const Eigen::MatrixXd& dense, double scale);

    Eigen::MatrixXd to_dense() const;

    // Factorizes in place. Returns false when a pivot is not safely positive
    // (matrix singular or indefinite within tolerance); the object is then
    // left in an unspecified state.
    bool factorize();

    // Entry (i, j), i >= j, of the Cholesky factor L; requires factorize().
    double factor(std::size_t i, std::size_t j) const { return i - j > bw_ ? 0.0 : raw(i, j); }

    // Requires a successful factorize().
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

    // Ratio of the largest to smallest squared Cholesky pivot; a cheap lower
    // bound on the 2-norm condition number.
    double condition_estimate() const { return condition_; }

private:
    std::size_t n_ = 0;
    std::size_t bw_ = 0;
    std::vector<double> data_;  // row i holds a(i, i - bw .. i)
    double condition_ = 0.0;
    bool factored_ = false;

    double& raw(std::size_t i, std::size_t j) { return data_[i * (bw_ + 1) + (bw_ - (i - j))]; }
    double raw(std::size_t i, std::size_t j) const { return data_[i * (bw_ + 1) + (bw_ - (i - j))]; }
};

struct SymmetricSolve {
    Eigen::VectorXd x;
    double condition_estimate = 0.0;
    bool used_fallback = false;
};

// Solves A x = rhs for symmetric A: banded Cholesky first, then a dense
// symmetric-indefinite (LDLT) factorization. Throws SingularSystemError when
// the matrix is singular within tolerance.
SymmetricSolve solve_symmetric(BandedSymmetric a, const Eigen::VectorXd& rhs);

// True when a dense LDLT factorization failed or has a pivot that is
// negligible relative to the largest one (LDLT::rcond is not reliable for
// exactly singular input).
bool ldlt_is_singular(const Eigen::LDLT<Eigen::MatrixXd>& ldlt);

}  // namespace fdaclass
