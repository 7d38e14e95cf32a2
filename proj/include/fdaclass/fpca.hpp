#pragma once

#include "fdaclass/basis.hpp"
#include "fdaclass/smooth.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fdaclass {

// M curves expanded on one shared basis; row i holds the coefficients of
// curve i.
struct CurveSet {
    BasisPtr basis;
    Eigen::MatrixXd coefs;
    std::vector<double> grid;
};

// Functional principal components estimated in coefficient space.
// Columns of `eigen_coefs` are W-orthonormal: B' W B = I.
struct FpcaModel {
    BasisPtr basis;
    Eigen::VectorXd mean_coef;
    Eigen::MatrixXd eigen_coefs;      // K x L
    Eigen::VectorXd eigenvalues;      // L, descending
    Eigen::VectorXd all_eigenvalues;  // K, descending; denominator of explained variance
    Eigen::MatrixXd gram;             // W
    Eigen::MatrixXd penalty_star;     // B' R_m B
    int penalty_order = 2;
    Eigen::Index n_curves = 0;

    Eigen::Index n_components() const { return eigen_coefs.cols(); }
    // Values of the j-th eigenfunction (0-based) on `grid`.
    Eigen::VectorXd eigenfunction(Eigen::Index j, std::span<const double> grid) const;
    Eigen::VectorXd mean(std::span<const double> grid) const;
};

Eigen::VectorXd mean_curve(const CurveSet& set);
CurveSet center(const CurveSet& set);

// Solves (1/(M-1)) W^1/2 C'C W^1/2 u = rho u on the centered coefficients and
// maps back with b = W^-1/2 u. `penalty_order` selects R for R* = B' R B.
FpcaModel fit_fpca(const CurveSet& set, Eigen::Index n_components, int penalty_order = 2);

// First `n` components of `model`; identical to refitting with n components.
FpcaModel truncate(const FpcaModel& model, Eigen::Index n);

// Z = C_centered W B.
Eigen::MatrixXd train_scores(const CurveSet& set, const FpcaModel& model);

// Penalized least-squares scores of a curve observed at arbitrary times:
// (Xi'Xi + lambda R*)^-1 Xi' (y - mu(t)), with Xi = Phi B.
Eigen::VectorXd project(const Observation& obs, const FpcaModel& model, double lambda);

// Batched projection of curves that share the sampling times; `values` has
// one curve per row. Returns one score row per curve.
Eigen::MatrixXd project_rows(std::span<const double> times, const Eigen::MatrixXd& values, const FpcaModel& model,
                             double lambda);

// Fraction of total variance carried by the first `n` components.
double explained_variance(const FpcaModel& model, Eigen::Index n);

// Truncated Mercer sum over the retained components.
double covariance_at(const FpcaModel& model, double s, double t);

std::string fpca_to_json(const FpcaModel& model);
FpcaModel fpca_from_json(std::string_view text);

}  // namespace fdaclass
