#pragma once

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace fdaclass {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    bool contains(double t) const { return t >= lo && t <= hi; }
    double length() const { return hi - lo; }
    bool operator==(const Interval&) const = default;
};

struct BasisSpec {
    int order = 4;  // degree + 1
    std::vector<double> interior_breakpoints;
    Interval domain;

    bool operator==(const BasisSpec&) const = default;
};

// Values of the `order` basis functions that can be nonzero at a point,
// i.e. phi_{first}, ..., phi_{first + order - 1}.
struct LocalBasis {
    Eigen::Index first = 0;
    Eigen::VectorXd values;
};

// Clamped B-spline basis on a closed interval. Immutable after construction;
// the Gram and penalty matrices are computed on first use under a lock.
class BasisSystem {
public:
    explicit BasisSystem(BasisSpec spec);

    const BasisSpec& spec() const { return spec_; }
    int order() const { return spec_.order; }
    const Interval& domain() const { return spec_.domain; }
    Eigen::Index size() const { return n_basis_; }
    const std::vector<double>& knots() const { return knots_; }

    // Distinct knot values, lo and hi included; consecutive pairs are the
    // polynomial pieces.
    const std::vector<double>& breaks() const { return breaks_; }

    LocalBasis eval_local(double t, int deriv = 0) const;
    Eigen::VectorXd eval(double t, int deriv = 0) const;
    Eigen::MatrixXd design_matrix(std::span<const double> times, int deriv = 0) const;

    // W_ij = integral of phi_i * phi_j over the domain.
    const Eigen::MatrixXd& gram() const;
    // R_ij = integral of D^m phi_i * D^m phi_j; requires m < order.
    const Eigen::MatrixXd& penalty(int m) const;

    // Rows M_i (each with at most `order` consecutive nonzeros) with
    // sum_i M_i' M_i = penalty(m): M = L' D where D maps coefficients to
    // those of the m-th derivative (an order - m spline) and L L' is the Gram
    // matrix of that lower-order basis.
    const std::vector<LocalBasis>& penalty_factor(int m) const;

    // Calls fn(t, weight) for each node of a Gauss-Legendre rule with
    // `nodes_per_span` points applied on every polynomial piece.
    template <typename Fn>
    void for_each_quadrature_node(int nodes_per_span, Fn&& fn) const;

private:
    BasisSpec spec_;
    Eigen::Index n_basis_ = 0;
    std::vector<double> knots_;
    std::vector<double> breaks_;

    struct Cache {
        std::mutex mutex;
        std::unique_ptr<Eigen::MatrixXd> gram;
        std::map<int, Eigen::MatrixXd> penalty;
        std::map<int, std::vector<LocalBasis>> factor;
    };
    std::unique_ptr<Cache> cache_;

    Eigen::Index find_span(double t) const;
    std::vector<LocalBasis> compute_penalty_factor(int m) const;
    double checked_point(double t) const;
};

using BasisPtr = std::shared_ptr<const BasisSystem>;

BasisPtr make_basis(BasisSpec spec);

// Order-`order` system with `n_intervals` equal pieces on `domain`.
BasisSpec uniform_spec(int order, int n_intervals, Interval domain = {});

// Integral of D^deriv phi_i * D^deriv phi_j with a Gauss-Legendre rule of
// `nodes_per_span` points per piece. BasisSystem::gram/penalty use
// nodes_per_span = order, which is exact for every admissible deriv.
Eigen::MatrixXd assemble_product_matrix(const BasisSystem& sys, int deriv, int nodes_per_span);

}  // namespace fdaclass

#include "fdaclass/quadrature.hpp"

namespace fdaclass {

template <typename Fn>
void BasisSystem::for_each_quadrature_node(int nodes_per_span, Fn&& fn) const {
    const QuadratureRule& rule = gauss_legendre(nodes_per_span);
    for (std::size_t s = 0; s + 1 < breaks_.size(); ++s) {
        const double a = breaks_[s];
        const double b = breaks_[s + 1];
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            fn(mid + half * rule.nodes[q], half * rule.weights[q]);
        }
    }
}

}  // namespace fdaclass
