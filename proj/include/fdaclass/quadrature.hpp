#pragma once

#include <vector>

namespace fdaclass {

struct QuadratureRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

// n-point Gauss-Legendre rule, exact for polynomials of degree <= 2n-1.
// Rules are computed once per n and cached.
const QuadratureRule& gauss_legendre(int n);

}  // namespace fdaclass
