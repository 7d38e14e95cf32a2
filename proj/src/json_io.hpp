#pragma once

#include "fdaclass/fpca.hpp"
#include "fdaclass/poisson.hpp"
#include "fdaclass/smooth.hpp"

#include <json.hpp>

namespace fdaclass::detail {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);
// Row-major nested arrays.
json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);

json basis_to_json(const BasisSpec& spec);
BasisSpec basis_from_json(const json& j);

json curve_to_json(const SmoothCurve& curve);
SmoothCurve curve_from_json(const json& j);

json rate_to_json(const RateFit& fit);
RateFit rate_from_json(const json& j);

// Fetches a required member, converting lookup failures into InputError.
const json& member(const json& j, const char* key);

}  // namespace fdaclass::detail
