#include "json_io.hpp"

#include "fdaclass/error.hpp"

namespace fdaclass::detail {

const json& member(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) {
        throw InputError(std::string("missing field '") + key + "'");
    }
    return j.at(key);
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
    if (!j.is_array()) throw InputError("expected an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InputError("expected an array of numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vector_to_json(m.row(i).transpose()));
    return out;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    if (!j.is_array()) throw InputError("expected a nested array");
    if (j.empty()) return {};
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const Eigen::VectorXd row = vector_from_json(j[i]);
        if (row.size() != cols) throw InputError("ragged matrix");
        m.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return m;
}

json basis_to_json(const BasisSpec& spec) {
    return json{{"order", spec.order},
                {"domain", {spec.domain.lo, spec.domain.hi}},
                {"interior_breakpoints", spec.interior_breakpoints}};
}

BasisSpec basis_from_json(const json& j) {
    BasisSpec spec;
    spec.order = member(j, "order").get<int>();
    const json& domain = member(j, "domain");
    if (!domain.is_array() || domain.size() != 2) throw InputError("basis domain must be [lo, hi]");
    spec.domain = {domain[0].get<double>(), domain[1].get<double>()};
    spec.interior_breakpoints = member(j, "interior_breakpoints").get<std::vector<double>>();
    return spec;
}

json curve_to_json(const SmoothCurve& curve) {
    return json{{"basis", basis_to_json(curve.basis->spec())},
                {"coef", vector_to_json(curve.coef)},
                {"lambda", curve.lambda},
                {"penalty_order", curve.penalty_order}};
}

SmoothCurve curve_from_json(const json& j) {
    SmoothCurve c;
    c.basis = make_basis(basis_from_json(member(j, "basis")));
    c.coef = vector_from_json(member(j, "coef"));
    if (c.coef.size() != c.basis->size()) throw InputError("coefficient count does not match basis size");
    c.lambda = member(j, "lambda").get<double>();
    c.penalty_order = member(j, "penalty_order").get<int>();
    return c;
}

json rate_to_json(const RateFit& fit) {
    return json{{"basis", basis_to_json(fit.basis->spec())},
                {"coef", vector_to_json(fit.coef)},
                {"lambda", fit.lambda},
                {"penalty_order", fit.penalty_order},
                {"converged", fit.converged},
                {"empty_events", fit.empty_events},
                {"iterations", fit.iterations},
                {"final_gradient_norm", fit.final_gradient_norm}};
}

RateFit rate_from_json(const json& j) {
    RateFit f;
    f.basis = make_basis(basis_from_json(member(j, "basis")));
    f.coef = vector_from_json(member(j, "coef"));
    if (f.coef.size() != f.basis->size()) throw InputError("coefficient count does not match basis size");
    f.lambda = member(j, "lambda").get<double>();
    f.penalty_order = member(j, "penalty_order").get<int>();
    f.converged = member(j, "converged").get<bool>();
    f.empty_events = member(j, "empty_events").get<bool>();
    f.iterations = member(j, "iterations").get<int>();
    f.final_gradient_norm = member(j, "final_gradient_norm").get<double>();
    return f;
}

}  // namespace fdaclass::detail

namespace fdaclass {

std::string fpca_to_json(const FpcaModel& model) {
    using detail::json;
    const json j{{"basis", detail::basis_to_json(model.basis->spec())},
                 {"mean_coef", detail::vector_to_json(model.mean_coef)},
                 {"eigen_coefs", detail::matrix_to_json(model.eigen_coefs)},
                 {"eigenvalues", detail::vector_to_json(model.eigenvalues)},
                 {"all_eigenvalues", detail::vector_to_json(model.all_eigenvalues)},
                 {"gram", detail::matrix_to_json(model.gram)},
                 {"penalty_star", detail::matrix_to_json(model.penalty_star)},
                 {"penalty_order", model.penalty_order},
                 {"n_curves", model.n_curves}};
    return j.dump() + "\n";
}

FpcaModel fpca_from_json(std::string_view text) {
    using detail::member;
    try {
        const detail::json j = detail::json::parse(text);
        FpcaModel m;
        m.basis = make_basis(detail::basis_from_json(member(j, "basis")));
        m.mean_coef = detail::vector_from_json(member(j, "mean_coef"));
        m.eigen_coefs = detail::matrix_from_json(member(j, "eigen_coefs"));
        m.eigenvalues = detail::vector_from_json(member(j, "eigenvalues"));
        m.all_eigenvalues = detail::vector_from_json(member(j, "all_eigenvalues"));
        m.gram = detail::matrix_from_json(member(j, "gram"));
        m.penalty_star = detail::matrix_from_json(member(j, "penalty_star"));
        m.penalty_order = member(j, "penalty_order").get<int>();
        m.n_curves = member(j, "n_curves").get<Eigen::Index>();
        const Eigen::Index k = m.basis->size();
        if (m.mean_coef.size() != k || m.eigen_coefs.rows() != k || m.eigenvalues.size() != m.eigen_coefs.cols()) {
            throw InputError("FPCA model dimensions do not match its basis");
        }
        return m;
    } catch (const detail::json::exception& e) {
        throw InputError(std::string("malformed FPCA model: ") + e.what());
    }
}

}  // namespace fdaclass
