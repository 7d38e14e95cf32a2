#include "fdaclass/basis.hpp"

#include "fdaclass/banded.hpp"
#include "fdaclass/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace fdaclass {

namespace {

void validate(const BasisSpec& spec) {
    if (spec.order < 1) {
        throw InputError("basis order must be >= 1, got " + std::to_string(spec.order));
    }
    const Interval& d = spec.domain;
    if (!(std::isfinite(d.lo) && std::isfinite(d.hi) && d.lo < d.hi)) {
        throw InputError("basis domain must satisfy lo < hi");
    }
    double prev = d.lo;
    for (double b : spec.interior_breakpoints) {
        if (!(b > d.lo && b < d.hi)) {
            throw InputError("breakpoint " + std::to_string(b) + " outside the open domain");
        }
        if (!(b > prev)) {
            throw InputError("breakpoints must be strictly increasing");
        }
        prev = b;
    }
}

}  // namespace

BasisSystem::BasisSystem(BasisSpec spec) : spec_(std::move(spec)), cache_(std::make_unique<Cache>()) {
    validate(spec_);
    const int k = spec_.order;
    n_basis_ = static_cast<Eigen::Index>(spec_.interior_breakpoints.size()) + k;
    knots_.reserve(spec_.interior_breakpoints.size() + 2 * static_cast<std::size_t>(k));
    knots_.insert(knots_.end(), static_cast<std::size_t>(k), spec_.domain.lo);
    knots_.insert(knots_.end(), spec_.interior_breakpoints.begin(), spec_.interior_breakpoints.end());
    knots_.insert(knots_.end(), static_cast<std::size_t>(k), spec_.domain.hi);

    breaks_.reserve(spec_.interior_breakpoints.size() + 2);
    breaks_.push_back(spec_.domain.lo);
    breaks_.insert(breaks_.end(), spec_.interior_breakpoints.begin(), spec_.interior_breakpoints.end());
    breaks_.push_back(spec_.domain.hi);
}

double BasisSystem::checked_point(double t) const {
    const Interval& d = spec_.domain;
    const double slack = 1e-12 * d.length();
    if (!(t >= d.lo - slack && t <= d.hi + slack)) {
        throw InputError("evaluation point " + std::to_string(t) + " outside basis domain");
    }
    return std::clamp(t, d.lo, d.hi);
}

Eigen::Index BasisSystem::find_span(double t) const {
    // Index i with knots[i] <= t < knots[i + 1]; the right endpoint belongs
    // to the last nonempty span.
    const auto p = static_cast<std::size_t>(spec_.order - 1);
    const auto last = static_cast<std::size_t>(n_basis_ - 1);
    if (t >= knots_[last + 1]) {
        return static_cast<Eigen::Index>(last);
    }
    const auto it = std::upper_bound(knots_.begin() + static_cast<std::ptrdiff_t>(p),
                                     knots_.begin() + static_cast<std::ptrdiff_t>(last + 1), t);
    return static_cast<Eigen::Index>(it - knots_.begin()) - 1;
}

LocalBasis BasisSystem::eval_local(double t, int deriv) const {
    if (deriv < 0 || deriv >= spec_.order) {
        throw InputError("derivative order " + std::to_string(deriv) + " not below basis order " +
                         std::to_string(spec_.order));
    }
    t = checked_point(t);
    const int p = spec_.order - 1;
    const auto span = static_cast<std::size_t>(find_span(t));

    // Triangular table of basis values and knot differences, after the
    // standard derivative algorithm for B-spline basis functions.
    Eigen::MatrixXd ndu(p + 1, p + 1);
    std::vector<double> left(static_cast<std::size_t>(p) + 1);
    std::vector<double> right(static_cast<std::size_t>(p) + 1);
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = t - knots_[span + 1 - static_cast<std::size_t>(j)];
        right[j] = knots_[span + static_cast<std::size_t>(j)] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }

    LocalBasis out;
    out.first = static_cast<Eigen::Index>(span) - p;
    out.values.resize(p + 1);
    if (deriv == 0) {
        for (int j = 0; j <= p; ++j) {
            out.values[j] = ndu(j, p);
        }
        return out;
    }

    Eigen::MatrixXd a(2, p + 1);
    for (int r = 0; r <= p; ++r) {
        int s1 = 0;
        int s2 = 1;
        a(0, 0) = 1.0;
        double d = 0.0;
        for (int k = 1; k <= deriv; ++k) {
            d = 0.0;
            const int rk = r - k;
            const int pk = p - k;
            if (r >= k) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                d = a(s2, 0) * ndu(rk, pk);
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                d += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
                d += a(s2, k) * ndu(r, pk);
            }
            std::swap(s1, s2);
        }
        out.values[r] = d;
    }
    double factor = 1.0;
    for (int k = 0; k < deriv; ++k) {
        factor *= static_cast<double>(p - k);
    }
    out.values *= factor;
    return out;
}

Eigen::VectorXd BasisSystem::eval(double t, int deriv) const {
    const LocalBasis local = eval_local(t, deriv);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_basis_);
    out.segment(local.first, local.values.size()) = local.values;
    return out;
}

Eigen::MatrixXd BasisSystem::design_matrix(std::span<const double> times, int deriv) const {
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(times.size()), n_basis_);
    for (std::size_t j = 0; j < times.size(); ++j) {
        const LocalBasis local = eval_local(times[j], deriv);
        phi.row(static_cast<Eigen::Index>(j)).segment(local.first, local.values.size()) = local.values.transpose();
    }
    return phi;
}

Eigen::MatrixXd assemble_product_matrix(const BasisSystem& sys, int deriv, int nodes_per_span) {
    if (deriv < 0 || deriv >= sys.order()) {
        throw InputError("penalty derivative order " + std::to_string(deriv) + " must be below basis order " +
                         std::to_string(sys.order()));
    }
    const Eigen::Index k = sys.size();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(k, k);
    sys.for_each_quadrature_node(nodes_per_span, [&](double t, double w) {
        const LocalBasis local = sys.eval_local(t, deriv);
        const Eigen::Index n = local.values.size();
        for (Eigen::Index a = 0; a < n; ++a) {
            const double wa = w * local.values[a];
            for (Eigen::Index b = 0; b <= a; ++b) {
                out(local.first + a, local.first + b) += wa * local.values[b];
            }
        }
    });
    // Assembled on the lower triangle, mirrored so the result is exactly symmetric.
    out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
    return out;
}

const Eigen::MatrixXd& BasisSystem::gram() const {
    std::lock_guard lock(cache_->mutex);
    if (!cache_->gram) {
        cache_->gram = std::make_unique<Eigen::MatrixXd>(assemble_product_matrix(*this, 0, spec_.order));
    }
    return *cache_->gram;
}

const Eigen::MatrixXd& BasisSystem::penalty(int m) const {
    if (m >= spec_.order && spec_.interior_breakpoints.empty() && m >= 1) {
        // A single polynomial piece of degree < m: the penalty is identically zero.
        std::lock_guard lock(cache_->mutex);
        auto it = cache_->penalty.find(m);
        if (it == cache_->penalty.end()) {
            it = cache_->penalty.emplace(m, Eigen::MatrixXd::Zero(n_basis_, n_basis_)).first;
        }
        return it->second;
    }
    if (m < 0 || m >= spec_.order) {
        throw InputError("penalty order m=" + std::to_string(m) + " requires m < basis order " +
                         std::to_string(spec_.order));
    }
    std::lock_guard lock(cache_->mutex);
    auto it = cache_->penalty.find(m);
    if (it == cache_->penalty.end()) {
        it = cache_->penalty.emplace(m, assemble_product_matrix(*this, m, spec_.order)).first;
    }
    return it->second;
}

std::vector<LocalBasis> BasisSystem::compute_penalty_factor(int m) const {
    const int order = spec_.order;
    // Rows of the derivative-coefficient operator D, built one derivative at
    // a time: e_j = (k - 1) (c_{j+1} - c_j) / (T[j + k] - T[j + 1]) on the
    // knot vector T trimmed by one at each end per step.
    std::vector<LocalBasis> rows(static_cast<std::size_t>(n_basis_));
    for (Eigen::Index j = 0; j < n_basis_; ++j) {
        rows[static_cast<std::size_t>(j)] = {j, Eigen::VectorXd::Ones(1)};
    }
    for (int step = 0; step < m; ++step) {
        const int k = order - step;
        const auto offset = static_cast<std::size_t>(step);
        std::vector<LocalBasis> next(rows.size() - 1);
        for (std::size_t j = 0; j + 1 < rows.size(); ++j) {
            const double span = knots_[offset + j + static_cast<std::size_t>(k)] - knots_[offset + j + 1];
            const double factor = (k - 1) / span;
            const Eigen::Index width = rows[j].values.size() + 1;
            Eigen::VectorXd v = Eigen::VectorXd::Zero(width);
            v.head(width - 1) -= rows[j].values;
            v.tail(width - 1) += rows[j + 1].values;
            next[j] = {rows[j].first, factor * v};
        }
        rows = std::move(next);
    }

    const BasisSystem lower({order - m, spec_.interior_breakpoints, spec_.domain});
    BandedSymmetric g(static_cast<std::size_t>(lower.size()), static_cast<std::size_t>(order - m - 1));
    g.add_band_of(lower.gram(), 1.0);
    if (!g.factorize()) {
        throw NumericalError("Gram matrix of the derivative basis is not positive definite");
    }
    const std::size_t n_rows = rows.size();
    const auto bw = g.bandwidth();
    std::vector<LocalBasis> out(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) {
        // M_i = sum_{j >= i} L(j, i) D_j
        const std::size_t j_end = std::min(n_rows, i + bw + 1);
        const Eigen::Index first = rows[i].first;
        const Eigen::Index last = rows[j_end - 1].first + rows[j_end - 1].values.size();
        Eigen::VectorXd v = Eigen::VectorXd::Zero(last - first);
        for (std::size_t j = i; j < j_end; ++j) {
            v.segment(rows[j].first - first, rows[j].values.size()) += g.factor(j, i) * rows[j].values;
        }
        out[i] = {first, std::move(v)};
    }
    return out;
}

const std::vector<LocalBasis>& BasisSystem::penalty_factor(int m) const {
    if (m < 1 || m >= spec_.order) {
        throw InputError("penalty order m=" + std::to_string(m) + " requires 1 <= m < basis order " +
                         std::to_string(spec_.order));
    }
    {
        std::lock_guard lock(cache_->mutex);
        auto it = cache_->factor.find(m);
        if (it != cache_->factor.end()) {
            return it->second;
        }
    }
    std::vector<LocalBasis> rows = compute_penalty_factor(m);
    std::lock_guard lock(cache_->mutex);
    return cache_->factor.emplace(m, std::move(rows)).first->second;
}

BasisPtr make_basis(BasisSpec spec) { return std::make_shared<const BasisSystem>(std::move(spec)); }

BasisSpec uniform_spec(int order, int n_intervals, Interval domain) {
    if (n_intervals < 1) {
        throw InputError("uniform basis needs at least one interval");
    }
    BasisSpec spec;
    spec.order = order;
    spec.domain = domain;
    for (int i = 1; i < n_intervals; ++i) {
        spec.interior_breakpoints.push_back(domain.lo + domain.length() * i / n_intervals);
    }
    return spec;
}

}  // namespace fdaclass
