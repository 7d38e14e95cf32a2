#include "fdaclass/error.hpp"
#include "fdaclass/poisson.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <chrono>
#include <random>

using namespace fdaclass;

namespace {

EventTimes sorted_events(std::vector<double> t) {
    std::sort(t.begin(), t.end());
    return {std::move(t)};
}

// Inhomogeneous Poisson sample on [0, 1] by thinning a homogeneous process.
EventTimes simulate(const std::function<double(double)>& rate, double rate_max, std::mt19937_64& rng) {
    std::exponential_distribution<double> gap(rate_max);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> out;
    for (double t = gap(rng); t <= 1.0; t += gap(rng)) {
        if (u(rng) * rate_max <= rate(t)) {
            out.push_back(t);
        }
    }
    return {out};
}

double dense_loglik(const Eigen::VectorXd& c, const EventTimes& ev, const std::vector<double>& knots, int order,
                    const Eigen::MatrixXd& r, double lambda, int n_points) {
    double linear = 0.0;
    for (double t : ev.times) {
        linear += c.dot(oracle::basis_vector(knots, order, t));
    }
    Eigen::VectorXd vals(n_points);
    for (int j = 0; j < n_points; ++j) {
        const double t = static_cast<double>(j) / (n_points - 1);
        vals[j] = std::exp(c.dot(oracle::basis_vector(knots, order, t)));
    }
    return linear - oracle::trapezoid(vals, 1.0 / (n_points - 1)) - lambda * c.dot(r * c);
}

}  // namespace

TEST_CASE("log-likelihood of the constant model") {
    const BasisSystem constant({1, {}, {}});
    CHECK(penalized_loglik(Eigen::VectorXd::Zero(1), {{0.4}}, constant, 0.0) == doctest::Approx(-1.0).epsilon(1e-14));
    for (int n : {1, 7, 100}) {
        const EventTimes ev{std::vector<double>(static_cast<std::size_t>(n), 0.5)};
        const double expect = n * std::log(n) - n;
        const double got = penalized_loglik(Eigen::VectorXd::Constant(1, std::log(n)), ev, constant, 0.0);
        CHECK(std::abs(got - expect) < 1e-10 * std::max(1.0, std::abs(expect)));
    }
}

TEST_CASE("log-likelihood matches dense trapezoid quadrature") {
    const std::vector<double> breaks{0.25, 0.5, 0.75};
    const BasisSystem sys({3, breaks, {}});
    const auto knots = oracle::clamped_knots(3, breaks);
    const Eigen::MatrixXd r = oracle::product_matrix(knots, 3, 1, 20000);
    std::mt19937_64 rng(12);
    const EventTimes ev = sorted_events({0.05, 0.2, 0.2, 0.61, 0.9});
    for (int trial = 0; trial < 3; ++trial) {
        const Eigen::VectorXd c = oracle::uniform_random(static_cast<int>(sys.size()), rng, -1.0, 2.0);
        const double expect = dense_loglik(c, ev, knots, 3, r, 0.3, 1000001);
        CHECK(std::abs(penalized_loglik(c, ev, sys, 0.3) - expect) < 1e-6);
    }
}

TEST_CASE("analytic gradient and Hessian match finite differences") {
    const BasisSystem sys(uniform_spec(4, 6));
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> t(40);
    for (double& x : t) {
        x = u(rng);
    }
    const EventTimes ev = sorted_events(t);
    const double lambda = 0.1;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd c = oracle::uniform_random(static_cast<int>(sys.size()), rng, 1.0, 4.0);
        const LoglikDerivatives d = penalized_loglik_derivatives(c, ev, sys, lambda);
        Eigen::VectorXd fd_grad(c.size());
        Eigen::MatrixXd fd_hess(c.size(), c.size());
        const double h = 1e-5;
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            Eigen::VectorXd cp = c;
            Eigen::VectorXd cm = c;
            cp[i] += h;
            cm[i] -= h;
            fd_grad[i] = (penalized_loglik(cp, ev, sys, lambda) - penalized_loglik(cm, ev, sys, lambda)) / (2 * h);
            fd_hess.col(i) = (penalized_loglik_derivatives(cp, ev, sys, lambda).gradient -
                              penalized_loglik_derivatives(cm, ev, sys, lambda).gradient) /
                             (2 * h);
        }
        CHECK((d.gradient - fd_grad).norm() <= 1e-5 * std::max(1.0, d.gradient.norm()));
        CHECK((d.hessian - fd_hess).norm() <= 1e-4 * d.hessian.norm());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d.hessian);
        CHECK(eig.eigenvalues().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("constant basis recovers the event count") {
    auto constant = make_basis({1, {}, {}});
    for (int n : {1, 10, 100}) {
        std::vector<double> t;
        for (int i = 0; i < n; ++i) {
            t.push_back((i + 0.5) / n);
        }
        for (double lambda : {0.0, 0.1, 100.0}) {
            const RateFit fit = fit_rate({t}, constant, lambda);
            CHECK(fit.converged);
            CHECK(std::abs(std::exp(fit.coef[0]) - n) < 1e-6);
        }
    }
}

TEST_CASE("single event with a strong penalty flattens to rate one") {
    const RateFit fit = fit_rate({{0.5}}, make_basis(uniform_spec(4, 8)), 1e7);
    CHECK(fit.converged);
    const std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0};
    for (double v : fit.eval(grid)) {
        CHECK(std::abs(v - 1.0) < 1e-3);
    }
}

TEST_CASE("simulated exponential intensity is recovered") {
    // exp(1 + t) rescaled so the expected count is 5000. One fixed draw: the
    // sup error of a single draw scatters around 0.1, so 0.2 guards against
    // regressions without depending on the draw.
    const double log_scale = std::log(5000.0 / (std::exp(2.0) - std::exp(1.0)));
    auto rate = [&](double t) { return std::exp(log_scale + 1.0 + t); };
    std::mt19937_64 rng(2024);
    const EventTimes ev = simulate(rate, rate(1.0), rng);
    CHECK(ev.times.size() > 4700);
    CHECK(ev.times.size() < 5300);

    const auto start = std::chrono::steady_clock::now();
    const RateFit fit = fit_rate(ev, make_basis(uniform_spec(4, 9)), 0.1);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(fit.converged);
    CHECK(seconds < 2.0);
    double worst = 0.0;
    for (int i = 0; i <= 900; ++i) {
        const double t = 0.05 + 0.9 * i / 900.0;
        worst = std::max(worst, std::abs(fit.log_rate(t) - (log_scale + 1.0 + t)));
    }
    CHECK(worst < 0.2);
    for (std::size_t i = 1; i < fit.objective_trace.size(); ++i) {
        CHECK(fit.objective_trace[i] >= fit.objective_trace[i - 1]);
    }
}

TEST_CASE("unpenalized optimum conserves mass") {
    const std::vector<double> breaks{0.3, 0.6};
    auto sys = make_basis({4, breaks, {}});
    const EventTimes ev = sorted_events({0.01, 0.1, 0.12, 0.4, 0.41, 0.42, 0.43, 0.8, 0.95, 0.97, 0.99});
    const RateFit fit = fit_rate(ev, sys, 0.0);
    CHECK(fit.converged);
    const double mass = oracle::simpson([&](double t) { return std::exp(fit.log_rate(t)); }, 0.0, 1.0, 100000);
    CHECK(std::abs(mass - 11.0) < 1e-6);
}

TEST_CASE("eval_rate") {
    RateFit constant;
    constant.basis = make_basis({1, {}, {}});
    constant.coef = Eigen::VectorXd::Constant(1, std::log(5.0));
    const std::vector<double> grid{0.0, 0.3, 1.0};
    for (double v : eval_rate(constant, grid)) {
        CHECK(std::abs(v - 5.0) < 1e-12);
    }

    const RateFit fit = fit_rate({{0.1, 0.15, 0.5, 0.5, 0.9}}, make_basis(uniform_spec(4, 5)), 0.1);
    const Eigen::VectorXd rates = eval_rate(fit, grid);
    CHECK(rates.minCoeff() > 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double direct = std::exp(fit.basis->eval(grid[i]).dot(fit.coef));
        CHECK(std::abs(rates[static_cast<Eigen::Index>(i)] - direct) <= 1e-12 * direct);
    }
}

TEST_CASE("empty event set returns the floor rate") {
    const RateFit fit = fit_rate({}, make_basis(uniform_spec(4, 5)), 0.1);
    CHECK(fit.converged);
    CHECK(fit.empty_events);
    CHECK(std::abs(fit.eval(std::vector<double>{0.5})[0] - 1e-6) < 1e-15);
}

TEST_CASE("invalid input") {
    const BasisSystem sys(uniform_spec(4, 3));
    CHECK_THROWS_AS(penalized_loglik(Eigen::VectorXd::Constant(sys.size(), 60.0), {{0.5}}, sys, 0.1), NumericalError);
    CHECK_THROWS_AS(penalized_loglik(Eigen::VectorXd::Zero(2), {{0.5}}, sys, 0.1), InputError);
    CHECK_THROWS_AS(penalized_loglik(Eigen::VectorXd::Zero(sys.size()), {{0.5, 0.2}}, sys, 0.1), InputError);
    CHECK_THROWS_AS(fit_rate({{1.5}}, make_basis(uniform_spec(4, 3)), 0.1), InputError);
}
