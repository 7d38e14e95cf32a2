// Acceptance checks, one PASS/FAIL line per criterion; exits nonzero when any
// criterion fails.

#include "commands.hpp"
#include "config.hpp"

#include "fdaclass/basis.hpp"
#include "fdaclass/classify.hpp"
#include "fdaclass/error.hpp"
#include "fdaclass/fpca.hpp"
#include "fdaclass/pipeline.hpp"
#include "fdaclass/poisson.hpp"
#include "fdaclass/smooth.hpp"
#include "fdaclass/synth.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace fdaclass;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

std::vector<double> sorted_uniform(int n, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) x = u(rng);
    std::sort(v.begin(), v.end());
    return v;
}

Eigen::MatrixXd oracle_design(const std::vector<double>& knots, int order, const std::vector<double>& t) {
    const int k = static_cast<int>(knots.size()) - order;
    Eigen::MatrixXd phi(static_cast<Eigen::Index>(t.size()), k);
    for (std::size_t i = 0; i < t.size(); ++i) {
        phi.row(static_cast<Eigen::Index>(i)) = oracle::basis_vector(knots, order, t[i]).transpose();
    }
    return phi;
}

// ---- 1: penalized smoothing against a dense long-double solve ----

Outcome smoothing_closed_form() {
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> pick_order(2, 4);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::uniform_real_distribution<double> log_lambda(-8.0, 1.0);
    double worst = 0.0;
    double fit_seconds = 0.0;
    int n_max = 0;
    int k_max = 0;
    for (int problem = 0; problem < 50; ++problem) {
        const int order = pick_order(rng);
        const int k = std::uniform_int_distribution<int>(order, 12)(rng);
        const int m = std::uniform_int_distribution<int>(1, order - 1)(rng);
        const int n = std::uniform_int_distribution<int>(k, 30)(rng);
        const double lambda = std::pow(10.0, log_lambda(rng));
        const std::vector<double> breaks = sorted_uniform(k - order, rng, 0.02, 0.98);
        const std::vector<double> t = sorted_uniform(n, rng, 0.0, 1.0);
        Observation obs{t, {}};
        for (double x : t) obs.values.push_back(std::sin(6.0 * x) + x * x + noise(rng));

        const auto knots = oracle::clamped_knots(order, breaks);
        const Eigen::MatrixXd phi = oracle_design(knots, order, t);
        const Eigen::MatrixXd r = oracle::exact_product_matrix(knots, order, m);
        using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
        using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
        const MatL a = (phi.transpose() * phi).cast<long double>() + static_cast<long double>(lambda) * r.cast<long double>();
        const VecL rhs = (phi.transpose() * Eigen::Map<const Eigen::VectorXd>(obs.values.data(), n)).cast<long double>();
        const Eigen::VectorXd expect = a.fullPivLu().solve(rhs).cast<double>();

        const auto basis = make_basis({order, breaks, {}});
        const auto start = Clock::now();
        const SmoothCurve fit = penalized_fit(obs, basis, lambda, m);
        fit_seconds += seconds_since(start);
        const double err = (fit.coef - expect).cwiseAbs().maxCoeff() / std::max(1.0, expect.cwiseAbs().maxCoeff());
        worst = std::max(worst, err);
        n_max = std::max(n_max, n);
        k_max = std::max(k_max, k);
    }
    return {worst < 1e-8 && fit_seconds < 1.0,
            fmt("50 problems (n<=%d, K<=%d): max coefficient error %.2e (tol 1e-8), fit time %.4f s (limit 1 s)", n_max,
                k_max, worst, fit_seconds)};
}

// ---- 2: FPCA constraints ----

CurveSet random_curve_set(int m, int order, int k, std::mt19937_64& rng) {
    CurveSet set;
    set.basis = make_basis({order, sorted_uniform(k - order, rng, 0.03, 0.97), {}});
    set.coefs.resize(m, k);
    for (int i = 0; i < m; ++i) set.coefs.row(i) = oracle::uniform_random(k, rng).transpose();
    set.grid = uniform_grid(101);
    return set;
}

Outcome fpca_constraints() {
    std::mt19937_64 rng(77);
    double ortho = 0.0;
    double residual = 0.0;
    double mercer = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int order = std::uniform_int_distribution<int>(2, 4)(rng);
        const int k = std::uniform_int_distribution<int>(std::max(order, 4), 20)(rng);
        const int m = std::uniform_int_distribution<int>(k + 1, 50)(rng);
        const CurveSet set = random_curve_set(m, order, k, rng);
        const FpcaModel model = fit_fpca(set, k, std::min(2, order - 1));

        const auto knots = oracle::clamped_knots(order, set.basis->spec().interior_breakpoints);
        const Eigen::MatrixXd w = oracle::exact_product_matrix(knots, order, 0);
        const Eigen::MatrixXd b = model.eigen_coefs;
        ortho = std::max(ortho, (b.transpose() * w * b - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff());

        const Eigen::MatrixXd centered = set.coefs.rowwise() - set.coefs.colwise().mean();
        const Eigen::MatrixXd cov = centered.transpose() * centered / (m - 1.0);
        for (int j = 0; j < k; ++j) {
            const Eigen::VectorXd r = cov * w * b.col(j) - model.eigenvalues[j] * b.col(j);
            residual = std::max(residual, r.norm() / std::max(1.0, b.col(j).norm()));
        }

        for (int i = 0; i < 20; ++i) {
            const double s = i / 19.0;
            const Eigen::VectorXd ps = oracle::basis_vector(knots, order, s);
            for (int j = 0; j < 20; ++j) {
                const double t = j / 19.0;
                const double expect = ps.dot(cov * oracle::basis_vector(knots, order, t));
                mercer = std::max(mercer, std::abs(covariance_at(model, s, t) - expect));
            }
        }
    }
    return {ortho < 1e-8 && residual < 1e-8 && mercer < 1e-8,
            fmt("20 sets (M<=50, K<=20): max |B'WB - I| %.2e, eigen residual %.2e, Mercer error %.2e (tol 1e-8)", ortho,
                residual, mercer)};
}

// ---- 3, 4: two-mode construction ----

// Two W-orthonormal modes (W from the exact oracle) with sample scores that
// are exactly centered, uncorrelated and of variance 4 and 1.
struct TwoModeSet {
    CurveSet set;
    Eigen::MatrixXd w;
    Eigen::MatrixXd modes;   // K x 2
    Eigen::MatrixXd scores;  // M x 2
};

TwoModeSet two_mode_set(int m, int intervals, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto basis = make_basis(uniform_spec(4, intervals));
    const int k = static_cast<int>(basis->size());
    TwoModeSet out;
    out.w = oracle::exact_product_matrix(oracle::clamped_knots(4, basis->spec().interior_breakpoints), 4, 0);
    out.modes.resize(k, 2);
    for (int j = 0; j < 2; ++j) {
        Eigen::VectorXd v = oracle::uniform_random(k, rng);
        for (int i = 0; i < j; ++i) v -= out.modes.col(i).dot(out.w * v) * out.modes.col(i);
        out.modes.col(j) = v / std::sqrt(v.dot(out.w * v));
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd z(m, 2);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = gauss(rng);
    z.rowwise() -= z.colwise().mean();
    const Eigen::MatrixXd q = z.householderQr().householderQ() * Eigen::MatrixXd::Identity(m, 2);
    z.col(0) = q.col(0) * std::sqrt(4.0 * (m - 1));
    z.col(1) = q.col(1) * std::sqrt(1.0 * (m - 1));
    out.scores = z;
    const Eigen::VectorXd mean = oracle::uniform_random(k, rng);
    out.set.basis = basis;
    out.set.coefs = (z * out.modes.transpose()).rowwise() + mean.transpose();
    out.set.grid = uniform_grid(501);
    return out;
}

Outcome karhunen_loeve_recovery() {
    double eig_rel = 0.0;
    double fn_err = 0.0;
    double score_mean = 0.0;
    double score_cov = 0.0;
    double ev_err = 0.0;
    int sets = 0;
    for (int intervals : {10, 20}) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const TwoModeSet tm = two_mode_set(200, intervals, seed * 31 + intervals);
            const FpcaModel model = fit_fpca(tm.set, 2);
            const double truth[2] = {4.0, 1.0};
            for (int j = 0; j < 2; ++j) {
                eig_rel = std::max(eig_rel, std::abs(model.eigenvalues[j] - truth[j]) / truth[j]);
                Eigen::VectorXd b = model.eigen_coefs.col(j);
                if (b.dot(tm.w * tm.modes.col(j)) < 0.0) b = -b;
                const Eigen::VectorXd d = b - tm.modes.col(j);
                fn_err = std::max(fn_err, std::sqrt(std::max(0.0, d.dot(tm.w * d))));
            }
            const Eigen::MatrixXd z = train_scores(tm.set, model);
            score_mean = std::max(score_mean, z.colwise().mean().cwiseAbs().maxCoeff());
            const Eigen::MatrixXd zc = z.rowwise() - z.colwise().mean();
            const Eigen::MatrixXd cov = zc.transpose() * zc / (z.rows() - 1.0);
            score_cov = std::max(score_cov, (cov - Eigen::MatrixXd(model.eigenvalues.asDiagonal())).cwiseAbs().maxCoeff());
            ev_err = std::max(ev_err, std::abs(explained_variance(model, 1) - 0.8));
            ++sets;
        }
    }
    return {eig_rel < 0.02 && fn_err < 1e-3 && score_mean < 1e-8 && score_cov < 1e-6 && ev_err < 1e-9,
            fmt("%d sets of M=200: eigenvalue rel err %.2e (tol 2e-2), eigenfunction L2 err %.2e (tol 1e-3), "
                "score mean %.2e (tol 1e-8), score cov err %.2e (tol 1e-6), |EV(1) - 0.8| %.2e (tol 1e-9)",
                sets, eig_rel, fn_err, score_mean, score_cov, ev_err)};
}

Outcome projection_round_trip() {
    const std::vector<double> grid = uniform_grid(kGridPoints);
    double worst = 0.0;
    double mean_scores = 0.0;
    auto check = [&](const CurveSet& set, const FpcaModel& model) {
        const auto knots = oracle::clamped_knots(set.basis->order(), set.basis->spec().interior_breakpoints);
        const Eigen::MatrixXd phi = oracle_design(knots, set.basis->order(), grid);
        const Eigen::MatrixXd values = set.coefs * phi.transpose();
        const Eigen::MatrixXd z = project_rows(grid, values, model, 1e-10);
        worst = std::max(worst, (z - train_scores(set, model)).cwiseAbs().maxCoeff());
        const Eigen::MatrixXd mean_row = (phi * model.mean_coef).transpose();
        mean_scores = std::max(mean_scores, project_rows(grid, mean_row, model, 1e-10).cwiseAbs().maxCoeff());
    };
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const TwoModeSet tm = two_mode_set(200, 10, seed);
        check(tm.set, fit_fpca(tm.set, 2));
    }
    // Full rank, so every training curve lies in the span of the components.
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 3; ++trial) {
        const CurveSet set = random_curve_set(60, 4, 13, rng);
        check(set, fit_fpca(set, 13));
    }
    return {worst < 1e-5 && mean_scores < 1e-8,
            fmt("6 sets, lambda 1e-10 on %d points: max score error %.2e (tol 1e-5), mean-curve scores %.2e (tol 1e-8)",
                kGridPoints, worst, mean_scores)};
}

// ---- 5: Poisson intensity ----

EventTimes simulate(const std::function<double(double)>& rate, double rate_max, std::mt19937_64& rng) {
    std::exponential_distribution<double> gap(rate_max);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> out;
    for (double t = gap(rng); t <= 1.0; t += gap(rng)) {
        if (u(rng) * rate_max <= rate(t)) out.push_back(t);
    }
    return {out};
}

Outcome poisson_estimator() {
    double slowest = 0.0;
    auto timed_fit = [&](const EventTimes& ev, BasisPtr sys, double lambda) {
        const auto start = Clock::now();
        RateFit fit = fit_rate(ev, std::move(sys), lambda);
        slowest = std::max(slowest, seconds_since(start));
        return fit;
    };

    double count_err = 0.0;
    bool converged = true;
    auto constant = make_basis({1, {}, {}});
    for (int n : {1, 10, 100}) {
        std::vector<double> t;
        for (int i = 0; i < n; ++i) t.push_back((i + 0.5) / n);
        for (double lambda : {0.0, 0.1, 100.0}) {
            const RateFit fit = timed_fit({t}, constant, lambda);
            converged = converged && fit.converged;
            count_err = std::max(count_err, std::abs(std::exp(fit.coef[0]) - n));
        }
    }

    double grad_err = 0.0;
    double hess_err = 0.0;
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const int order = 2 + trial % 3;
        const BasisSystem sys({order, sorted_uniform(4 + trial % 5, rng, 0.05, 0.95), {}});
        const EventTimes ev{sorted_uniform(40, rng, 0.0, 1.0)};
        const double lambda = trial % 2 ? 0.1 : 0.0;
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
        grad_err = std::max(grad_err, (d.gradient - fd_grad).norm() / std::max(1.0, d.gradient.norm()));
        hess_err = std::max(hess_err, (d.hessian - fd_hess).norm() / d.hessian.norm());
    }

    // exp(1 + t) scaled to an expected 5000 events, 12 cubic B-splines,
    // compared on the log scale. Sampling noise alone puts the sup error near
    // the tolerance, so recovery is judged over 100 independent draws and must
    // hold in at least 95 of them.
    const double log_scale = std::log(5000.0 / (std::exp(2.0) - std::exp(1.0)));
    auto rate = [&](double t) { return std::exp(log_scale + 1.0 + t); };
    std::vector<double> sups;
    std::size_t min_events = SIZE_MAX;
    std::size_t max_events = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        std::mt19937_64 sim(seed);
        const EventTimes ev = simulate(rate, rate(1.0), sim);
        min_events = std::min(min_events, ev.times.size());
        max_events = std::max(max_events, ev.times.size());
        const RateFit fit = timed_fit(ev, make_basis(uniform_spec(4, 9)), kRateLambda);
        converged = converged && fit.converged;
        double sup = 0.0;
        for (int i = 0; i <= 900; ++i) {
            const double t = 0.05 + 0.9 * i / 900.0;
            sup = std::max(sup, std::abs(fit.log_rate(t) - (log_scale + 1.0 + t)));
        }
        sups.push_back(sup);
    }
    const auto within = std::count_if(sups.begin(), sups.end(), [](double v) { return v < 0.1; });
    std::sort(sups.begin(), sups.end());
    const double median = 0.5 * (sups[49] + sups[50]);
    return {converged && count_err < 1e-6 && grad_err < 1e-5 && hess_err < 1e-4 && within >= 95 && slowest < 2.0,
            fmt("constant basis |mu - n| %.2e (tol 1e-6); FD gradient %.2e (tol 1e-5), Hessian %.2e (tol 1e-4); "
                "exp(1+t) log-rate sup error on [0.05,0.95] below 0.1 in %ld of 100 draws of %zu-%zu events "
                "(need 95; median %.3f, max %.3f); slowest fit %.3f s (limit 2 s)",
                count_err, grad_err, hess_err, static_cast<long>(within), min_events, max_events, median, sups.back(),
                slowest)};
}

// ---- 6: pipeline rules and determinism ----

Outcome pipeline_determinism() {
    SynthConfig cfg;
    cfg.per_class = 3;
    cfg.seed = 4;
    const SynthData data = generate_synthetic(cfg);
    auto records = build_records(data.transactions, data.prices, data.labels);
    records.resize(12);
    bool rules = true;
    for (auto& r : records) {
        r = window_and_normalize(r);
        for (const Stream* s : {&r.credit, &r.debit}) {
            for (double t : s->times) rules = rules && t >= 0.0 && t <= 1.0;
        }
    }
    const auto kept = filter_min_transactions(records, 10);
    for (const auto& r : kept) rules = rules && r.credit.size() + r.debit.size() >= 10;

    PipelineConfig one;
    PipelineConfig two;
    two.threads = 2;
    const FitResult a = fit_all_curves(kept, one);
    const FitResult b = fit_all_curves(kept, one);
    const FitResult c = fit_all_curves(kept, two);
    bool identical = a.failures.empty() && a.bundles.size() == kept.size() && b.bundles.size() == kept.size() &&
                     c.bundles.size() == kept.size();
    for (std::size_t i = 0; identical && i < a.bundles.size(); ++i) {
        const std::string ref = bundle_to_json(a.bundles[i]);
        identical = ref == bundle_to_json(b.bundles[i]) && ref == bundle_to_json(c.bundles[i]);
        const auto grid = uniform_grid(one.grid_points);
        rules = rules && a.bundles[i].sample(CurveType::credit_level, grid).size() == kGridPoints;
    }

    const auto base = build_records(data.transactions, data.prices, data.labels);
    double worst = 0.0;
    for (double k : {1e-3, 7.0, 1e5}) {
        auto tx = data.transactions;
        for (auto& t : tx) t.delta_btc *= k;
        PriceSeries prices = data.prices;
        for (auto& [day, p] : prices) p /= k;
        const auto scaled = build_records(std::move(tx), prices, data.labels);
        if (scaled.size() != base.size()) return {false, "rescaled inputs changed the address set"};
        for (std::size_t i = 0; i < base.size(); ++i) {
            for (auto [x, y] : {std::pair{&base[i].credit, &scaled[i].credit}, std::pair{&base[i].debit, &scaled[i].debit}}) {
                for (std::size_t j = 0; j < x->size(); ++j) {
                    worst = std::max(worst, std::abs(y->amounts[j] - x->amounts[j]) / x->amounts[j]);
                }
            }
        }
    }
    return {identical && rules && worst < 1e-10,
            fmt("%zu of 12 addresses kept; bundles %s across 3 runs (1 and 2 threads); window/threshold/grid rules %s; "
                "USD leveling max rel change %.2e under BTC rescaling (tol 1e-10)",
                kept.size(), identical ? "byte-identical" : "DIFFER", rules ? "hold" : "VIOLATED", worst)};
}

// ---- 7: classifiers ----

FeatureMatrix make_matrix(Eigen::MatrixXd x, std::vector<ClassIndex> y) {
    FeatureMatrix m;
    m.values = std::move(x);
    m.labels = std::move(y);
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) m.names.push_back("f" + std::to_string(j));
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) m.row_ids.push_back("r" + std::to_string(i));
    return m;
}

Eigen::MatrixXd uniform_matrix(Eigen::Index n, Eigen::Index d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = u(rng);
    }
    return x;
}

Outcome classifier_sanity() {
    double grad_err = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::mt19937_64 rng(seed);
        const Eigen::MatrixXd x = uniform_matrix(60, 5, rng);
        std::vector<ClassIndex> y(60);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<ClassIndex>(rng() % 5);
        std::normal_distribution<double> n01;
        Eigen::MatrixXd w(4, 6);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n01(rng);
        Eigen::MatrixXd g;
        logit_objective(w, x, y, 1e-2, &g);
        const double h = 1e-6;
        for (Eigen::Index k = 0; k < w.size(); ++k) {
            Eigen::MatrixXd up = w;
            Eigen::MatrixXd down = w;
            up.data()[k] += h;
            down.data()[k] -= h;
            const double fd = (logit_objective(up, x, y, 1e-2, nullptr) - logit_objective(down, x, y, 1e-2, nullptr)) / (2 * h);
            grad_err = std::max(grad_err, std::abs(fd - g.data()[k]) / std::max(1.0, std::abs(fd)));
        }
    }

    // Consistent data: distinct rows with arbitrary labels.
    double min_train_acc = 1.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        std::mt19937_64 rng(100 + seed);
        const Eigen::MatrixXd x = uniform_matrix(150, 6, rng);
        std::vector<ClassIndex> y(150);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<ClassIndex>(i % 5);
        ForestOptions opts;
        opts.seed = seed;
        const FeatureMatrix m = make_matrix(x, y);
        min_train_acc = std::min(min_train_acc, evaluate(*train_forest(m, 5, opts), m).accuracy);
    }

    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        std::mt19937_64 rng(seed);
        const Eigen::MatrixXd x = uniform_matrix(150, 6, rng);
        std::vector<ClassIndex> y(150);
        for (Eigen::Index i = 0; i < 150; ++i) y[static_cast<std::size_t>(i)] = std::min(4, static_cast<int>(x(i, 3) * 5));
        ForestOptions opts;
        opts.seed = seed;
        const auto imp = train_forest(make_matrix(x, y), 5, opts)->importance();
        wins += std::max_element(imp.begin(), imp.end()) - imp.begin() == 3;
    }
    return {grad_err < 1e-5 && min_train_acc == 1.0 && wins >= 95,
            fmt("logit FD gradient rel err %.2e (tol 1e-5); forest train accuracy %.3f (need 1); planted feature "
                "maximal in %d of 100 runs (need 95)",
                grad_err, min_train_acc, wins)};
}

// ---- 8, 9: synthetic end to end ----

app::ExperimentConfig synthetic_config(const fixtures::TempDir& dir, std::uint64_t seed) {
    SynthConfig sc;
    sc.per_class = 120;
    sc.seed = seed;
    const auto sub = dir.path() / ("seed" + std::to_string(seed));
    const IngestInputs in = write_synthetic(generate_synthetic(sc), sub);
    app::ExperimentConfig c;
    c.transactions = in.transactions;
    c.prices = in.prices;
    c.labels = in.labels;
    c.workdir = sub / "work";
    c.seed = seed;
    return c;
}

double best_mean(const std::vector<CellResult>& ranked, FeatureSet set) {
    double best = 0.0;
    for (const auto& r : ranked) {
        if (r.cell.spec.set == set) best = std::max(best, r.mean_accuracy);
    }
    return best;
}

// Sets `full_run` once the full default run has written its models.
Outcome synthetic_end_to_end(const fixtures::TempDir& dir, std::optional<app::ExperimentConfig>& full_run) {
    // Full default grid on seed 1, timed from raw files to reports.
    const auto start = Clock::now();
    const app::ExperimentConfig base = synthetic_config(dir, 1);
    const app::IngestSummary ingest = app::cmd_ingest(base, false, 1);
    const app::RunSummary full = app::cmd_run(base, 1);
    const double full_seconds = seconds_since(start);
    full_run = base;

    // Vector-only versus vector-plus-functional over ten generator seeds.
    int functional_wins = 0;
    std::string margins;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        app::ExperimentConfig c = seed == 1 ? base : synthetic_config(dir, seed);
        if (seed != 1) app::cmd_ingest(c, false, 1);
        c.feature_sets = {FeatureSet::vector_only, FeatureSet::vector_plus_functional};
        c.n_fpcs_grid = {3, 5};
        c.resmooth_lambdas = {1e-1};
        c.n_trees = 200;
        c.workdir = c.workdir.parent_path() / "work_compare";
        if (seed == 1) {
            std::filesystem::create_directories(c.workdir);
            std::filesystem::copy(base.workdir / "bundles", c.workdir / "bundles");
        } else {
            std::filesystem::rename(c.workdir.parent_path() / "work", c.workdir);
        }
        const app::RunSummary s = app::cmd_run(c, 1);
        const double vpf = best_mean(s.ranked, FeatureSet::vector_plus_functional);
        const double vo = best_mean(s.ranked, FeatureSet::vector_only);
        functional_wins += vpf >= vo;
        margins += fmt("%s%+.3f", seed == 1 ? "" : " ", vpf - vo);
    }
    const double held_out = full.test_report.accuracy;
    return {functional_wins >= 8 && held_out >= 0.90 && full_seconds < 300.0,
                  fmt("(a) vector_plus_functional >= vector_only best mean CV accuracy in %d of 10 seeds (need 8; "
                      "margins %s); (b) held-out accuracy %.4f on %zu test rows (need 0.90); full default run on %zu "
                      "addresses, %zu cells: %.1f s (limit 300 s)",
                      functional_wins, margins.c_str(), held_out, full.test_rows, ingest.addresses, full.ranked.size(),
                      full_seconds)};
}

std::map<std::string, std::vector<double>> read_series(const std::filesystem::path& p) {
    std::map<std::string, std::vector<double>> out;
    std::istringstream in(fixtures::read_file(p));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        out[cells.at(3)].push_back(std::stod(cells.at(2)));
    }
    return out;
}

Outcome fpca_mode_identity(const app::ExperimentConfig& config) {
    const app::Workdir w{config.workdir};
    const auto grid = uniform_grid(config.grid_points);
    double worst = 0.0;
    int plots = 0;
    for (CurveType type : kAllCurveTypes) {
        for (double lambda : config.resmooth_lambdas) {
            const FpcaModel model = fpca_from_json(fixtures::read_file(app::fpca_model_path(w, type, lambda)));
            for (Eigen::Index j = 0; j < model.n_components(); ++j) {
                app::PlotRequest req;
                req.kind = "fpca_modes";
                req.curve_type = std::string(curve_type_name(type));
                req.component = static_cast<int>(j) + 1;
                req.lambda = lambda;
                auto series = read_series(app::cmd_plotdata(config, req));
                const auto& plus = series["mean_plus"];
                const auto& minus = series["mean_minus"];
                if (plus.size() != grid.size() || minus.size() != grid.size()) {
                    return {false, "fpca_modes series do not cover the full grid"};
                }
                const Eigen::VectorXd xi = model.eigenfunction(j, grid);
                const double sd = std::sqrt(model.eigenvalues[j]);
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    worst = std::max(worst, std::abs(plus[i] - minus[i] - 2.0 * sd * xi[static_cast<Eigen::Index>(i)]));
                }
                ++plots;
            }
        }
    }
    return {plots > 0 && worst < 1e-10,
            fmt("%d mode plots on %zu points: max |(mean+) - (mean-) - 2 sd xi| %.2e (tol 1e-10)", plots, grid.size(),
                worst)};
}

int failures = 0;

void report(int criterion, const std::function<Outcome()>& check) {
    const auto start = Clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s criterion %d: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", criterion, o.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    report(1, smoothing_closed_form);
    report(2, fpca_constraints);
    report(3, karhunen_loeve_recovery);
    report(4, projection_round_trip);
    report(5, poisson_estimator);
    report(6, pipeline_determinism);
    report(7, classifier_sanity);

    fixtures::TempDir dir("acceptance");
    std::optional<app::ExperimentConfig> full;
    report(8, [&] { return synthetic_end_to_end(dir, full); });
    report(9, [&] {
        if (!full) return Outcome{false, "no completed end-to-end run to plot from"};
        return fpca_mode_identity(*full);
    });
    return failures == 0 ? 0 : 1;
}
