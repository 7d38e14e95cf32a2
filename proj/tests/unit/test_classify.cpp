#include "fdaclass/classify.hpp"
#include "fdaclass/error.hpp"
#include "fixtures.hpp"
#include "synthetic.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <set>

using namespace fdaclass;

namespace {

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

std::vector<ClassIndex> balanced_labels(std::size_t n, int classes) {
    std::vector<ClassIndex> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<ClassIndex>(i % static_cast<std::size_t>(classes));
    return y;
}

// Predicts the class stored in feature column 0.
class ColumnPredictor final : public Classifier {
public:
    ColumnPredictor(std::vector<std::string> names, int classes) {
        feature_names_ = std::move(names);
        n_classes_ = classes;
    }
    Algorithm algorithm() const override { return Algorithm::random_forest; }
    Eigen::VectorXi predict(const Eigen::MatrixXd& x) const override { return x.col(0).cast<int>(); }
    std::string to_json() const override { return "{}"; }
};

double train_accuracy(const Classifier& model, const FeatureMatrix& m) { return evaluate(model, m).accuracy; }

}  // namespace

// ---- sampling ----

TEST_CASE("undersampling keeps the smallest class count per class") {
    std::vector<ClassIndex> y(10, 0);
    y.insert(y.end(), 4, 1);
    const auto keep = undersample_indices(y, 5);
    CHECK(keep.size() == 8);
    CHECK(std::count_if(keep.begin(), keep.end(), [&](std::size_t i) { return y[i] == 0; }) == 4);
    CHECK(std::is_sorted(keep.begin(), keep.end()));
    CHECK(std::set<std::size_t>(keep.begin(), keep.end()).size() == keep.size());
    CHECK(undersample_indices(y, 5) == keep);

    const auto balanced = balanced_labels(30, 3);
    const auto all = undersample_indices(balanced, 1);
    std::vector<std::size_t> expected(30);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(all == expected);
}

TEST_CASE("stratified split of 100 balanced rows sends 4 per class to test") {
    const auto y = balanced_labels(100, 5);
    const Split s = stratified_split(y, 0.2, 7);
    CHECK(s.train.size() == 80);
    CHECK(s.test.size() == 20);
    for (int c = 0; c < 5; ++c) {
        CHECK(std::count_if(s.test.begin(), s.test.end(), [&](std::size_t i) { return y[i] == c; }) == 4);
    }
    std::vector<std::size_t> joined = s.train;
    joined.insert(joined.end(), s.test.begin(), s.test.end());
    std::sort(joined.begin(), joined.end());
    CHECK(std::adjacent_find(joined.begin(), joined.end()) == joined.end());
    CHECK(joined.size() == 100);
    CHECK_THROWS_AS(stratified_split({0, 0, 1}, 0.2, 1), InputError);
    CHECK_THROWS_AS(stratified_split(y, 1.0, 1), ConfigError);
}

TEST_CASE("k folds partition the rows and preserve class proportions") {
    std::vector<ClassIndex> y = balanced_labels(100, 5);
    const auto folds = kfold(y, 5, 3);
    REQUIRE(folds.size() == 5);
    std::vector<int> seen(100, 0);
    for (const auto& f : folds) {
        CHECK(f.size() == 20);
        for (std::size_t i : f) ++seen[i];
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int k) { return k == 1; }));

    // Unbalanced classes: per-fold counts within one of n_c / k.
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> pick(0, 3);
    std::vector<ClassIndex> z(137);
    for (auto& v : z) v = pick(rng);
    const auto zf = kfold(z, 5, 4);
    for (int c = 0; c < 4; ++c) {
        const auto n_c = static_cast<double>(std::count(z.begin(), z.end(), c));
        for (const auto& f : zf) {
            const auto in_fold = static_cast<double>(std::count_if(f.begin(), f.end(), [&](std::size_t i) { return z[i] == c; }));
            CHECK(std::abs(in_fold - n_c / 5.0) < 1.0);
        }
    }

    auto hash = [](const std::vector<std::vector<std::size_t>>& f) {
        std::size_t h = 0;
        for (std::size_t k = 0; k < f.size(); ++k) {
            for (std::size_t i : f[k]) h = h * 1000003u + i * 31u + k;
        }
        return h;
    };
    CHECK(hash(kfold(y, 5, 3)) == hash(folds));
    CHECK(hash(kfold(y, 5, 4)) != hash(folds));
    CHECK_THROWS_AS(kfold(y, 21, 1), InputError);
    CHECK_THROWS_AS(kfold(y, 1, 1), ConfigError);
    CHECK(complement(6, {1, 4}) == std::vector<std::size_t>{0, 2, 3, 5});
}

// ---- logit ----

TEST_CASE("logit gradient matches central finite differences") {
    std::mt19937_64 rng(21);
    const Eigen::MatrixXd x = uniform_matrix(40, 4, rng);
    std::vector<ClassIndex> y(40);
    std::uniform_int_distribution<int> pick(0, 2);
    for (auto& v : y) v = pick(rng);
    std::normal_distribution<double> n01;
    Eigen::MatrixXd w(2, 5);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n01(rng);

    Eigen::MatrixXd g;
    logit_objective(w, x, y, 0.3, &g);
    const double h = 1e-6;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < w.size(); ++k) {
        Eigen::MatrixXd up = w;
        Eigen::MatrixXd down = w;
        up.data()[k] += h;
        down.data()[k] -= h;
        const double fd = (logit_objective(up, x, y, 0.3, nullptr) - logit_objective(down, x, y, 0.3, nullptr)) / (2 * h);
        worst = std::max(worst, std::abs(fd - g.data()[k]) / std::max(1.0, std::abs(fd)));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("logit separates linearly separable classes") {
    std::mt19937_64 rng(2);
    Eigen::MatrixXd x = uniform_matrix(60, 2, rng);
    std::vector<ClassIndex> y(60);
    for (Eigen::Index i = 0; i < 60; ++i) {
        y[static_cast<std::size_t>(i)] = i % 2;
        x(i, 0) += (i % 2) ? 1.5 : -1.5;
    }
    const auto model = train_logit(make_matrix(x, y), 2);
    CHECK(train_accuracy(*model, make_matrix(x, y)) == 1.0);
    CHECK(model->weights().rows() == 1);
    CHECK(model->weights().cols() == 3);
}

TEST_CASE("logit on constant features predicts the class priors") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Constant(50, 3, 7.0);
    std::vector<ClassIndex> y(50, 0);
    for (std::size_t i = 0; i < 30; ++i) y[i] = 1;
    for (std::size_t i = 30; i < 40; ++i) y[i] = 2;
    const auto model = train_logit(make_matrix(x, y), 3);
    CHECK(model->converged);
    const Eigen::MatrixXd p = model->predict_proba(x.topRows(1));
    CHECK(p(0, 0) == doctest::Approx(0.2).epsilon(1e-5));
    CHECK(p(0, 1) == doctest::Approx(0.6).epsilon(1e-5));
    CHECK(p(0, 2) == doctest::Approx(0.2).epsilon(1e-5));
}

TEST_CASE("logit predictions are invariant to affine rescaling of a column") {
    std::mt19937_64 rng(5);
    const Eigen::MatrixXd x = uniform_matrix(80, 3, rng);
    std::vector<ClassIndex> y(80);
    for (Eigen::Index i = 0; i < 80; ++i) y[static_cast<std::size_t>(i)] = x(i, 0) + 0.3 * x(i, 1) > 0.8 ? 2 : x(i, 2) > 0.5;
    Eigen::MatrixXd scaled = x;
    scaled.col(1) = scaled.col(1) * 1000.0 + Eigen::VectorXd::Constant(80, -5.0);
    const auto a = train_logit(make_matrix(x, y), 3);
    const auto b = train_logit(make_matrix(scaled, y), 3);
    CHECK(a->predict(x) == b->predict(scaled));
}

TEST_CASE("logit drops interquartile columns and round trips through JSON") {
    std::mt19937_64 rng(6);
    FeatureMatrix m = make_matrix(uniform_matrix(30, 3, rng), balanced_labels(30, 3));
    m.names[1] = "credit_iqr";
    TrainOptions opts;
    const auto model = train_classifier(Algorithm::multinomial_logit, m, 3, opts);
    CHECK(model->feature_names() == std::vector<std::string>{"f0", "f2"});
    const auto back = classifier_from_json(model->to_json());
    CHECK(back->algorithm() == Algorithm::multinomial_logit);
    CHECK(evaluate(*back, m).confusion == evaluate(*model, m).confusion);
}

// ---- forest ----

TEST_CASE("forest memorizes consistent training data") {
    std::mt19937_64 rng(9);
    const FeatureMatrix m = make_matrix(uniform_matrix(120, 4, rng), balanced_labels(120, 5));
    ForestOptions opts;
    opts.n_trees = 100;
    const auto model = train_forest(m, 5, opts);
    CHECK(train_accuracy(*model, m) == 1.0);
}

TEST_CASE("forest importance is non-negative and sums to one") {
    std::mt19937_64 rng(10);
    const FeatureMatrix m = make_matrix(uniform_matrix(90, 6, rng), balanced_labels(90, 3));
    ForestOptions opts;
    opts.n_trees = 40;
    const auto model = train_forest(m, 3, opts);
    const auto imp = model->importance();
    REQUIRE(imp.size() == 6);
    CHECK(std::all_of(imp.begin(), imp.end(), [](double v) { return v >= 0.0; }));
    CHECK(std::abs(std::accumulate(imp.begin(), imp.end(), 0.0) - 1.0) < 1e-12);
}

TEST_CASE("a planted feature carries the largest importance") {
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::mt19937_64 rng(seed);
        Eigen::MatrixXd x = uniform_matrix(150, 6, rng);
        std::vector<ClassIndex> y(150);
        for (Eigen::Index i = 0; i < 150; ++i) y[static_cast<std::size_t>(i)] = std::min(4, static_cast<int>(x(i, 3) * 5));
        ForestOptions opts;
        opts.n_trees = 60;
        opts.seed = seed;
        const auto imp = train_forest(make_matrix(x, y), 5, opts)->importance();
        wins += std::max_element(imp.begin(), imp.end()) - imp.begin() == 3;
    }
    CHECK(wins == 10);
}

TEST_CASE("forest training is reproducible across runs and thread counts") {
    std::mt19937_64 rng(12);
    const FeatureMatrix m = make_matrix(uniform_matrix(70, 5, rng), balanced_labels(70, 5));
    ForestOptions one;
    one.n_trees = 30;
    one.seed = 77;
    ForestOptions two = one;
    two.threads = 2;
    const auto a = train_forest(m, 5, one);
    const auto b = train_forest(m, 5, two);
    CHECK(a->to_json() == b->to_json());
    const Eigen::MatrixXd probe = uniform_matrix(40, 5, rng);
    CHECK(a->predict(probe) == b->predict(probe));
    const auto back = classifier_from_json(a->to_json());
    CHECK(back->predict(probe) == a->predict(probe));
    CHECK(back->importance() == a->importance());
    ForestOptions other = one;
    other.seed = 78;
    CHECK(train_forest(m, 5, other)->to_json() != a->to_json());
}

TEST_CASE("vote ties go to the lowest class index") {
    auto leaf = [](int label) { return DecisionTree{{TreeNode{-1, 0.0, -1, -1, label}}}; };
    const ForestModel model({"f0"}, 4, {leaf(3), leaf(1), leaf(1), leaf(3)}, {1.0});
    const Eigen::VectorXi p = model.predict(Eigen::MatrixXd::Zero(2, 1));
    CHECK(p[0] == 1);
    CHECK(p[1] == 1);
    CHECK(model.votes(Eigen::MatrixXd::Zero(1, 1)).row(0).sum() == 4);
}

// ---- evaluation ----

TEST_CASE("evaluation counts a confusion matrix consistent with accuracy") {
    FeatureMatrix m = make_matrix(Eigen::MatrixXd(6, 1), {0, 1, 2, 0, 1, 2});
    m.values.col(0) << 0, 1, 2, 0, 1, 2;
    const ColumnPredictor perfect(m.names, 3);
    const EvalReport r = evaluate(perfect, m);
    CHECK(r.accuracy == 1.0);
    CHECK(r.confusion == Eigen::MatrixXi(Eigen::Vector3i(2, 2, 2).asDiagonal()));

    m.values.col(0) << 0, 2, 2, 1, 1, 0;
    const EvalReport q = evaluate(perfect, m);
    const int total = q.confusion.sum();
    const int off = total - q.confusion.trace();
    CHECK(q.accuracy == 1.0 - static_cast<double>(off) / total);
    CHECK(q.confusion.row(0).sum() == 2);
    CHECK(q.per_class_accuracy[1] == 0.5);

    FeatureMatrix absent = make_matrix(Eigen::MatrixXd::Zero(2, 1), {0, 0});
    const EvalReport a = evaluate(ColumnPredictor(absent.names, 3), absent);
    CHECK(std::isnan(a.per_class_accuracy[2]));

    FeatureMatrix wrong = m;
    wrong.names[0] = "g";
    CHECK_THROWS_AS(evaluate(perfect, wrong), InputError);
}

TEST_CASE("a uniform random predictor scores about one fifth") {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> pick(0, 4);
    Eigen::MatrixXd x(10000, 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = pick(rng);
    const FeatureMatrix m = make_matrix(x, balanced_labels(10000, 5));
    const EvalReport r = evaluate(ColumnPredictor(m.names, 5), m);
    CHECK(std::abs(r.accuracy - 0.2) < 0.03);
}

// ---- grid search ----

TEST_CASE("the default grid has 96 cells with unique keys") {
    const std::vector<int> l = {1, 3, 5, 7};
    const std::vector<double> lam = {1e-10, 1e-1};
    const auto cells = enumerate_grid(kAllFeatureSets, l, lam, kAllAlgorithms);
    CHECK(cells.size() == 96);
    std::set<std::string> keys;
    for (const auto& c : cells) keys.insert(c.key());
    CHECK(keys.size() == 96);
    CHECK_THROWS_AS(enumerate_grid(kAllFeatureSets, std::vector<int>{}, lam, kAllAlgorithms), ConfigError);
}

TEST_CASE("ranking is a total order independent of input order") {
    const std::vector<int> l = {1, 3};
    const std::vector<double> lam = {1e-10, 1e-1};
    const auto cells = enumerate_grid(kAllFeatureSets, l, lam, kAllAlgorithms);
    std::vector<CellResult> results;
    for (std::size_t i = 0; i < cells.size(); ++i) results.push_back({cells[i], {}, static_cast<double>(i % 4) / 4.0});
    auto a = results;
    rank_results(a);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        auto b = results;
        std::shuffle(b.begin(), b.end(), rng);
        rank_results(b);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].cell.key() == b[i].cell.key());
    }
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1].mean_accuracy >= a[i].mean_accuracy);
}

TEST_CASE("a single-cell grid reproduces the direct cross-validation mean") {
    const auto bundles = fixtures::synthetic_bundles(10, 17);
    FeatureBuilder builder(bundles);
    const Split split = stratified_split(builder.labels(), 0.2, 1);
    GridSearchOptions opts;
    opts.seed = 4;
    opts.train.forest.n_trees = 50;
    const GridCell cell{{FeatureSet::vector_plus_functional, 3, 1e-1}, Algorithm::random_forest};
    const GridSearchResult g = grid_search(builder, split, {cell}, opts);
    REQUIRE(g.ranked.size() == 1);

    std::vector<ClassIndex> pool;
    for (std::size_t r : split.train) pool.push_back(builder.labels()[r]);
    const auto folds = kfold(pool, 5, 4);
    double sum = 0.0;
    for (const auto& f : folds) {
        std::vector<std::size_t> val;
        std::vector<std::size_t> tr;
        for (std::size_t p : f) val.push_back(split.train[p]);
        for (std::size_t p : complement(split.train.size(), f)) tr.push_back(split.train[p]);
        const auto models = builder.fit(tr, cell.spec.resmooth_lambda, curve_types(cell.spec.set));
        const auto model = train_forest(builder.build(cell.spec, models, tr), 5, opts.train.forest);
        sum += evaluate(*model, builder.build(cell.spec, models, val)).accuracy;
    }
    CHECK(g.ranked.front().mean_accuracy == doctest::Approx(sum / 5.0).epsilon(1e-15));
    CHECK(g.ranked.front().fold_accuracy.size() == 5);
    CHECK(g.test_report.confusion.sum() == static_cast<int>(split.test.size()));
    CHECK(g.test_features.rows() == static_cast<Eigen::Index>(split.test.size()));

    fixtures::TempDir dir("grid");
    write_grid_csv(g.ranked, dir / "grid.csv");
    write_confusion_csv(g.test_report, dir / "confusion.csv");
    CHECK(fixtures::read_file(dir / "grid.csv").rfind("rank,feature_set,n_fpcs,resmooth_lambda,algorithm,", 0) == 0);
    const std::string confusion = fixtures::read_file(dir / "confusion.csv");
    CHECK(std::count(confusion.begin(), confusion.end(), '\n') == 6);
    CHECK(report_to_json(g.test_report).find("\"per_class_accuracy\"") != std::string::npos);
    CHECK(grid_to_json(g.ranked).find("vector_plus_functional") != std::string::npos);
}
