#include "fdaclass/classify.hpp"

#include "fdaclass/error.hpp"
#include "fdaclass/parallel.hpp"
#include "json_io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>

namespace fdaclass {

namespace {

constexpr std::array<std::string_view, 2> kAlgorithmNames = {"multinomial_logit", "random_forest"};

void check_training_set(const FeatureMatrix& m, int n_classes) {
    if (m.rows() == 0) throw InputError("empty training set");
    if (static_cast<std::size_t>(m.rows()) != m.labels.size()) throw InputError("label count does not match rows");
    if (static_cast<std::size_t>(m.cols()) != m.names.size()) throw InputError("feature names do not match columns");
    if (n_classes < 2) throw InputError("need at least two classes");
    for (ClassIndex c : m.labels) {
        if (c < 0 || c >= n_classes) throw InputError("class index out of range");
    }
    if (!m.values.allFinite()) throw InputError("non-finite feature value");
}

// Columns of `m` reordered to `names`; throws on a missing column.
Eigen::MatrixXd select_columns(const FeatureMatrix& m, const std::vector<std::string>& names) {
    std::unordered_map<std::string, Eigen::Index> pos;
    for (std::size_t j = 0; j < m.names.size(); ++j) pos.emplace(m.names[j], static_cast<Eigen::Index>(j));
    Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto it = pos.find(names[j]);
        if (it == pos.end()) throw InputError("feature schema mismatch: column '" + names[j] + "' is missing");
        out.col(static_cast<Eigen::Index>(j)) = m.values.col(it->second);
    }
    return out;
}

// Row-wise class probabilities from (C-1) score columns, class 0 fixed at 0.
Eigen::MatrixXd softmax_with_reference(const Eigen::MatrixXd& scores) {
    const Eigen::Index n = scores.rows();
    const Eigen::Index c = scores.cols() + 1;
    Eigen::MatrixXd p(n, c);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double top = std::max(0.0, scores.row(i).maxCoeff());
        p(i, 0) = std::exp(-top);
        for (Eigen::Index k = 1; k < c; ++k) p(i, k) = std::exp(scores(i, k - 1) - top);
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

Eigen::MatrixXd with_bias(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd xb(x.rows(), x.cols() + 1);
    xb.col(0).setOnes();
    xb.rightCols(x.cols()) = x;
    return xb;
}

int argmax_first(const Eigen::Ref<const Eigen::VectorXi>& v) {
    int best = 0;
    for (Eigen::Index k = 1; k < v.size(); ++k) {
        if (v[k] > v[best]) best = static_cast<int>(k);
    }
    return best;
}

}  // namespace

std::string_view algorithm_name(Algorithm a) { return kAlgorithmNames[static_cast<std::size_t>(a)]; }

std::optional<Algorithm> parse_algorithm(std::string_view text) {
    if (text == "logit") return Algorithm::multinomial_logit;
    if (text == "rf" || text == "forest") return Algorithm::random_forest;
    for (std::size_t i = 0; i < kAlgorithmNames.size(); ++i) {
        if (kAlgorithmNames[i] == text) return static_cast<Algorithm>(i);
    }
    return std::nullopt;
}

// ---- multinomial logit ----

LogitModel::LogitModel(std::vector<std::string> names, int n_classes, Eigen::VectorXd mean, Eigen::VectorXd scale,
                       Eigen::MatrixXd weights)
    : mean_(std::move(mean)), scale_(std::move(scale)), weights_(std::move(weights)) {
    feature_names_ = std::move(names);
    n_classes_ = n_classes;
}

Eigen::MatrixXd LogitModel::predict_proba(const Eigen::MatrixXd& x) const {
    if (x.cols() != mean_.size()) throw InputError("logit: wrong number of feature columns");
    Eigen::MatrixXd z = (x.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array();
    return softmax_with_reference(with_bias(z) * weights_.transpose());
}

Eigen::VectorXi LogitModel::predict(const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd p = predict_proba(x);
    Eigen::VectorXi out(p.rows());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        Eigen::Index arg = 0;
        p.row(i).maxCoeff(&arg);
        out[i] = static_cast<int>(arg);
    }
    return out;
}

std::string LogitModel::to_json() const {
    detail::json j = {{"algorithm", algorithm_name(algorithm())},
                      {"feature_names", feature_names_},
                      {"n_classes", n_classes_},
                      {"mean", detail::vector_to_json(mean_)},
                      {"scale", detail::vector_to_json(scale_)},
                      {"weights", detail::matrix_to_json(weights_)},
                      {"converged", converged},
                      {"iterations", iterations},
                      {"final_gradient_norm", final_gradient_norm}};
    return j.dump() + "\n";
}

double logit_objective(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& x, const std::vector<ClassIndex>& y,
                       double l2, Eigen::MatrixXd* gradient) {
    const Eigen::Index n = x.rows();
    const Eigen::MatrixXd xb = with_bias(x);
    Eigen::MatrixXd p = softmax_with_reference(xb * weights.transpose());
    double nll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        nll -= std::log(std::max(p(i, y[static_cast<std::size_t>(i)]), std::numeric_limits<double>::min()));
    }
    const Eigen::MatrixXd coefs = weights.rightCols(weights.cols() - 1);
    const double value = nll / static_cast<double>(n) + 0.5 * l2 * coefs.squaredNorm();
    if (gradient) {
        for (Eigen::Index i = 0; i < n; ++i) p(i, y[static_cast<std::size_t>(i)]) -= 1.0;
        *gradient = p.rightCols(p.cols() - 1).transpose() * xb / static_cast<double>(n);
        gradient->rightCols(weights.cols() - 1) += l2 * coefs;
    }
    return value;
}

std::unique_ptr<LogitModel> train_logit(const FeatureMatrix& train, int n_classes, const LogitOptions& options) {
    check_training_set(train, n_classes);
    if (!(options.l2 >= 0.0)) throw ConfigError("logit l2 must be non-negative");
    const Eigen::Index d = train.cols();
    const Eigen::VectorXd mean = train.values.colwise().mean();
    Eigen::VectorXd scale(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const double sd = std::sqrt((train.values.col(j).array() - mean[j]).square().mean());
        scale[j] = sd > 1e-12 * std::max(1.0, std::abs(mean[j])) ? sd : 1.0;
    }
    const Eigen::MatrixXd x = (train.values.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();

    // Gradient descent; the trial step is the Barzilai-Borwein length, then
    // halved until the Armijo condition holds.
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n_classes - 1, d + 1);
    Eigen::MatrixXd g;
    double f = logit_objective(w, x, train.labels, options.l2, &g);
    double step = 1.0;
    int iter = 0;
    bool converged = false;
    Eigen::MatrixXd w_new;
    Eigen::MatrixXd g_new;
    for (; iter < options.max_iterations; ++iter) {
        if (g.norm() < options.gradient_tolerance) {
            converged = true;
            break;
        }
        const double g2 = g.squaredNorm();
        double t = step;
        double f_new = 0.0;
        for (int halving = 0;; ++halving) {
            w_new = w - t * g;
            f_new = logit_objective(w_new, x, train.labels, options.l2, &g_new);
            if (f_new <= f - 1e-4 * t * g2) break;
            if (halving == 60) {
                t = 0.0;
                break;
            }
            t *= 0.5;
        }
        if (t == 0.0) break;
        const Eigen::MatrixXd s = w_new - w;
        const Eigen::MatrixXd yk = g_new - g;
        const double sy = (s.array() * yk.array()).sum();
        step = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * t;
        step = std::clamp(step, 1e-10, 1e10);
        w.swap(w_new);
        g.swap(g_new);
        f = f_new;
    }
    if (!converged && g.norm() < options.gradient_tolerance) converged = true;
    auto model = std::make_unique<LogitModel>(train.names, n_classes, mean, scale, w);
    model->converged = converged;
    model->iterations = iter;
    model->final_gradient_norm = g.norm();
    if (!converged) {
        spdlog::debug("logit stopped after {} iterations with gradient norm {:.3g}", iter, g.norm());
    }
    return model;
}

// ---- random forest ----

int DecisionTree::predict(const double* row, Eigen::Index stride) const {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
        const TreeNode& n = nodes[static_cast<std::size_t>(node)];
        node = row[n.feature * stride] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(node)].label;
}

ForestModel::ForestModel(std::vector<std::string> names, int n_classes, std::vector<DecisionTree> trees,
                         std::vector<double> importance)
    : trees_(std::move(trees)), importance_(std::move(importance)) {
    feature_names_ = std::move(names);
    n_classes_ = n_classes;
}

Eigen::MatrixXi ForestModel::votes(const Eigen::MatrixXd& x) const {
    if (x.cols() != static_cast<Eigen::Index>(feature_names_.size())) {
        throw InputError("forest: wrong number of feature columns");
    }
    Eigen::MatrixXi v = Eigen::MatrixXi::Zero(x.rows(), n_classes_);
    for (const DecisionTree& t : trees_) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) ++v(i, t.predict(x.data() + i, x.rows()));
    }
    return v;
}

Eigen::VectorXi ForestModel::predict(const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXi v = votes(x);
    Eigen::VectorXi out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = argmax_first(v.row(i).transpose());
    return out;
}

std::string ForestModel::to_json() const {
    detail::json trees = detail::json::array();
    for (const DecisionTree& t : trees_) {
        detail::json feature = detail::json::array();
        detail::json threshold = detail::json::array();
        detail::json left = detail::json::array();
        detail::json right = detail::json::array();
        detail::json label = detail::json::array();
        for (const TreeNode& n : t.nodes) {
            feature.push_back(n.feature);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            label.push_back(n.label);
        }
        trees.push_back(
            {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"label", label}});
    }
    detail::json j = {{"algorithm", algorithm_name(algorithm())},
                      {"feature_names", feature_names_},
                      {"n_classes", n_classes_},
                      {"importance", importance_},
                      {"trees", trees}};
    return j.dump() + "\n";
}

namespace {

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, const std::vector<ClassIndex>& y, int n_classes, int mtry, int min_leaf)
        : x_(x), y_(y), n_classes_(n_classes), mtry_(mtry), min_leaf_(min_leaf) {}

    // Grows one tree on `sample` (row indices with repeats); adds the
    // impurity decrease of every split to `importance`.
    DecisionTree grow(std::vector<std::size_t> sample, std::mt19937_64& rng, std::vector<double>& importance) {
        DecisionTree tree;
        struct Pending {
            int node;
            std::size_t begin;
            std::size_t end;
        };
        std::vector<Pending> stack;
        tree.nodes.push_back({});
        stack.push_back({0, 0, sample.size()});
        std::vector<int> features(static_cast<std::size_t>(x_.cols()));
        std::iota(features.begin(), features.end(), 0);

        while (!stack.empty()) {
            const Pending p = stack.back();
            stack.pop_back();
            std::vector<double> counts(static_cast<std::size_t>(n_classes_), 0.0);
            for (std::size_t i = p.begin; i < p.end; ++i) counts[static_cast<std::size_t>(y_[sample[i]])] += 1.0;
            const auto n = static_cast<double>(p.end - p.begin);
            int label = 0;
            double sum_sq = 0.0;
            int present = 0;
            for (int c = 0; c < n_classes_; ++c) {
                const double k = counts[static_cast<std::size_t>(c)];
                if (k > counts[static_cast<std::size_t>(label)]) label = c;
                sum_sq += k * k;
                present += k > 0.0;
            }
            tree.nodes[static_cast<std::size_t>(p.node)].label = label;
            if (present <= 1 || p.end - p.begin < 2 * static_cast<std::size_t>(min_leaf_)) continue;

            const double parent = n - sum_sq / n;  // n * gini
            const Best best = find_split(sample, p.begin, p.end, features, rng);
            if (best.feature < 0) continue;

            const auto mid = std::partition(sample.begin() + static_cast<std::ptrdiff_t>(p.begin),
                                            sample.begin() + static_cast<std::ptrdiff_t>(p.end), [&](std::size_t r) {
                                                return x_(static_cast<Eigen::Index>(r), best.feature) <= best.threshold;
                                            });
            const auto split = static_cast<std::size_t>(mid - sample.begin());
            importance[static_cast<std::size_t>(best.feature)] += parent - best.impurity;
            const int left = static_cast<int>(tree.nodes.size());
            tree.nodes.push_back({});
            tree.nodes.push_back({});
            TreeNode& node = tree.nodes[static_cast<std::size_t>(p.node)];
            node.feature = best.feature;
            node.threshold = best.threshold;
            node.left = left;
            node.right = left + 1;
            stack.push_back({left + 1, split, p.end});
            stack.push_back({left, p.begin, split});
        }
        return tree;
    }

private:
    struct Best {
        int feature = -1;
        double threshold = 0.0;
        double impurity = std::numeric_limits<double>::infinity();  // n_l*gini_l + n_r*gini_r
    };

    // Examines features in random order: the first mtry, then more only while
    // none of them admits a split.
    Best find_split(const std::vector<std::size_t>& sample, std::size_t begin, std::size_t end,
                    std::vector<int>& features, std::mt19937_64& rng) {
        Best best;
        const std::size_t d = features.size();
        std::vector<std::pair<double, int>> vals(end - begin);
        std::vector<double> left(static_cast<std::size_t>(n_classes_));
        std::vector<double> total(static_cast<std::size_t>(n_classes_), 0.0);
        for (std::size_t i = begin; i < end; ++i) total[static_cast<std::size_t>(y_[sample[i]])] += 1.0;
        const auto n = static_cast<double>(end - begin);

        for (std::size_t k = 0; k < d; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, d - 1);
            std::swap(features[k], features[pick(rng)]);
            if (k >= static_cast<std::size_t>(mtry_) && best.feature >= 0) break;
            const int f = features[k];
            for (std::size_t i = begin; i < end; ++i) {
                vals[i - begin] = {x_(static_cast<Eigen::Index>(sample[i]), f), y_[sample[i]]};
            }
            std::sort(vals.begin(), vals.end());
            if (vals.front().first == vals.back().first) continue;
            std::fill(left.begin(), left.end(), 0.0);
            double left_sq = 0.0;
            double right_sq = 0.0;
            for (double t : total) right_sq += t * t;
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                const auto c = static_cast<std::size_t>(vals[i].second);
                const double right_c = total[c] - left[c];
                left_sq += 2.0 * left[c] + 1.0;
                right_sq -= 2.0 * right_c - 1.0;
                left[c] += 1.0;
                if (vals[i].first == vals[i + 1].first) continue;
                const auto nl = static_cast<double>(i + 1);
                const double nr = n - nl;
                if (nl < min_leaf_ || nr < min_leaf_) continue;
                const double impurity = (nl - left_sq / nl) + (nr - right_sq / nr);
                if (impurity < best.impurity) {
                    best.impurity = impurity;
                    best.feature = f;
                    double thr = 0.5 * (vals[i].first + vals[i + 1].first);
                    if (!(thr < vals[i + 1].first)) thr = vals[i].first;
                    best.threshold = thr;
                }
            }
        }
        return best;
    }

    const Eigen::MatrixXd& x_;
    const std::vector<ClassIndex>& y_;
    int n_classes_;
    int mtry_;
    int min_leaf_;
};

}  // namespace

std::unique_ptr<ForestModel> train_forest(const FeatureMatrix& train, int n_classes, const ForestOptions& options) {
    check_training_set(train, n_classes);
    if (options.n_trees < 1) throw ConfigError("n_trees must be positive");
    if (options.min_leaf < 1) throw ConfigError("min_leaf must be positive");
    const auto d = static_cast<int>(train.cols());
    if (d == 0) throw InputError("forest needs at least one feature");
    const int mtry = options.mtry > 0 ? std::min(options.mtry, d)
                                      : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(d)))));
    const std::size_t n = train.labels.size();

    std::vector<DecisionTree> trees(static_cast<std::size_t>(options.n_trees));
    std::vector<std::vector<double>> tree_importance(trees.size());
    parallel_for(trees.size(), options.threads, [&](std::size_t t) {
        // One stream per tree, so results do not depend on scheduling.
        std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                          static_cast<std::uint32_t>(t)};
        std::mt19937_64 rng(seq);
        std::uniform_int_distribution<std::size_t> draw(0, n - 1);
        std::vector<std::size_t> sample(n);
        for (auto& s : sample) s = draw(rng);
        TreeBuilder builder(train.values, train.labels, n_classes, mtry, options.min_leaf);
        tree_importance[t].assign(static_cast<std::size_t>(d), 0.0);
        trees[t] = builder.grow(std::move(sample), rng, tree_importance[t]);
    });

    std::vector<double> importance(static_cast<std::size_t>(d), 0.0);
    for (const auto& ti : tree_importance) {
        const double total = std::accumulate(ti.begin(), ti.end(), 0.0);
        if (total <= 0.0) continue;
        for (std::size_t j = 0; j < ti.size(); ++j) importance[j] += ti[j] / total;
    }
    const double total = std::accumulate(importance.begin(), importance.end(), 0.0);
    for (auto& v : importance) v = total > 0.0 ? v / total : 1.0 / d;
    return std::make_unique<ForestModel>(train.names, n_classes, std::move(trees), std::move(importance));
}

std::unique_ptr<Classifier> classifier_from_json(std::string_view text) {
    try {
        const detail::json j = detail::json::parse(text);
        const auto algo = parse_algorithm(detail::member(j, "algorithm").get<std::string>());
        if (!algo) throw InputError("unknown algorithm in model file");
        auto names = detail::member(j, "feature_names").get<std::vector<std::string>>();
        const int classes = detail::member(j, "n_classes").get<int>();
        if (*algo == Algorithm::multinomial_logit) {
            auto m = std::make_unique<LogitModel>(std::move(names), classes,
                                                  detail::vector_from_json(detail::member(j, "mean")),
                                                  detail::vector_from_json(detail::member(j, "scale")),
                                                  detail::matrix_from_json(detail::member(j, "weights")));
            m->converged = detail::member(j, "converged").get<bool>();
            m->iterations = detail::member(j, "iterations").get<int>();
            m->final_gradient_norm = detail::member(j, "final_gradient_norm").get<double>();
            return m;
        }
        std::vector<DecisionTree> trees;
        for (const auto& t : detail::member(j, "trees")) {
            const auto feature = detail::member(t, "feature").get<std::vector<int>>();
            const auto threshold = detail::member(t, "threshold").get<std::vector<double>>();
            const auto left = detail::member(t, "left").get<std::vector<int>>();
            const auto right = detail::member(t, "right").get<std::vector<int>>();
            const auto label = detail::member(t, "label").get<std::vector<int>>();
            DecisionTree tree;
            for (std::size_t k = 0; k < feature.size(); ++k) {
                tree.nodes.push_back({feature.at(k), threshold.at(k), left.at(k), right.at(k), label.at(k)});
            }
            if (tree.nodes.empty()) throw InputError("empty tree in model file");
            trees.push_back(std::move(tree));
        }
        return std::make_unique<ForestModel>(std::move(names), classes, std::move(trees),
                                             detail::member(j, "importance").get<std::vector<double>>());
    } catch (const detail::json::exception& e) {
        throw InputError(std::string("malformed model file: ") + e.what());
    } catch (const std::out_of_range&) {
        throw InputError("malformed model file: ragged tree arrays");
    }
}

FeatureMatrix adapt_features(Algorithm a, const FeatureMatrix& m) {
    return a == Algorithm::multinomial_logit ? drop_columns_with_suffix(m, "_iqr") : m;
}

std::unique_ptr<Classifier> train_classifier(Algorithm a, const FeatureMatrix& train, int n_classes,
                                             const TrainOptions& options) {
    if (a == Algorithm::multinomial_logit) return train_logit(adapt_features(a, train), n_classes, options.logit);
    return train_forest(train, n_classes, options.forest);
}

EvalReport evaluate(const Classifier& model, const FeatureMatrix& test) {
    if (static_cast<std::size_t>(test.rows()) != test.labels.size()) throw InputError("label count does not match rows");
    const Eigen::MatrixXd x = select_columns(test, model.feature_names());
    const Eigen::VectorXi pred = model.predict(x);
    const int c = model.n_classes();
    EvalReport r;
    r.confusion = Eigen::MatrixXi::Zero(c, c);
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        const ClassIndex truth = test.labels[static_cast<std::size_t>(i)];
        if (truth < 0 || truth >= c) throw InputError("test label out of range");
        ++r.confusion(truth, pred[i]);
    }
    const int total = r.confusion.sum();
    r.accuracy = total > 0 ? static_cast<double>(r.confusion.trace()) / total : 0.0;
    for (int k = 0; k < c; ++k) {
        const int row = r.confusion.row(k).sum();
        r.per_class_accuracy.push_back(row > 0 ? static_cast<double>(r.confusion(k, k)) / row
                                               : std::numeric_limits<double>::quiet_NaN());
    }
    r.feature_names = model.feature_names();
    r.feature_importance = model.importance();
    return r;
}

// ---- grid search ----

std::string GridCell::key() const {
    char lam[32];
    std::snprintf(lam, sizeof lam, "%.17g", spec.resmooth_lambda);
    return std::string(feature_set_name(spec.set)) + "|" + std::to_string(spec.n_fpcs) + "|" + lam + "|" +
           std::string(algorithm_name(algorithm));
}

std::vector<GridCell> enumerate_grid(std::span<const FeatureSet> sets, std::span<const int> n_fpcs,
                                     std::span<const double> lambdas, std::span<const Algorithm> algorithms) {
    if (sets.empty() || n_fpcs.empty() || lambdas.empty() || algorithms.empty()) {
        throw ConfigError("grid search needs non-empty grids");
    }
    std::vector<GridCell> cells;
    for (FeatureSet s : sets) {
        for (int l : n_fpcs) {
            for (double lam : lambdas) {
                for (Algorithm a : algorithms) cells.push_back({{s, l, lam}, a});
            }
        }
    }
    return cells;
}

void rank_results(std::vector<CellResult>& results) {
    std::sort(results.begin(), results.end(), [](const CellResult& a, const CellResult& b) {
        if (a.mean_accuracy != b.mean_accuracy) return a.mean_accuracy > b.mean_accuracy;
        return a.cell.key() < b.cell.key();
    });
}

namespace {

// Cells whose feature matrices coincide share one evaluation.
std::string effective_key(const GridCell& c) {
    if (curve_types(c.spec.set).empty()) {
        return std::string(feature_set_name(c.spec.set)) + "|" + std::string(algorithm_name(c.algorithm));
    }
    return c.key();
}

std::vector<std::size_t> pick(const std::vector<std::size_t>& pool, const std::vector<std::size_t>& positions) {
    std::vector<std::size_t> out;
    out.reserve(positions.size());
    for (std::size_t p : positions) out.push_back(pool[p]);
    return out;
}

double fold_accuracy(const Classifier& model, const FeatureMatrix& val) { return evaluate(model, val).accuracy; }

}  // namespace

GridSearchResult grid_search(FeatureBuilder& builder, const Split& split, const std::vector<GridCell>& cells,
                             const GridSearchOptions& options) {
    if (cells.empty()) throw ConfigError("grid search needs at least one cell");
    constexpr int kClasses = static_cast<int>(kAllLabels.size());
    std::vector<ClassIndex> pool_labels;
    for (std::size_t r : split.train) pool_labels.push_back(builder.labels()[r]);
    const auto folds = kfold(pool_labels, options.folds, options.seed);

    std::map<double, std::vector<CurveType>> types_by_lambda;
    for (const GridCell& c : cells) {
        for (CurveType t : curve_types(c.spec.set)) {
            auto& v = types_by_lambda[c.spec.resmooth_lambda];
            if (std::find(v.begin(), v.end(), t) == v.end()) v.push_back(t);
        }
    }

    std::map<std::string, std::vector<double>> scores;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto val_rows = pick(split.train, folds[f]);
        const auto train_rows = pick(split.train, complement(split.train.size(), folds[f]));
        std::map<double, FunctionalModels> models;
        for (const auto& [lam, types] : types_by_lambda) models.emplace(lam, builder.fit(train_rows, lam, types));
        FunctionalModels scalar_only;
        scalar_only.train_rows = train_rows;

        for (const GridCell& c : cells) {
            const std::string key = effective_key(c);
            auto& s = scores[key];
            if (s.size() > f) continue;
            const bool functional = !curve_types(c.spec.set).empty();
            const FunctionalModels& m = functional ? models.at(c.spec.resmooth_lambda) : scalar_only;
            FeatureSetSpec spec = c.spec;
            if (!functional) spec.resmooth_lambda = m.resmooth_lambda;
            const FeatureMatrix tr = builder.build(spec, m, train_rows);
            const FeatureMatrix va = builder.build(spec, m, val_rows);
            const auto model = train_classifier(c.algorithm, tr, kClasses, options.train);
            s.push_back(fold_accuracy(*model, va));
        }
        spdlog::info("cross-validation fold {}/{} done", f + 1, folds.size());
    }

    GridSearchResult out;
    for (const GridCell& c : cells) {
        CellResult r;
        r.cell = c;
        r.fold_accuracy = scores.at(effective_key(c));
        r.mean_accuracy = std::accumulate(r.fold_accuracy.begin(), r.fold_accuracy.end(), 0.0) /
                          static_cast<double>(r.fold_accuracy.size());
        out.ranked.push_back(std::move(r));
    }
    rank_results(out.ranked);
    out.best = out.ranked.front().cell;

    FeatureSetSpec spec = out.best.spec;
    const auto types = curve_types(spec.set);
    FunctionalModels m;
    m.train_rows = split.train;
    if (types.empty()) {
        spec.resmooth_lambda = 0.0;
    } else {
        m = builder.fit(split.train, spec.resmooth_lambda, types);
    }
    const FeatureMatrix tr = builder.build(spec, m, split.train);
    out.test_features = builder.build(spec, m, split.test);
    out.model = train_classifier(out.best.algorithm, tr, kClasses, options.train);
    out.test_report = evaluate(*out.model, out.test_features);
    return out;
}

// ---- output ----

std::string report_to_json(const EvalReport& report) {
    detail::json per_class = detail::json::object();
    for (std::size_t k = 0; k < report.per_class_accuracy.size(); ++k) {
        const double v = report.per_class_accuracy[k];
        per_class[std::string(label_name(static_cast<Label>(k)))] = std::isnan(v) ? detail::json(nullptr) : detail::json(v);
    }
    detail::json confusion = detail::json::array();
    for (Eigen::Index i = 0; i < report.confusion.rows(); ++i) {
        detail::json row = detail::json::array();
        for (Eigen::Index j = 0; j < report.confusion.cols(); ++j) row.push_back(report.confusion(i, j));
        confusion.push_back(row);
    }
    detail::json importance = detail::json::array();
    for (std::size_t j = 0; j < report.feature_importance.size(); ++j) {
        importance.push_back({{"feature", report.feature_names[j]}, {"importance", report.feature_importance[j]}});
    }
    detail::json j = {{"accuracy", report.accuracy},
                      {"per_class_accuracy", per_class},
                      {"confusion", confusion},
                      {"feature_importance", importance}};
    return j.dump(2) + "\n";
}

void write_confusion_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "true_label";
    for (Eigen::Index j = 0; j < report.confusion.cols(); ++j) out << ',' << label_name(static_cast<Label>(j));
    out << '\n';
    for (Eigen::Index i = 0; i < report.confusion.rows(); ++i) {
        out << label_name(static_cast<Label>(i));
        for (Eigen::Index j = 0; j < report.confusion.cols(); ++j) out << ',' << report.confusion(i, j);
        out << '\n';
    }
}

void write_grid_csv(const std::vector<CellResult>& ranked, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "rank,feature_set,n_fpcs,resmooth_lambda,algorithm,mean_cv_accuracy";
    const std::size_t folds = ranked.empty() ? 0 : ranked.front().fold_accuracy.size();
    for (std::size_t f = 0; f < folds; ++f) out << ",fold" << f + 1;
    out << '\n';
    char buf[32];
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        const CellResult& c = ranked[r];
        std::snprintf(buf, sizeof buf, "%.17g", c.cell.spec.resmooth_lambda);
        out << r + 1 << ',' << feature_set_name(c.cell.spec.set) << ',' << c.cell.spec.n_fpcs << ',' << buf << ','
            << algorithm_name(c.cell.algorithm);
        std::snprintf(buf, sizeof buf, "%.17g", c.mean_accuracy);
        out << ',' << buf;
        for (double a : c.fold_accuracy) {
            std::snprintf(buf, sizeof buf, "%.17g", a);
            out << ',' << buf;
        }
        out << '\n';
    }
}

std::string grid_to_json(const std::vector<CellResult>& ranked) {
    detail::json rows = detail::json::array();
    for (const CellResult& c : ranked) {
        rows.push_back({{"feature_set", feature_set_name(c.cell.spec.set)},
                        {"n_fpcs", c.cell.spec.n_fpcs},
                        {"resmooth_lambda", c.cell.spec.resmooth_lambda},
                        {"algorithm", algorithm_name(c.cell.algorithm)},
                        {"mean_cv_accuracy", c.mean_accuracy},
                        {"fold_accuracy", c.fold_accuracy}});
    }
    return rows.dump(2) + "\n";
}

}  // namespace fdaclass
