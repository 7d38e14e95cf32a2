#pragma once

#include "fdaclass/features.hpp"
#include "fdaclass/sampling.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fdaclass {

enum class Algorithm { multinomial_logit, random_forest };

inline constexpr std::array<Algorithm, 2> kAllAlgorithms = {Algorithm::multinomial_logit, Algorithm::random_forest};

std::string_view algorithm_name(Algorithm a);
std::optional<Algorithm> parse_algorithm(std::string_view text);

// A fitted model over named feature columns. Further algorithms plug in by
// implementing this interface.
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual Algorithm algorithm() const = 0;
    virtual Eigen::VectorXi predict(const Eigen::MatrixXd& x) const = 0;
    // Mean decrease in impurity, summing to 1; empty when not defined.
    virtual std::vector<double> importance() const { return {}; }
    virtual std::string to_json() const = 0;

    const std::vector<std::string>& feature_names() const { return feature_names_; }
    int n_classes() const { return n_classes_; }

protected:
    std::vector<std::string> feature_names_;
    int n_classes_ = 0;
};

struct LogitOptions {
    double l2 = 1e-4;
    double gradient_tolerance = 1e-6;
    int max_iterations = 5000;
};

// Softmax regression with class 0 as reference: weights hold one row of
// [bias, coefficients on standardized features] per class 1..C-1.
class LogitModel final : public Classifier {
public:
    LogitModel(std::vector<std::string> names, int n_classes, Eigen::VectorXd mean, Eigen::VectorXd scale,
               Eigen::MatrixXd weights);

    Algorithm algorithm() const override { return Algorithm::multinomial_logit; }
    Eigen::VectorXi predict(const Eigen::MatrixXd& x) const override;
    Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const;
    std::string to_json() const override;

    const Eigen::MatrixXd& weights() const { return weights_; }
    bool converged = false;
    int iterations = 0;
    double final_gradient_norm = 0.0;

private:
    Eigen::VectorXd mean_;
    Eigen::VectorXd scale_;
    Eigen::MatrixXd weights_;  // (C-1) x (d+1)
};

// Mean negative log-likelihood plus (l2/2)*||coefficients||^2 (biases
// unpenalized) at `weights` for design `x` (already standardized, no bias
// column). Fills `gradient` with the same shape as `weights` when non-null.
double logit_objective(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& x, const std::vector<ClassIndex>& y,
                       double l2, Eigen::MatrixXd* gradient);

std::unique_ptr<LogitModel> train_logit(const FeatureMatrix& train, int n_classes, const LogitOptions& options = {});

struct ForestOptions {
    int n_trees = 500;
    int mtry = 0;       // 0: floor(sqrt(d))
    int min_leaf = 1;
    std::uint64_t seed = 1;
    int threads = 1;
};

struct TreeNode {
    int feature = -1;  // -1 for a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = 0;  // majority class at the node
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    int predict(const double* row, Eigen::Index stride) const;
};

class ForestModel final : public Classifier {
public:
    ForestModel(std::vector<std::string> names, int n_classes, std::vector<DecisionTree> trees,
                std::vector<double> importance);

    Algorithm algorithm() const override { return Algorithm::random_forest; }
    Eigen::VectorXi predict(const Eigen::MatrixXd& x) const override;
    // Vote counts per class, one row per input row.
    Eigen::MatrixXi votes(const Eigen::MatrixXd& x) const;
    std::vector<double> importance() const override { return importance_; }
    std::string to_json() const override;

    const std::vector<DecisionTree>& trees() const { return trees_; }

private:
    std::vector<DecisionTree> trees_;
    std::vector<double> importance_;
};

std::unique_ptr<ForestModel> train_forest(const FeatureMatrix& train, int n_classes, const ForestOptions& options = {});

std::unique_ptr<Classifier> classifier_from_json(std::string_view text);

struct TrainOptions {
    LogitOptions logit;
    ForestOptions forest;
};

// Logit drops the interquartile-range columns before fitting.
std::unique_ptr<Classifier> train_classifier(Algorithm a, const FeatureMatrix& train, int n_classes,
                                             const TrainOptions& options);
// Applies the same column adaptation as train_classifier.
FeatureMatrix adapt_features(Algorithm a, const FeatureMatrix& m);

struct EvalReport {
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy;  // NaN for classes absent from the test rows
    Eigen::MatrixXi confusion;               // rows: true class, cols: predicted
    std::vector<std::string> feature_names;
    std::vector<double> feature_importance;  // forest only
};

EvalReport evaluate(const Classifier& model, const FeatureMatrix& test);

struct GridCell {
    FeatureSetSpec spec;
    Algorithm algorithm = Algorithm::random_forest;

    std::string key() const;
};

struct CellResult {
    GridCell cell;
    std::vector<double> fold_accuracy;
    double mean_accuracy = 0.0;
};

std::vector<GridCell> enumerate_grid(std::span<const FeatureSet> sets, std::span<const int> n_fpcs,
                                     std::span<const double> lambdas, std::span<const Algorithm> algorithms);

// Descending mean accuracy, ties by ascending key.
void rank_results(std::vector<CellResult>& results);

struct GridSearchResult {
    std::vector<CellResult> ranked;
    GridCell best;
    EvalReport test_report;             // best cell refit on all training rows
    std::unique_ptr<Classifier> model;  // that refit model
    FeatureMatrix test_features;
};

struct GridSearchOptions {
    int folds = 5;
    std::uint64_t seed = 1;
    TrainOptions train;
};

// Mean k-fold CV accuracy for every cell on `split.train` (FPCA refit inside
// each fold), then refit of the best cell on split.train and evaluation on
// split.test.
GridSearchResult grid_search(FeatureBuilder& builder, const Split& split, const std::vector<GridCell>& cells,
                             const GridSearchOptions& options);

std::string report_to_json(const EvalReport& report);
void write_confusion_csv(const EvalReport& report, const std::filesystem::path& path);
void write_grid_csv(const std::vector<CellResult>& ranked, const std::filesystem::path& path);
std::string grid_to_json(const std::vector<CellResult>& ranked);

}  // namespace fdaclass
