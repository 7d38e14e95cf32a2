#pragma once

#include "fdaclass/classify.hpp"
#include "fdaclass/features.hpp"
#include "fdaclass/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fdaclass::app {

// Everything a run depends on. Thread count is deliberately absent: it never
// changes outputs.
struct ExperimentConfig {
    std::filesystem::path transactions;
    std::filesystem::path prices;
    std::filesystem::path labels;
    std::filesystem::path workdir = "work";
    double window_hours = kWindowHours;
    int grid_points = kGridPoints;
    double merge_minutes = kMergeMinutes;
    int min_transactions = 10;
    double level_lambda = kLevelLambda;
    double deriv_lambda = kDerivativeLambda;
    double rate_lambda = kRateLambda;
    int max_knots = 0;
    std::vector<double> resmooth_lambdas = {1e-10, 1e-1};
    std::vector<int> n_fpcs_grid = {1, 3, 5, 7};
    std::vector<FeatureSet> feature_sets = {kAllFeatureSets.begin(), kAllFeatureSets.end()};
    std::vector<Algorithm> algorithms = {kAllAlgorithms.begin(), kAllAlgorithms.end()};
    double test_fraction = 0.2;
    int cv_folds = 5;
    std::uint64_t seed = 1;
    int n_trees = 500;
    double logit_l2 = 1e-4;

    bool operator==(const ExperimentConfig&) const = default;
};

// Field names in emission order; these are also the CLI flag names.
const std::vector<std::string>& config_fields();

// Sets one field from its text form; lists are comma separated.
void set_field(ExperimentConfig& config, std::string_view name, std::string_view value);
std::string get_field(const ExperimentConfig& config, std::string_view name);

// "key = value" lines; '#' starts a comment. Unknown keys are errors.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string emit_config(const ExperimentConfig& config);

// Throws ConfigError on out-of-range values.
void validate(const ExperimentConfig& config);

PipelineConfig pipeline_config(const ExperimentConfig& config, int threads);

}  // namespace fdaclass::app
