#pragma once

#include "fdaclass/fpca.hpp"
#include "fdaclass/pipeline.hpp"
#include "fdaclass/sampling.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fdaclass {

struct StreamStats {
    double count = 0.0;
    double sum = 0.0;
    double min = 0.0;
    double max = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double iqr = 0.0;
    double interval_time = 0.0;  // last minus first event time, normalized units
    bool empty = true;
};

struct ScalarFeatures {
    StreamStats credit;
    StreamStats debit;
    double credit_constant_rate = 0.0;  // count / max(interval_time, floor)
    double debit_constant_rate = 0.0;
};

// Linear-interpolation quantile of sorted data (R type 7).
double quantile_type7(std::span<const double> sorted, double p);

StreamStats stream_stats(const Stream& stream);
// `interval_floor` bounds the denominator of the constant rates.
ScalarFeatures scalar_features(const AddressRecord& record, double interval_floor);

// Column names of the scalar block, per stream: 9 statistics then an
// empty-stream flag.
std::vector<std::string> scalar_feature_names();
std::vector<double> scalar_feature_values(const ScalarFeatures& f);

enum class FeatureSet {
    vector_only,
    functional_only,
    vector_plus_functional,
    vector_plus_constant_rates,
    vector_plus_functional_rates,
    vector_plus_derivatives_and_rates,
};

inline constexpr std::array<FeatureSet, 6> kAllFeatureSets = {
    FeatureSet::vector_only,
    FeatureSet::functional_only,
    FeatureSet::vector_plus_functional,
    FeatureSet::vector_plus_constant_rates,
    FeatureSet::vector_plus_functional_rates,
    FeatureSet::vector_plus_derivatives_and_rates,
};

std::string_view feature_set_name(FeatureSet set);
std::optional<FeatureSet> parse_feature_set(std::string_view text);

bool uses_scalars(FeatureSet set);
bool uses_constant_rates(FeatureSet set);
std::vector<CurveType> curve_types(FeatureSet set);

struct FeatureSetSpec {
    FeatureSet set = FeatureSet::vector_plus_functional;
    int n_fpcs = 1;
    double resmooth_lambda = 1e-10;

    bool operator==(const FeatureSetSpec&) const = default;
};

std::size_t column_count(const FeatureSetSpec& spec);

struct FeatureMatrix {
    Eigen::MatrixXd values;  // rows x columns
    std::vector<std::string> names;
    std::vector<ClassIndex> labels;
    std::vector<std::string> row_ids;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

// Copy without the columns whose names end in `suffix`.
FeatureMatrix drop_columns_with_suffix(const FeatureMatrix& m, std::string_view suffix);

struct FeatureConfig {
    int grid_points = kGridPoints;
    int common_order = 4;
    int common_intervals = 64;       // equally spaced re-smoothing knots
    int resmooth_penalty_order = 2;
    int max_fpcs = 7;
    int threads = 1;
};

// Per-curve-type FPCA models fitted on one set of training rows.
struct FunctionalModels {
    double resmooth_lambda = 0.0;
    std::map<CurveType, FpcaModel> models;  // max_fpcs components each
    std::map<CurveType, Eigen::MatrixXd> train_scores;
    std::vector<std::size_t> train_rows;
};

// Caches what every feature matrix is built from: scalar features, every
// curve sampled on the common grid, and the re-smoothed coefficients per
// (curve type, lambda). Rows follow the bundle order.
class FeatureBuilder {
public:
    FeatureBuilder(const std::vector<CurveBundle>& bundles, FeatureConfig config = {});

    std::size_t size() const { return ids_.size(); }
    const FeatureConfig& config() const { return config_; }
    const std::vector<double>& grid() const { return grid_; }
    const BasisPtr& common_basis() const { return basis_; }
    const std::vector<ClassIndex>& labels() const { return labels_; }
    const std::vector<std::string>& ids() const { return ids_; }
    const Eigen::MatrixXd& scalars() const { return scalars_; }  // all scalar columns incl. constant rates
    const Eigen::MatrixXd& samples(CurveType type) const;        // rows x grid

    // Re-smoothed coefficients on the common basis (all rows).
    const Eigen::MatrixXd& coefficients(CurveType type, double lambda);

    // Fits one FPCA per curve type on `train` only, with up to max_fpcs
    // components (fewer when the training set is small).
    FunctionalModels fit(const std::vector<std::size_t>& train, double lambda,
                         std::span<const CurveType> types = kAllCurveTypes);

    // Features of `rows`: scalar block per spec, then for each included curve
    // type the first n_fpcs scores. Rows in models.train_rows use their
    // training scores; all others are projected from their grid samples.
    FeatureMatrix build(const FeatureSetSpec& spec, const FunctionalModels& models,
                        const std::vector<std::size_t>& rows) const;

private:
    FeatureConfig config_;
    std::vector<double> grid_;
    BasisPtr basis_;
    std::vector<std::string> ids_;
    std::vector<ClassIndex> labels_;
    Eigen::MatrixXd scalars_;
    std::map<CurveType, Eigen::MatrixXd> samples_;
    std::map<std::pair<CurveType, double>, Eigen::MatrixXd> coefs_;
    std::unique_ptr<std::mutex> mutex_;
};

struct AssembledFeatures {
    FeatureMatrix train;
    FeatureMatrix test;
    FunctionalModels models;
};

// FPCA fitted on split.train only; test rows projected.
AssembledFeatures assemble(FeatureBuilder& builder, const FeatureSetSpec& spec, const Split& split);

void write_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path);
// JSON manifest describing a feature matrix: spec, seed, names, row count.
std::string feature_manifest(const FeatureMatrix& m, const FeatureSetSpec& spec, std::uint64_t seed);

ClassIndex class_index(Label label);

}  // namespace fdaclass
