#include "fdaclass/features.hpp"

#include "fdaclass/error.hpp"
#include "fdaclass/parallel.hpp"
#include "json_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

namespace fdaclass {

namespace {

constexpr std::array<std::string_view, 6> kSetNames = {
    "vector_only",
    "functional_only",
    "vector_plus_functional",
    "vector_plus_constant_rates",
    "vector_plus_functional_rates",
    "vector_plus_derivatives_and_rates",
};

constexpr std::array<std::string_view, 10> kStatNames = {"count",  "sum", "min", "max",           "median",
                                                         "q1",     "q3",  "iqr", "interval_time", "empty"};

constexpr Eigen::Index kScalarBlock = 20;  // 2 streams x (9 statistics + flag)

std::vector<double> stats_values(const StreamStats& s) {
    return {s.count, s.sum, s.min, s.max, s.median, s.q1, s.q3, s.iqr, s.interval_time, s.empty ? 1.0 : 0.0};
}

}  // namespace

double quantile_type7(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw InputError("quantile of empty data");
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("quantile probability outside [0, 1]");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

StreamStats stream_stats(const Stream& stream) {
    StreamStats s;
    if (stream.empty()) return s;
    std::vector<double> x = stream.amounts;
    std::sort(x.begin(), x.end());
    s.empty = false;
    s.count = static_cast<double>(x.size());
    for (double v : x) s.sum += v;
    s.min = x.front();
    s.max = x.back();
    s.median = quantile_type7(x, 0.5);
    s.q1 = quantile_type7(x, 0.25);
    s.q3 = quantile_type7(x, 0.75);
    s.iqr = s.q3 - s.q1;
    const auto [lo, hi] = std::minmax_element(stream.times.begin(), stream.times.end());
    s.interval_time = *hi - *lo;
    return s;
}

ScalarFeatures scalar_features(const AddressRecord& record, double interval_floor) {
    if (!record.normalized) throw InputError("scalar features need a windowed record");
    ScalarFeatures f;
    f.credit = stream_stats(record.credit);
    f.debit = stream_stats(record.debit);
    f.credit_constant_rate = f.credit.count / std::max(f.credit.interval_time, interval_floor);
    f.debit_constant_rate = f.debit.count / std::max(f.debit.interval_time, interval_floor);
    return f;
}

std::vector<std::string> scalar_feature_names() {
    std::vector<std::string> names;
    for (const char* stream : {"credit", "debit"}) {
        for (std::string_view stat : kStatNames) names.push_back(std::string(stream) + "_" + std::string(stat));
    }
    names.emplace_back("credit_constant_rate");
    names.emplace_back("debit_constant_rate");
    return names;
}

std::vector<double> scalar_feature_values(const ScalarFeatures& f) {
    std::vector<double> out = stats_values(f.credit);
    const std::vector<double> d = stats_values(f.debit);
    out.insert(out.end(), d.begin(), d.end());
    out.push_back(f.credit_constant_rate);
    out.push_back(f.debit_constant_rate);
    return out;
}

std::string_view feature_set_name(FeatureSet set) { return kSetNames[static_cast<std::size_t>(set)]; }

std::optional<FeatureSet> parse_feature_set(std::string_view text) {
    for (std::size_t i = 0; i < kSetNames.size(); ++i) {
        if (kSetNames[i] == text) return static_cast<FeatureSet>(i);
    }
    return std::nullopt;
}

bool uses_scalars(FeatureSet set) { return set != FeatureSet::functional_only; }

bool uses_constant_rates(FeatureSet set) { return set == FeatureSet::vector_plus_constant_rates; }

std::vector<CurveType> curve_types(FeatureSet set) {
    switch (set) {
        case FeatureSet::vector_only:
        case FeatureSet::vector_plus_constant_rates:
            return {};
        case FeatureSet::functional_only:
        case FeatureSet::vector_plus_functional:
            return {kAllCurveTypes.begin(), kAllCurveTypes.end()};
        case FeatureSet::vector_plus_functional_rates:
            return {CurveType::credit_rate, CurveType::debit_rate};
        case FeatureSet::vector_plus_derivatives_and_rates:
            return {CurveType::credit_derivative, CurveType::debit_derivative, CurveType::credit_rate,
                    CurveType::debit_rate};
    }
    return {};
}

std::size_t column_count(const FeatureSetSpec& spec) {
    std::size_t n = 0;
    if (uses_scalars(spec.set)) n += kScalarBlock;
    if (uses_constant_rates(spec.set)) n += 2;
    return n + curve_types(spec.set).size() * static_cast<std::size_t>(spec.n_fpcs);
}

FeatureMatrix drop_columns_with_suffix(const FeatureMatrix& m, std::string_view suffix) {
    std::vector<Eigen::Index> keep;
    for (std::size_t j = 0; j < m.names.size(); ++j) {
        if (!m.names[j].ends_with(suffix)) keep.push_back(static_cast<Eigen::Index>(j));
    }
    FeatureMatrix out;
    out.labels = m.labels;
    out.row_ids = m.row_ids;
    out.values.resize(m.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
        out.values.col(static_cast<Eigen::Index>(j)) = m.values.col(keep[j]);
        out.names.push_back(m.names[static_cast<std::size_t>(keep[j])]);
    }
    return out;
}

ClassIndex class_index(Label label) { return static_cast<ClassIndex>(label); }

FeatureBuilder::FeatureBuilder(const std::vector<CurveBundle>& bundles, FeatureConfig config)
    : config_(config), mutex_(std::make_unique<std::mutex>()) {
    if (bundles.empty()) throw InputError("no curve bundles to build features from");
    if (config_.common_intervals < 1) throw ConfigError("common_intervals must be positive");
    if (config_.max_fpcs < 1) throw ConfigError("max_fpcs must be positive");
    grid_ = uniform_grid(config_.grid_points);
    basis_ = make_basis(uniform_spec(config_.common_order, config_.common_intervals));

    const auto n = static_cast<Eigen::Index>(bundles.size());
    const auto g = static_cast<Eigen::Index>(grid_.size());
    const double floor = 1.0 / static_cast<double>(config_.grid_points - 1);
    scalars_.resize(n, kScalarBlock + 2);
    for (CurveType t : kAllCurveTypes) samples_[t].resize(n, g);
    ids_.resize(bundles.size());
    labels_.resize(bundles.size());

    parallel_for(bundles.size(), config_.threads, [&](std::size_t i) {
        const CurveBundle& b = bundles[i];
        const auto row = static_cast<Eigen::Index>(i);
        ids_[i] = b.address_id();
        labels_[i] = class_index(b.record.label);
        const std::vector<double> s = scalar_feature_values(scalar_features(b.record, floor));
        for (std::size_t j = 0; j < s.size(); ++j) scalars_(row, static_cast<Eigen::Index>(j)) = s[j];
        for (CurveType t : kAllCurveTypes) samples_.at(t).row(row) = b.sample(t, grid_).transpose();
    });
    if (!scalars_.allFinite()) throw NumericalError("non-finite scalar feature");
    for (const auto& [t, m] : samples_) {
        if (!m.allFinite()) throw NumericalError("non-finite sample of " + std::string(curve_type_name(t)));
    }
}

const Eigen::MatrixXd& FeatureBuilder::samples(CurveType type) const { return samples_.at(type); }

const Eigen::MatrixXd& FeatureBuilder::coefficients(CurveType type, double lambda) {
    std::lock_guard lock(*mutex_);
    const auto key = std::make_pair(type, lambda);
    auto it = coefs_.find(key);
    if (it == coefs_.end()) {
        it = coefs_.emplace(key, fit_rows(grid_, samples_.at(type), basis_, lambda, config_.resmooth_penalty_order))
                 .first;
    }
    return it->second;
}

FunctionalModels FeatureBuilder::fit(const std::vector<std::size_t>& train, double lambda,
                                     std::span<const CurveType> types) {
    if (train.size() < 2) throw InputError("FPCA needs at least two training rows");
    FunctionalModels out;
    out.resmooth_lambda = lambda;
    out.train_rows = train;
    const auto m = static_cast<Eigen::Index>(train.size());
    const Eigen::Index components = std::min<Eigen::Index>({config_.max_fpcs, m - 1, basis_->size()});
    for (CurveType t : types) {
        const Eigen::MatrixXd& all = coefficients(t, lambda);
        CurveSet set{basis_, Eigen::MatrixXd(m, all.cols()), grid_};
        for (Eigen::Index r = 0; r < m; ++r) set.coefs.row(r) = all.row(static_cast<Eigen::Index>(train[r]));
        FpcaModel model = fit_fpca(set, components, curve_penalty_order(t));
        out.train_scores.emplace(t, train_scores(set, model));
        out.models.emplace(t, std::move(model));
    }
    return out;
}

FeatureMatrix FeatureBuilder::build(const FeatureSetSpec& spec, const FunctionalModels& models,
                                    const std::vector<std::size_t>& rows) const {
    if (spec.n_fpcs < 1) throw ConfigError("n_fpcs must be positive");
    const std::vector<CurveType> types = curve_types(spec.set);
    const auto n = static_cast<Eigen::Index>(rows.size());
    FeatureMatrix out;
    out.values.resize(n, static_cast<Eigen::Index>(column_count(spec)));
    for (std::size_t r : rows) {
        if (r >= size()) throw InputError("feature row out of range");
        out.labels.push_back(labels_[r]);
        out.row_ids.push_back(ids_[r]);
    }

    Eigen::Index col = 0;
    const std::vector<std::string> scalar_names = scalar_feature_names();
    if (uses_scalars(spec.set)) {
        for (Eigen::Index j = 0; j < kScalarBlock; ++j, ++col) {
            for (Eigen::Index i = 0; i < n; ++i) out.values(i, col) = scalars_(static_cast<Eigen::Index>(rows[i]), j);
            out.names.push_back(scalar_names[static_cast<std::size_t>(j)]);
        }
    }
    if (uses_constant_rates(spec.set)) {
        for (Eigen::Index j = kScalarBlock; j < kScalarBlock + 2; ++j, ++col) {
            for (Eigen::Index i = 0; i < n; ++i) out.values(i, col) = scalars_(static_cast<Eigen::Index>(rows[i]), j);
            out.names.push_back(scalar_names[static_cast<std::size_t>(j)]);
        }
    }
    if (types.empty()) return out;

    if (models.resmooth_lambda != spec.resmooth_lambda) {
        throw InputError("functional models were fitted with a different re-smoothing parameter");
    }
    std::unordered_map<std::size_t, Eigen::Index> train_pos;
    for (std::size_t i = 0; i < models.train_rows.size(); ++i) {
        train_pos.emplace(models.train_rows[i], static_cast<Eigen::Index>(i));
    }
    std::vector<Eigen::Index> held_out;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!train_pos.contains(rows[static_cast<std::size_t>(i)])) held_out.push_back(i);
    }

    for (CurveType t : types) {
        const auto model_it = models.models.find(t);
        if (model_it == models.models.end()) {
            throw InputError("no FPCA model for curve type " + std::string(curve_type_name(t)));
        }
        if (spec.n_fpcs > model_it->second.n_components()) {
            throw InputError("requested " + std::to_string(spec.n_fpcs) + " FPCs but the " +
                             std::string(curve_type_name(t)) + " model has " +
                             std::to_string(model_it->second.n_components()));
        }
        const Eigen::Index l = spec.n_fpcs;
        const Eigen::MatrixXd& tr = models.train_scores.at(t);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto it = train_pos.find(rows[static_cast<std::size_t>(i)]);
            if (it != train_pos.end()) out.values.block(i, col, 1, l) = tr.block(it->second, 0, 1, l);
        }
        if (!held_out.empty()) {
            const FpcaModel model = truncate(model_it->second, l);
            const Eigen::MatrixXd& all = samples_.at(t);
            Eigen::MatrixXd y(static_cast<Eigen::Index>(held_out.size()), all.cols());
            for (std::size_t h = 0; h < held_out.size(); ++h) {
                y.row(static_cast<Eigen::Index>(h)) =
                    all.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(held_out[h])]));
            }
            const Eigen::MatrixXd z = project_rows(grid_, y, model, spec.resmooth_lambda);
            for (std::size_t h = 0; h < held_out.size(); ++h) {
                out.values.block(held_out[h], col, 1, l) = z.row(static_cast<Eigen::Index>(h));
            }
        }
        for (Eigen::Index j = 0; j < l; ++j) {
            out.names.push_back(std::string(curve_type_name(t)) + "_fpc" + std::to_string(j + 1));
        }
        col += l;
    }
    if (!out.values.allFinite()) throw NumericalError("non-finite functional feature");
    return out;
}

AssembledFeatures assemble(FeatureBuilder& builder, const FeatureSetSpec& spec, const Split& split) {
    AssembledFeatures out;
    const std::vector<CurveType> types = curve_types(spec.set);
    out.models.resmooth_lambda = spec.resmooth_lambda;
    out.models.train_rows = split.train;
    if (!types.empty()) out.models = builder.fit(split.train, spec.resmooth_lambda, types);
    out.train = builder.build(spec, out.models, split.train);
    out.test = builder.build(spec, out.models, split.test);
    return out;
}

void write_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "address_id,label";
    for (const auto& n : m.names) out << ',' << n;
    out << '\n';
    char buf[32];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto r = static_cast<std::size_t>(i);
        out << (r < m.row_ids.size() ? m.row_ids[r] : std::to_string(r)) << ','
            << label_name(static_cast<Label>(m.labels[r]));
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m.values(i, j));
            out << ',' << buf;
        }
        out << '\n';
    }
}

std::string feature_manifest(const FeatureMatrix& m, const FeatureSetSpec& spec, std::uint64_t seed) {
    detail::json j = {{"feature_set", feature_set_name(spec.set)},
                      {"n_fpcs", spec.n_fpcs},
                      {"resmooth_lambda", spec.resmooth_lambda},
                      {"seed", seed},
                      {"rows", m.rows()},
                      {"columns", m.names}};
    return j.dump(2) + "\n";
}

}  // namespace fdaclass
