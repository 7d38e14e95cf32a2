#include "commands.hpp"

#include "fdaclass/error.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace fdaclass::app {

namespace {

using nlohmann::json;

// Re-raises library errors with the pipeline stage prepended, keeping the
// error category (and so the exit code).
template <class F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
    const std::string prefix = std::string(name) + ": ";
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(prefix + e.what());
    } catch (const InputError& e) {
        throw InputError(prefix + e.what());
    }
}

std::string real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Shortest text that round-trips; used in file names.
std::string short_real(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, end) : real(v);
}

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InputError("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write " + p.string());
    out << text;
    if (!out) throw InputError("write failed for " + p.string());
}

void require_path(const std::filesystem::path& p, const char* field) {
    if (p.empty()) throw ConfigError(std::string(field) + " is not set");
}

json config_json(const ExperimentConfig& c) {
    json j = json::object();
    for (const auto& name : config_fields()) j[name] = get_field(c, name);
    return j;
}

// Scalar-only sets ignore n_fpcs and lambda; keep one cell per algorithm.
std::vector<GridCell> collapse_scalar_cells(const std::vector<GridCell>& cells) {
    std::vector<GridCell> out;
    std::set<std::pair<FeatureSet, Algorithm>> seen;
    for (const GridCell& c : cells) {
        if (curve_types(c.spec.set).empty() && !seen.insert({c.spec.set, c.algorithm}).second) continue;
        out.push_back(c);
    }
    return out;
}

const CellResult* find_result(const std::vector<CellResult>& ranked, FeatureSet set, int n_fpcs, double lambda,
                              Algorithm a) {
    const bool scalar = curve_types(set).empty();
    for (const CellResult& r : ranked) {
        if (r.cell.spec.set != set || r.cell.algorithm != a) continue;
        if (scalar || (r.cell.spec.n_fpcs == n_fpcs && r.cell.spec.resmooth_lambda == lambda)) return &r;
    }
    return nullptr;
}

CurveType parse_curve_type_or_throw(const std::string& s) {
    const auto t = parse_curve_type(s);
    if (!t) throw ConfigError("unknown curve type '" + s + "'");
    return *t;
}

}  // namespace

std::filesystem::path fpca_model_path(const Workdir& w, CurveType type, double lambda) {
    return w.models() / "fpca" / (std::string(curve_type_name(type)) + "_lambda" + short_real(lambda) + ".json");
}

IngestSummary cmd_ingest(const ExperimentConfig& config, bool force, int threads) {
    validate(config);
    require_path(config.transactions, "transactions");
    require_path(config.prices, "prices");
    require_path(config.labels, "labels");
    const Workdir w{config.workdir};
    if (std::filesystem::exists(w.bundles()) && !std::filesystem::is_empty(w.bundles())) {
        if (!force) {
            throw ConfigError("bundle store " + w.bundles().string() + " already exists; pass --force to overwrite");
        }
        std::filesystem::remove_all(w.bundles());
    }

    std::vector<AddressRecord> records =
        stage("ingest", [&] { return ingest({config.transactions, config.prices, config.labels}); });
    IngestSummary summary;
    summary.addresses = records.size();
    for (auto& r : records) r = stage("window", [&] { return window_and_normalize(r, config.window_hours); });
    records = filter_min_transactions(std::move(records), static_cast<std::size_t>(config.min_transactions));
    summary.below_threshold = summary.addresses - records.size();
    if (records.empty()) {
        throw InputError("window: no address has at least " + std::to_string(config.min_transactions) +
                         " transactions");
    }
    spdlog::info("{} addresses, {} kept at threshold {}", summary.addresses, records.size(), config.min_transactions);

    FitResult fit = stage("curves", [&] { return fit_all_curves(records, pipeline_config(config, threads)); });
    summary.failures = fit.failures.size();
    if (fit.bundles.empty()) throw NumericalError("curves: every address failed to fit");

    std::filesystem::create_directories(w.bundles());
    for (Label l : kAllLabels) summary.per_class[std::string(label_name(l))] = 0;
    json files = json::array();
    for (const CurveBundle& b : fit.bundles) {
        const std::string name = bundle_file_name(b.address_id());
        write_text(w.bundles() / name, bundle_to_json(b));
        files.push_back(name);
        ++summary.per_class[std::string(label_name(b.record.label))];
    }
    json failures = json::array();
    for (const FitFailure& f : fit.failures) failures.push_back({{"address_id", f.address_id}, {"reason", f.reason}});
    const json manifest = {{"addresses", summary.addresses},
                           {"below_threshold", summary.below_threshold},
                           {"bundles", files},
                           {"failures", failures},
                           {"per_class", summary.per_class},
                           {"config", config_json(config)}};
    write_text(w.bundles() / "manifest.json", manifest.dump(2) + "\n");
    write_text(w.root / "config.txt", emit_config(config));
    return summary;
}

std::vector<CurveBundle> load_bundles(const Workdir& w) {
    const auto manifest_path = w.bundles() / "manifest.json";
    if (!std::filesystem::exists(manifest_path)) {
        throw InputError("no bundle store at " + w.bundles().string() + "; run ingest first");
    }
    json manifest;
    try {
        manifest = json::parse(read_text(manifest_path));
    } catch (const json::exception& e) {
        throw InputError("malformed " + manifest_path.string() + ": " + e.what());
    }
    if (!manifest.contains("bundles") || !manifest["bundles"].is_array()) {
        throw InputError(manifest_path.string() + " lists no bundles");
    }
    std::vector<CurveBundle> out;
    for (const auto& name : manifest["bundles"]) {
        const auto path = w.bundles() / name.get<std::string>();
        try {
            out.push_back(bundle_from_json(read_text(path)));
        } catch (const InputError& e) {
            throw InputError(path.string() + ": " + e.what());
        }
    }
    if (out.empty()) throw InputError("bundle store is empty");
    return out;
}

RunSummary cmd_run(const ExperimentConfig& config, int threads) {
    validate(config);
    const Workdir w{config.workdir};
    const std::vector<CurveBundle> bundles = stage("load", [&] { return load_bundles(w); });

    FeatureConfig fc;
    fc.grid_points = config.grid_points;
    fc.max_fpcs = *std::max_element(config.n_fpcs_grid.begin(), config.n_fpcs_grid.end());
    fc.threads = threads;
    FeatureBuilder builder = stage("features", [&] { return FeatureBuilder(bundles, fc); });

    const std::vector<std::size_t> kept = undersample_indices(builder.labels(), config.seed);
    std::vector<ClassIndex> kept_labels;
    for (std::size_t r : kept) kept_labels.push_back(builder.labels()[r]);
    const Split local = stage("split", [&] { return stratified_split(kept_labels, config.test_fraction, config.seed); });
    Split split;
    for (std::size_t i : local.train) split.train.push_back(kept[i]);
    for (std::size_t i : local.test) split.test.push_back(kept[i]);
    spdlog::info("{} addresses, {} after undersampling: {} train, {} test", builder.size(), kept.size(),
                 split.train.size(), split.test.size());

    const std::vector<GridCell> cells = collapse_scalar_cells(
        enumerate_grid(config.feature_sets, config.n_fpcs_grid, config.resmooth_lambdas, config.algorithms));
    GridSearchOptions opts;
    opts.folds = config.cv_folds;
    opts.seed = config.seed;
    opts.train.logit.l2 = config.logit_l2;
    opts.train.forest.n_trees = config.n_trees;
    opts.train.forest.seed = config.seed;
    opts.train.forest.threads = threads;
    spdlog::info("grid search over {} cells, {} folds", cells.size(), opts.folds);
    GridSearchResult g = stage("grid_search", [&] { return grid_search(builder, split, cells, opts); });

    std::filesystem::create_directories(w.reports());
    std::filesystem::create_directories(w.models() / "fpca");

    // FPCA on the whole training pool, per lambda: model files and the
    // explained-variance curves.
    std::map<double, FunctionalModels> pool_models;
    for (double lam : config.resmooth_lambdas) {
        pool_models.emplace(lam, stage("fpca", [&] { return builder.fit(split.train, lam); }));
        for (const auto& [type, model] : pool_models.at(lam).models) {
            write_text(fpca_model_path(w, type, lam), fpca_to_json(model));
        }
    }
    {
        std::string ev = "curve_type,resmooth_lambda,n_fpcs,explained_variance\n";
        for (const auto& [lam, fm] : pool_models) {
            for (const auto& [type, model] : fm.models) {
                for (Eigen::Index n = 1; n <= model.n_components(); ++n) {
                    ev += std::string(curve_type_name(type)) + "," + real(lam) + "," + std::to_string(n) + "," +
                          real(explained_variance(model, n)) + "\n";
                }
            }
        }
        write_text(w.reports() / "explained_variance.csv", ev);

        std::string av = "feature_set,algorithm,resmooth_lambda,n_fpcs,explained_variance,mean_cv_accuracy\n";
        for (const CellResult& r : g.ranked) {
            const auto types = curve_types(r.cell.spec.set);
            if (types.empty()) continue;
            const auto& fm = pool_models.at(r.cell.spec.resmooth_lambda);
            double sum = 0.0;
            for (CurveType t : types) sum += explained_variance(fm.models.at(t), r.cell.spec.n_fpcs);
            av += std::string(feature_set_name(r.cell.spec.set)) + "," + std::string(algorithm_name(r.cell.algorithm)) +
                  "," + real(r.cell.spec.resmooth_lambda) + "," + std::to_string(r.cell.spec.n_fpcs) + "," +
                  real(sum / static_cast<double>(types.size())) + "," + real(r.mean_accuracy) + "\n";
        }
        write_text(w.reports() / "accuracy_vs_variance.csv", av);
    }

    write_grid_csv(g.ranked, w.reports() / "grid.csv");
    write_text(w.reports() / "grid.json", grid_to_json(g.ranked));
    for (Algorithm a : config.algorithms) {
        std::string t = "feature_set,resmooth_lambda";
        for (int n : config.n_fpcs_grid) t += ",fpc" + std::to_string(n);
        t += "\n";
        for (FeatureSet s : config.feature_sets) {
            for (double lam : config.resmooth_lambdas) {
                t += std::string(feature_set_name(s)) + "," + real(lam);
                for (int n : config.n_fpcs_grid) {
                    const CellResult* r = find_result(g.ranked, s, n, lam, a);
                    t += "," + (r ? real(r->mean_accuracy) : std::string());
                }
                t += "\n";
            }
        }
        write_text(w.reports() / ("accuracy_" + std::string(algorithm_name(a)) + ".csv"), t);
    }

    write_text(w.reports() / "test_report.json", report_to_json(g.test_report));
    write_confusion_csv(g.test_report, w.reports() / "confusion.csv");
    {
        std::string pc = "label,accuracy,test_count\n";
        for (std::size_t k = 0; k < g.test_report.per_class_accuracy.size(); ++k) {
            const double v = g.test_report.per_class_accuracy[k];
            pc += std::string(label_name(static_cast<Label>(k))) + "," + (std::isnan(v) ? std::string() : real(v)) + "," +
                  std::to_string(g.test_report.confusion.row(static_cast<Eigen::Index>(k)).sum()) + "\n";
        }
        write_text(w.reports() / "per_class_accuracy.csv", pc);

        std::vector<std::size_t> order(g.test_report.feature_importance.size());
        for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
        const auto& imp = g.test_report.feature_importance;
        const auto& names = g.test_report.feature_names;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return imp[a] > imp[b]; });
        std::string fi = "feature,importance\n";
        for (std::size_t j : order) fi += names[j] + "," + real(imp[j]) + "\n";
        write_text(w.reports() / "feature_importance.csv", fi);
    }
    write_feature_csv(g.test_features, w.reports() / "test_features.csv");
    write_text(w.reports() / "test_features.json", feature_manifest(g.test_features, g.best.spec, config.seed));
    write_text(w.models() / "best_model.json", g.model->to_json());

    json per_class = json::object();
    for (Label l : kAllLabels) {
        per_class[std::string(label_name(l))] =
            std::count(kept_labels.begin(), kept_labels.end(), class_index(l));
    }
    const json run = {{"config", config_json(config)},
                      {"addresses", builder.size()},
                      {"undersampled_per_class", per_class},
                      {"train_rows", split.train.size()},
                      {"test_rows", split.test.size()},
                      {"cells", cells.size()},
                      {"best_cell", g.best.key()},
                      {"best_mean_cv_accuracy", g.ranked.front().mean_accuracy},
                      {"test_accuracy", g.test_report.accuracy}};
    write_text(w.reports() / "run.json", run.dump(2) + "\n");

    RunSummary s;
    s.ranked = std::move(g.ranked);
    s.best = g.best;
    s.test_report = std::move(g.test_report);
    s.train_rows = split.train.size();
    s.test_rows = split.test.size();
    return s;
}

std::filesystem::path cmd_plotdata(const ExperimentConfig& config, const PlotRequest& req) {
    validate(config);
    const Workdir w{config.workdir};
    const std::vector<double> grid = uniform_grid(config.grid_points);
    std::string body = "id,t,value,series\n";
    std::filesystem::path out;

    auto emit = [&](const std::string& id, const std::string& series, const Eigen::VectorXd& v) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            body += id + "," + real(grid[i]) + "," + real(v[static_cast<Eigen::Index>(i)]) + "," + series + "\n";
        }
    };

    if (req.kind == "fpca_modes") {
        const CurveType type = parse_curve_type_or_throw(req.curve_type);
        const double lam = req.lambda.value_or(config.resmooth_lambdas.front());
        const auto path = fpca_model_path(w, type, lam);
        if (!std::filesystem::exists(path)) throw InputError("no FPCA model at " + path.string() + "; run first");
        const FpcaModel model = fpca_from_json(read_text(path));
        if (req.component < 1 || req.component > model.n_components()) {
            throw ConfigError("component must be in [1, " + std::to_string(model.n_components()) + "]");
        }
        const Eigen::Index j = req.component - 1;
        const Eigen::VectorXd mean = model.mean(grid);
        const Eigen::VectorXd xi = model.eigenfunction(j, grid);
        const double sd = std::sqrt(model.eigenvalues[j]);
        const std::string id = "component" + std::to_string(req.component);
        emit(id, "mean", mean);
        emit(id, "mean_plus", mean + sd * xi);
        emit(id, "mean_minus", mean - sd * xi);
        out = w.plotdata() / ("fpca_modes_" + req.curve_type + "_c" + std::to_string(req.component) + "_lambda" +
                              short_real(lam) + ".csv");
    } else {
        CurveType type;
        if (req.stream != "credit" && req.stream != "debit") throw ConfigError("stream must be credit or debit");
        const bool credit = req.stream == "credit";
        if (req.kind == "steps" || req.kind == "smoothed") {
            type = credit ? CurveType::credit_level : CurveType::debit_level;
        } else if (req.kind == "derivatives") {
            type = credit ? CurveType::credit_derivative : CurveType::debit_derivative;
        } else if (req.kind == "rates") {
            type = credit ? CurveType::credit_rate : CurveType::debit_rate;
        } else {
            throw ConfigError("unknown plot kind '" + req.kind + "'");
        }
        std::optional<Label> label;
        if (req.label) {
            label = parse_label(*req.label);
            if (!label) throw ConfigError("unknown label '" + *req.label + "'");
        }
        const std::vector<CurveBundle> bundles = stage("load", [&] { return load_bundles(w); });
        std::size_t matched = 0;
        for (const CurveBundle& b : bundles) {
            if (req.address && b.address_id() != *req.address) continue;
            if (label && b.record.label != *label) continue;
            ++matched;
            if (req.kind == "steps") {
                const StepCurve step = (credit ? b.record.credit : b.record.debit).accumulated();
                Eigen::VectorXd v(static_cast<Eigen::Index>(grid.size()));
                for (std::size_t i = 0; i < grid.size(); ++i) v[static_cast<Eigen::Index>(i)] = std::log1p(step.at(grid[i]));
                emit(b.address_id(), req.stream + "_step", v);
            } else {
                emit(b.address_id(), std::string(curve_type_name(type)), b.sample(type, grid));
            }
        }
        if (matched == 0) throw InputError("no bundle matches the requested address or label");
        std::string name = req.kind + "_" + req.stream;
        if (req.address) {
            std::string file = bundle_file_name(*req.address);
            name += "_" + file.substr(0, file.size() - 5);
        } else if (req.label) {
            name += "_" + *req.label;
        }
        out = w.plotdata() / (name + ".csv");
    }
    std::filesystem::create_directories(w.plotdata());
    write_text(out, body);
    return out;
}

std::string cmd_fpca_inspect(const ExperimentConfig& config, const std::optional<std::string>& curve_type,
                             const std::optional<double>& lambda) {
    validate(config);
    const Workdir w{config.workdir};
    std::vector<CurveType> types(kAllCurveTypes.begin(), kAllCurveTypes.end());
    if (curve_type) types = {parse_curve_type_or_throw(*curve_type)};
    std::vector<double> lambdas = config.resmooth_lambdas;
    if (lambda) lambdas = {*lambda};
    std::string out = "curve_type,resmooth_lambda,component,eigenvalue,cumulative_explained_variance\n";
    for (double lam : lambdas) {
        for (CurveType t : types) {
            const auto path = fpca_model_path(w, t, lam);
            if (!std::filesystem::exists(path)) throw InputError("no FPCA model at " + path.string() + "; run first");
            const FpcaModel m = fpca_from_json(read_text(path));
            for (Eigen::Index j = 0; j < m.n_components(); ++j) {
                out += std::string(curve_type_name(t)) + "," + real(lam) + "," + std::to_string(j + 1) + "," +
                       real(m.eigenvalues[j]) + "," + real(explained_variance(m, j + 1)) + "\n";
            }
        }
    }
    return out;
}

}  // namespace fdaclass::app
