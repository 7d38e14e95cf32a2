#include "config.hpp"

#include "fdaclass/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fdaclass::app {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    if (trim(s).empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(trim(s.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <class T>
T parse_number(std::string_view name, std::string_view text) {
    text = trim(text);
    T v{};
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size()) {
        throw ConfigError("invalid value '" + std::string(text) + "' for " + std::string(name));
    }
    return v;
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T, class F>
std::string join(const std::vector<T>& items, F&& fmt) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += fmt(items[i]);
    }
    return out;
}

struct Field {
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Field number_field(const char* name, T ExperimentConfig::*member) {
    return {[=](ExperimentConfig& c, std::string_view v) { c.*member = parse_number<T>(name, v); },
            [=](const ExperimentConfig& c) {
                if constexpr (std::is_floating_point_v<T>) {
                    return format_real(c.*member);
                } else {
                    return std::to_string(c.*member);
                }
            }};
}

Field path_field(std::filesystem::path ExperimentConfig::*member) {
    return {[=](ExperimentConfig& c, std::string_view v) { c.*member = std::string(trim(v)); },
            [=](const ExperimentConfig& c) { return (c.*member).string(); }};
}

const std::map<std::string, Field, std::less<>>& fields() {
    static const std::map<std::string, Field, std::less<>> f = {
        {"transactions", path_field(&ExperimentConfig::transactions)},
        {"prices", path_field(&ExperimentConfig::prices)},
        {"labels", path_field(&ExperimentConfig::labels)},
        {"workdir", path_field(&ExperimentConfig::workdir)},
        {"window_hours", number_field("window_hours", &ExperimentConfig::window_hours)},
        {"grid_points", number_field("grid_points", &ExperimentConfig::grid_points)},
        {"merge_minutes", number_field("merge_minutes", &ExperimentConfig::merge_minutes)},
        {"min_transactions", number_field("min_transactions", &ExperimentConfig::min_transactions)},
        {"level_lambda", number_field("level_lambda", &ExperimentConfig::level_lambda)},
        {"deriv_lambda", number_field("deriv_lambda", &ExperimentConfig::deriv_lambda)},
        {"rate_lambda", number_field("rate_lambda", &ExperimentConfig::rate_lambda)},
        {"max_knots", number_field("max_knots", &ExperimentConfig::max_knots)},
        {"resmooth_lambdas",
         {[](ExperimentConfig& c, std::string_view v) {
              c.resmooth_lambdas.clear();
              for (auto item : split_list(v)) c.resmooth_lambdas.push_back(parse_number<double>("resmooth_lambdas", item));
          },
          [](const ExperimentConfig& c) { return join(c.resmooth_lambdas, format_real); }}},
        {"n_fpcs_grid",
         {[](ExperimentConfig& c, std::string_view v) {
              c.n_fpcs_grid.clear();
              for (auto item : split_list(v)) c.n_fpcs_grid.push_back(parse_number<int>("n_fpcs_grid", item));
          },
          [](const ExperimentConfig& c) { return join(c.n_fpcs_grid, [](int n) { return std::to_string(n); }); }}},
        {"feature_sets",
         {[](ExperimentConfig& c, std::string_view v) {
              c.feature_sets.clear();
              for (auto item : split_list(v)) {
                  const auto s = parse_feature_set(item);
                  if (!s) throw ConfigError("unknown feature set '" + std::string(item) + "'");
                  c.feature_sets.push_back(*s);
              }
          },
          [](const ExperimentConfig& c) {
              return join(c.feature_sets, [](FeatureSet s) { return std::string(feature_set_name(s)); });
          }}},
        {"algorithms",
         {[](ExperimentConfig& c, std::string_view v) {
              c.algorithms.clear();
              for (auto item : split_list(v)) {
                  const auto a = parse_algorithm(item);
                  if (!a) throw ConfigError("unknown algorithm '" + std::string(item) + "'");
                  c.algorithms.push_back(*a);
              }
          },
          [](const ExperimentConfig& c) {
              return join(c.algorithms, [](Algorithm a) { return std::string(algorithm_name(a)); });
          }}},
        {"test_fraction", number_field("test_fraction", &ExperimentConfig::test_fraction)},
        {"cv_folds", number_field("cv_folds", &ExperimentConfig::cv_folds)},
        {"seed", number_field("seed", &ExperimentConfig::seed)},
        {"n_trees", number_field("n_trees", &ExperimentConfig::n_trees)},
        {"logit_l2", number_field("logit_l2", &ExperimentConfig::logit_l2)},
    };
    return f;
}

const Field& field(std::string_view name) {
    const auto it = fields().find(name);
    if (it == fields().end()) throw ConfigError("unknown configuration key '" + std::string(name) + "'");
    return it->second;
}

}  // namespace

const std::vector<std::string>& config_fields() {
    static const std::vector<std::string> order = {
        "transactions",  "prices",        "labels",       "workdir",          "window_hours",
        "grid_points",   "merge_minutes", "min_transactions", "level_lambda", "deriv_lambda",
        "rate_lambda",   "max_knots",     "resmooth_lambdas", "n_fpcs_grid",  "feature_sets",
        "algorithms",    "test_fraction", "cv_folds",     "seed",             "n_trees",
        "logit_l2",
    };
    return order;
}

void set_field(ExperimentConfig& config, std::string_view name, std::string_view value) {
    field(name).set(config, value);
}

std::string get_field(const ExperimentConfig& config, std::string_view name) { return field(name).get(config); }

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig c;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view s = line;
        if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        try {
            set_field(c, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string emit_config(const ExperimentConfig& config) {
    std::string out = "# fdaclass experiment configuration\n";
    for (const auto& name : config_fields()) out += name + " = " + get_field(config, name) + "\n";
    return out;
}

void validate(const ExperimentConfig& c) {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(what);
    };
    require(c.window_hours > 0.0, "window_hours must be positive");
    require(c.grid_points >= 2, "grid_points must be at least 2");
    require(c.merge_minutes >= 0.0, "merge_minutes must be non-negative");
    require(c.min_transactions >= 1, "min_transactions must be at least 1");
    require(c.level_lambda >= 0.0 && c.deriv_lambda >= 0.0 && c.rate_lambda >= 0.0,
            "smoothing parameters must be non-negative");
    require(c.max_knots >= 0, "max_knots must be non-negative");
    require(!c.resmooth_lambdas.empty(), "resmooth_lambdas must not be empty");
    for (double l : c.resmooth_lambdas) require(l >= 0.0 && std::isfinite(l), "resmooth_lambdas must be >= 0");
    require(!c.n_fpcs_grid.empty(), "n_fpcs_grid must not be empty");
    for (int n : c.n_fpcs_grid) require(n >= 1, "n_fpcs_grid entries must be positive");
    require(!c.feature_sets.empty(), "feature_sets must not be empty");
    require(!c.algorithms.empty(), "algorithms must not be empty");
    require(c.test_fraction > 0.0 && c.test_fraction < 1.0, "test_fraction must be in (0, 1)");
    require(c.cv_folds >= 2, "cv_folds must be at least 2");
    require(c.n_trees >= 1, "n_trees must be positive");
    require(c.logit_l2 >= 0.0, "logit_l2 must be non-negative");
}

PipelineConfig pipeline_config(const ExperimentConfig& c, int threads) {
    PipelineConfig p;
    p.window_hours = c.window_hours;
    p.grid_points = c.grid_points;
    p.merge_minutes = c.merge_minutes;
    p.level_lambda = c.level_lambda;
    p.deriv_lambda = c.deriv_lambda;
    p.rate_lambda = c.rate_lambda;
    p.max_knots = static_cast<std::size_t>(c.max_knots);
    p.threads = threads;
    return p;
}

}  // namespace fdaclass::app
