#pragma once

#include "config.hpp"

#include "fdaclass/classify.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fdaclass::app {

// Stable workdir layout.
struct Workdir {
    std::filesystem::path root;

    std::filesystem::path bundles() const { return root / "bundles"; }
    std::filesystem::path models() const { return root / "models"; }
    std::filesystem::path reports() const { return root / "reports"; }
    std::filesystem::path plotdata() const { return root / "plotdata"; }
};

struct IngestSummary {
    std::size_t addresses = 0;          // after ingest, before the threshold
    std::size_t below_threshold = 0;
    std::size_t failures = 0;
    std::map<std::string, std::size_t> per_class;  // written bundles by label
};

// Parses inputs, windows, filters by min_transactions, fits all curves and
// writes bundles/ plus bundles/manifest.json. Refuses to touch an existing
// bundle store unless `force`.
IngestSummary cmd_ingest(const ExperimentConfig& config, bool force, int threads);

struct RunSummary {
    std::vector<CellResult> ranked;
    GridCell best;
    EvalReport test_report;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
};

// undersample -> split -> grid search -> refit best -> reports/ and models/.
RunSummary cmd_run(const ExperimentConfig& config, int threads);

struct PlotRequest {
    std::string kind;                 // steps, smoothed, derivatives, rates, fpca_modes
    std::optional<std::string> address;
    std::optional<std::string> label;
    std::string stream = "credit";    // credit or debit
    std::string curve_type = "credit_level";
    int component = 1;
    std::optional<double> lambda;     // fpca_modes; defaults to the first resmooth lambda
};

// Long-format CSV (id,t,value,series) under plotdata/; returns its path.
std::filesystem::path cmd_plotdata(const ExperimentConfig& config, const PlotRequest& request);

// Eigenvalue table of the stored FPCA models as CSV text.
std::string cmd_fpca_inspect(const ExperimentConfig& config, const std::optional<std::string>& curve_type,
                             const std::optional<double>& lambda);

std::filesystem::path fpca_model_path(const Workdir& w, CurveType type, double lambda);

std::vector<CurveBundle> load_bundles(const Workdir& w);

}  // namespace fdaclass::app
