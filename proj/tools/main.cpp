#include "commands.hpp"
#include "config.hpp"

#include "fdaclass/error.hpp"
#include "fdaclass/parallel.hpp"
#include "fdaclass/synth.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitConfig = 4;

std::string dashed(std::string s) {
    std::replace(s.begin(), s.end(), '_', '-');
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace fdaclass;
    using namespace fdaclass::app;

    CLI::App cli{"Functional-data features and classifiers for labeled address ledgers"};
    cli.require_subcommand(1);
    cli.fallthrough();

    std::string config_path;
    int threads = 1;
    std::string log_level = "info";
    cli.add_option("--config", config_path, "key = value configuration file");
    cli.add_option("--threads", threads, "worker threads (0: all cores); outputs do not depend on it");
    cli.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

    // One flag per configuration field, under its exact name and a dashed alias.
    std::map<std::string, std::string> overrides;
    std::map<std::string, CLI::Option*> flags;
    for (const auto& name : config_fields()) {
        std::string spec = "--" + name;
        if (dashed(name) != name) spec += ",--" + dashed(name);
        if (name == "feature_sets") spec += ",--feature-set";
        if (name == "algorithms") spec += ",--algorithm";
        flags[name] = cli.add_option(spec, overrides[name], "overrides '" + name + "' from --config");
    }

    bool force = false;
    auto* ingest = cli.add_subcommand("ingest", "parse inputs and fit per-address curves into bundles/");
    ingest->add_flag("--force", force, "overwrite an existing bundle store");

    cli.add_subcommand("run", "undersample, split, grid-search and report");

    PlotRequest plot;
    std::string address;
    std::string label;
    double plot_lambda = 0.0;
    auto* plotdata = cli.add_subcommand("plotdata", "emit long-format CSV series for figures");
    plotdata->add_option("--kind", plot.kind, "steps, smoothed, derivatives, rates or fpca_modes")->required();
    auto* address_opt = plotdata->add_option("--address", address, "one address");
    auto* label_opt = plotdata->add_option("--label", label, "all addresses of a label");
    plotdata->add_option("--stream", plot.stream, "credit or debit")->capture_default_str();
    plotdata->add_option("--curve-type", plot.curve_type, "fpca_modes curve type")->capture_default_str();
    plotdata->add_option("--component", plot.component, "fpca_modes component, 1-based")->capture_default_str();
    auto* plot_lambda_opt = plotdata->add_option("--lambda", plot_lambda, "fpca_modes re-smoothing parameter");

    std::string inspect_type;
    double inspect_lambda = 0.0;
    auto* inspect = cli.add_subcommand("fpca-inspect", "eigenvalues and explained variance of stored FPCA models");
    auto* inspect_type_opt = inspect->add_option("--curve-type", inspect_type, "one curve type");
    auto* inspect_lambda_opt = inspect->add_option("--lambda", inspect_lambda, "one re-smoothing parameter");

    std::string synth_out;
    std::size_t per_class = 120;
    auto* synth = cli.add_subcommand("synth", "write a synthetic labeled fixture and a config for it");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--per-class", per_class, "addresses per label")->capture_default_str();

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        const auto level = spdlog::level::from_str(log_level);
        spdlog::set_level(level);
        spdlog::set_default_logger(spdlog::default_logger()->clone("fdaclass"));

        ExperimentConfig config = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        for (const auto& name : config_fields()) {
            if (flags[name]->count() > 0) set_field(config, name, overrides[name]);
        }
        threads = fdaclass::resolve_threads(threads);

        if (ingest->parsed()) {
            const IngestSummary s = cmd_ingest(config, force, threads);
            std::printf("addresses %zu, below threshold %zu, failed fits %zu\n", s.addresses, s.below_threshold,
                        s.failures);
            for (const auto& [name, n] : s.per_class) std::printf("  %s %zu\n", name.c_str(), n);
        } else if (cli.got_subcommand("run")) {
            const RunSummary s = cmd_run(config, threads);
            std::printf("best cell %s: mean CV accuracy %.4f, held-out accuracy %.4f (%zu train, %zu test)\n",
                        s.best.key().c_str(), s.ranked.front().mean_accuracy, s.test_report.accuracy, s.train_rows,
                        s.test_rows);
        } else if (plotdata->parsed()) {
            if (address_opt->count()) plot.address = address;
            if (label_opt->count()) plot.label = label;
            if (plot_lambda_opt->count()) plot.lambda = plot_lambda;
            std::printf("%s\n", cmd_plotdata(config, plot).string().c_str());
        } else if (inspect->parsed()) {
            std::optional<std::string> t;
            std::optional<double> l;
            if (inspect_type_opt->count()) t = inspect_type;
            if (inspect_lambda_opt->count()) l = inspect_lambda;
            std::fputs(cmd_fpca_inspect(config, t, l).c_str(), stdout);
        } else if (synth->parsed()) {
            SynthConfig sc;
            sc.per_class = per_class;
            sc.seed = config.seed;
            sc.window_hours = config.window_hours;
            const IngestInputs in = write_synthetic(generate_synthetic(sc), synth_out);
            ExperimentConfig out = config;
            out.transactions = std::filesystem::absolute(in.transactions);
            out.prices = std::filesystem::absolute(in.prices);
            out.labels = std::filesystem::absolute(in.labels);
            if (flags["workdir"]->count() == 0) out.workdir = std::filesystem::absolute(synth_out) / "work";
            const auto cfg = std::filesystem::path(synth_out) / "config.txt";
            std::FILE* f = std::fopen(cfg.string().c_str(), "wb");
            if (!f) throw InputError("cannot write " + cfg.string());
            const std::string text = emit_config(out);
            std::fwrite(text.data(), 1, text.size(), f);
            std::fclose(f);
            std::printf("%s\n", cfg.string().c_str());
        }
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return kExitConfig;
    } catch (const NumericalError& e) {
        spdlog::error("{}", e.what());
        return kExitNumerical;
    } catch (const InputError& e) {
        spdlog::error("{}", e.what());
        return kExitInput;
    } catch (const std::filesystem::filesystem_error& e) {
        spdlog::error("{}", e.what());
        return kExitInput;
    }
    return 0;
}
