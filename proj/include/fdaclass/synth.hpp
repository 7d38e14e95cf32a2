#pragma once

#include "fdaclass/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fdaclass {

// Labeled ledgers whose classes differ in the timing shape of credits and
// debits (not only in counts and amounts), so curve features carry signal
// that summary statistics only partly capture.
struct SynthConfig {
    std::size_t per_class = 120;
    std::uint64_t seed = 1;
    double window_hours = kWindowHours;
    double overflow_fraction = 0.1;  // share of events placed after the window
    std::string start_date = "2014-01-01";
    int span_days = 900;             // first transactions spread over this many days
};

struct SynthData {
    std::vector<Transaction> transactions;
    PriceSeries prices;
    std::map<std::string, Label> labels;
};

SynthData generate_synthetic(const SynthConfig& config);

// Writes transactions.csv, prices.csv and labels.csv into `dir`.
IngestInputs write_synthetic(const SynthData& data, const std::filesystem::path& dir);

}  // namespace fdaclass
