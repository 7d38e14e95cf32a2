#pragma once

#include "fdaclass/poisson.hpp"
#include "fdaclass/smooth.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fdaclass {

enum class Label { exchange, gambling, pools, services_others, darknet };

inline constexpr std::array<Label, 5> kAllLabels = {Label::exchange, Label::gambling, Label::pools,
                                                    Label::services_others, Label::darknet};

std::string_view label_name(Label label);
std::optional<Label> parse_label(std::string_view text);

// Seconds since 1970-01-01T00:00:00Z. Accepts YYYY-MM-DD, optionally followed
// by [T| ]hh:mm[:ss[.fff]] and a Z or +hh:mm / -hh:mm offset. Throws InputError.
double parse_timestamp(std::string_view text);
// Days since the epoch of the UTC calendar date of `text` (time part ignored).
std::int64_t parse_date(std::string_view text);
std::string format_timestamp(double epoch_seconds);

struct Transaction {
    std::string address_id;
    double timestamp = 0.0;  // epoch seconds
    double delta_btc = 0.0;
};

// Calendar day (days since epoch) -> USD per BTC.
using PriceSeries = std::map<std::int64_t, double>;

// Right-continuous accumulated sum: levels[i] holds on [times[i], times[i+1]).
struct StepCurve {
    std::vector<double> times;
    std::vector<double> levels;

    double at(double t) const;
};

// One direction of money flow. `amounts` are positive USD values; `times` are
// hours since first_seen before normalization and in [0, 1] after.
struct Stream {
    std::vector<double> times;
    std::vector<double> amounts;

    std::size_t size() const { return times.size(); }
    bool empty() const { return times.empty(); }
    StepCurve accumulated() const;
    EventTimes events() const { return {times}; }
};

struct AddressRecord {
    std::string address_id;
    Label label = Label::exchange;
    double first_seen = 0.0;  // epoch seconds
    double usd_price = 0.0;   // mean price over the lifespan
    Stream credit;
    Stream debit;
    bool normalized = false;

    std::size_t transaction_count() const { return credit.size() + debit.size(); }
};

struct IngestInputs {
    std::filesystem::path transactions;
    std::filesystem::path prices;
    std::filesystem::path labels;
};

std::vector<Transaction> read_transactions(const std::filesystem::path& path);
PriceSeries read_prices(const std::filesystem::path& path);
std::map<std::string, Label> read_labels(const std::filesystem::path& path);

// Groups by address (records sorted by address_id), values BTC amounts at the
// mean USD price over each address's lifespan and splits credits from debits.
std::vector<AddressRecord> build_records(std::vector<Transaction> transactions, const PriceSeries& prices,
                                         const std::map<std::string, Label>& labels);
std::vector<AddressRecord> ingest(const IngestInputs& inputs);

inline constexpr double kWindowHours = 3000.0;
inline constexpr int kGridPoints = 501;
inline constexpr double kMergeMinutes = 3.0;

// Keeps events with hours <= window_hours and rescales time to [0, 1].
AddressRecord window_and_normalize(const AddressRecord& record, double window_hours = kWindowHours);

std::vector<AddressRecord> filter_min_transactions(std::vector<AddressRecord> records, std::size_t threshold);

std::vector<double> uniform_grid(int points);

struct SmoothingPoints {
    Observation credit;
    Observation debit;
};

// Grid plus event times, near-duplicates merged, values log1p(accumulated USD).
Observation smoothing_points(const Stream& stream, int grid_points, double merge_gap);
SmoothingPoints build_smoothing_points(const AddressRecord& record, int grid_points = kGridPoints,
                                       double merge_minutes = kMergeMinutes, double window_hours = kWindowHours);

enum class CurveType { credit_level, debit_level, credit_derivative, debit_derivative, credit_rate, debit_rate };

inline constexpr std::array<CurveType, 6> kAllCurveTypes = {
    CurveType::credit_level,      CurveType::debit_level, CurveType::credit_derivative,
    CurveType::debit_derivative, CurveType::credit_rate, CurveType::debit_rate};

std::string_view curve_type_name(CurveType type);
std::optional<CurveType> parse_curve_type(std::string_view text);
// Roughness order used when fitting this curve type: 2, 3 or 1.
int curve_penalty_order(CurveType type);

struct CurveBundle {
    AddressRecord record;
    SmoothCurve credit_level;
    SmoothCurve debit_level;
    SmoothCurve credit_derivative;  // order-5 refit; its first derivative is the feature
    SmoothCurve debit_derivative;
    RateFit credit_rate;
    RateFit debit_rate;

    const std::string& address_id() const { return record.address_id; }
    // Level values, first derivatives or intensities on `grid`.
    Eigen::VectorXd sample(CurveType type, std::span<const double> grid) const;
};

struct PipelineConfig {
    double window_hours = kWindowHours;
    int grid_points = kGridPoints;
    double merge_minutes = kMergeMinutes;
    double level_lambda = kLevelLambda;
    double deriv_lambda = kDerivativeLambda;
    double rate_lambda = kRateLambda;
    std::size_t max_knots = 0;  // 0: no cap on interior knots
    int threads = 1;
};

// Interior breakpoints at every smoothing time strictly inside the domain,
// thinned evenly when there are more than max_knots (0 disables the cap).
std::vector<double> knot_policy(std::span<const double> times, std::size_t max_knots);

CurveBundle fit_curves(const AddressRecord& record, const PipelineConfig& config);

struct FitFailure {
    std::string address_id;
    std::string reason;
};

struct FitResult {
    std::vector<CurveBundle> bundles;  // input order, failures removed
    std::vector<FitFailure> failures;
};

FitResult fit_all_curves(const std::vector<AddressRecord>& records, const PipelineConfig& config);

std::string bundle_to_json(const CurveBundle& bundle);
CurveBundle bundle_from_json(std::string_view text);

// File-system safe name for an address id; injective.
std::string bundle_file_name(std::string_view address_id);

}  // namespace fdaclass
