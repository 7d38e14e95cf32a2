#include "fdaclass/pipeline.hpp"

#include "csv.hpp"
#include "fdaclass/error.hpp"
#include "fdaclass/parallel.hpp"
#include "json_io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace fdaclass {

namespace {

constexpr std::array<std::string_view, 5> kLabelNames = {"exchange", "gambling", "pools", "services_others",
                                                         "darknet"};
constexpr std::array<std::string_view, 6> kCurveNames = {"credit_level",      "debit_level", "credit_derivative",
                                                         "debit_derivative", "credit_rate", "debit_rate"};

// Proleptic Gregorian date to days since 1970-01-01.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y = static_cast<int>(static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2));
}

bool is_leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(std::int64_t y, unsigned m) {
    static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

class Cursor {
public:
    explicit Cursor(std::string_view s) : s_(s) {}

    bool done() const { return pos_ >= s_.size(); }
    char peek() const { return done() ? '\0' : s_[pos_]; }
    bool accept(char c) {
        if (peek() != c) return false;
        ++pos_;
        return true;
    }
    int digits(std::size_t count) {
        int v = 0;
        for (std::size_t i = 0; i < count; ++i) {
            const char c = peek();
            if (c < '0' || c > '9') fail();
            v = v * 10 + (c - '0');
            ++pos_;
        }
        return v;
    }
    [[noreturn]] void fail() const { throw InputError("invalid timestamp '" + std::string(s_) + "'"); }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

std::int64_t parse_day(Cursor& c) {
    const int y = c.digits(4);
    if (!c.accept('-')) c.fail();
    const auto m = static_cast<unsigned>(c.digits(2));
    if (!c.accept('-')) c.fail();
    const auto d = static_cast<unsigned>(c.digits(2));
    if (m < 1 || m > 12 || d < 1 || d > days_in_month(y, m)) c.fail();
    return days_from_civil(y, m, d);
}

std::string format_day(std::int64_t day) {
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    civil_from_days(day, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
    return buf;
}

std::int64_t day_of(double epoch_seconds) { return static_cast<std::int64_t>(std::floor(epoch_seconds / 86400.0)); }

}  // namespace

std::string_view label_name(Label label) { return kLabelNames[static_cast<std::size_t>(label)]; }

std::optional<Label> parse_label(std::string_view text) {
    for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
        if (kLabelNames[i] == text) return static_cast<Label>(i);
    }
    return std::nullopt;
}

double parse_timestamp(std::string_view text) {
    Cursor c(text);
    const std::int64_t day = parse_day(c);
    double seconds = 0.0;
    if (c.accept('T') || c.accept(' ')) {
        const int hh = c.digits(2);
        if (!c.accept(':')) c.fail();
        const int mm = c.digits(2);
        double ss = 0.0;
        if (c.accept(':')) {
            ss = c.digits(2);
            if (c.accept('.')) {
                double scale = 0.1;
                bool any = false;
                while (c.peek() >= '0' && c.peek() <= '9') {
                    ss += scale * c.digits(1);
                    scale *= 0.1;
                    any = true;
                }
                if (!any) c.fail();
            }
        }
        if (hh > 23 || mm > 59 || ss >= 61.0) c.fail();
        seconds = hh * 3600.0 + mm * 60.0 + ss;
        if (c.accept('Z')) {
        } else if (c.peek() == '+' || c.peek() == '-') {
            const int sign = c.accept('+') ? 1 : (c.accept('-'), -1);
            const int oh = c.digits(2);
            c.accept(':');
            const int om = c.digits(2);
            if (oh > 23 || om > 59) c.fail();
            seconds -= sign * (oh * 3600.0 + om * 60.0);
        }
    }
    if (!c.done()) c.fail();
    return static_cast<double>(day) * 86400.0 + seconds;
}

std::int64_t parse_date(std::string_view text) { return day_of(parse_timestamp(text)); }

std::string format_timestamp(double epoch_seconds) {
    const std::int64_t day = day_of(epoch_seconds);
    const double rem = epoch_seconds - static_cast<double>(day) * 86400.0;
    const auto whole = static_cast<int>(std::floor(rem));
    char buf[48];
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", format_day(day).c_str(), whole / 3600, whole / 60 % 60,
                  whole % 60);
    return buf;
}

double StepCurve::at(double t) const {
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return levels[static_cast<std::size_t>(it - times.begin()) - 1];
}

StepCurve Stream::accumulated() const {
    StepCurve out;
    double total = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        total += amounts[i];
        if (!out.times.empty() && out.times.back() == times[i]) {
            out.levels.back() = total;
        } else {
            out.times.push_back(times[i]);
            out.levels.push_back(total);
        }
    }
    return out;
}

std::vector<Transaction> read_transactions(const std::filesystem::path& path) {
    std::vector<Transaction> out;
    detail::for_each_csv_row(path, {"address_id", "timestamp_iso8601", "delta_btc"},
                             [&](const std::vector<std::string_view>& f, std::size_t) {
                                 if (f[0].empty()) throw InputError("empty address_id");
                                 Transaction tx{std::string(f[0]), parse_timestamp(f[1]), detail::parse_real(f[2])};
                                 if (!std::isfinite(tx.delta_btc) || tx.delta_btc == 0.0) {
                                     throw InputError("delta_btc must be finite and nonzero");
                                 }
                                 out.push_back(std::move(tx));
                             });
    return out;
}

PriceSeries read_prices(const std::filesystem::path& path) {
    PriceSeries out;
    detail::for_each_csv_row(path, {"date_iso8601", "usd_per_btc"},
                             [&](const std::vector<std::string_view>& f, std::size_t) {
                                 const std::int64_t day = parse_date(f[0]);
                                 const double price = detail::parse_real(f[1]);
                                 if (!(price > 0.0) || !std::isfinite(price)) {
                                     throw InputError("usd_per_btc must be positive");
                                 }
                                 if (!out.emplace(day, price).second) {
                                     throw InputError("duplicate price date " + std::string(f[0]));
                                 }
                             });
    return out;
}

std::map<std::string, Label> read_labels(const std::filesystem::path& path) {
    std::map<std::string, Label> out;
    detail::for_each_csv_row(path, {"address_id", "label"}, [&](const std::vector<std::string_view>& f, std::size_t) {
        const auto label = parse_label(f[1]);
        if (!label) throw InputError("unknown label '" + std::string(f[1]) + "'");
        const auto [it, inserted] = out.emplace(std::string(f[0]), *label);
        if (!inserted && it->second != *label) {
            throw InputError("conflicting labels for " + std::string(f[0]));
        }
    });
    return out;
}

std::vector<AddressRecord> build_records(std::vector<Transaction> transactions, const PriceSeries& prices,
                                         const std::map<std::string, Label>& labels) {
    if (transactions.empty()) throw InputError("no addresses");
    std::map<std::string, std::vector<Transaction>> groups;
    for (auto& tx : transactions) {
        auto& g = groups[tx.address_id];
        g.push_back(std::move(tx));
    }

    std::vector<AddressRecord> records;
    records.reserve(groups.size());
    for (auto& [id, txs] : groups) {
        const auto label = labels.find(id);
        if (label == labels.end()) throw InputError("address " + id + " has no label");
        const auto by_time = [](const Transaction& a, const Transaction& b) { return a.timestamp < b.timestamp; };
        if (!std::is_sorted(txs.begin(), txs.end(), by_time)) {
            spdlog::warn("transactions of address {} are out of order; sorting", id);
            std::stable_sort(txs.begin(), txs.end(), by_time);
        }

        const std::int64_t first_day = day_of(txs.front().timestamp);
        const std::int64_t last_day = day_of(txs.back().timestamp);
        double price_sum = 0.0;
        for (std::int64_t day = first_day; day <= last_day; ++day) {
            const auto p = prices.find(day);
            if (p == prices.end()) {
                throw InputError("missing price for date " + format_day(day) + " (address " + id + ")");
            }
            price_sum += p->second;
        }

        AddressRecord rec;
        rec.address_id = id;
        rec.label = label->second;
        rec.first_seen = txs.front().timestamp;
        rec.usd_price = price_sum / static_cast<double>(last_day - first_day + 1);
        for (const auto& tx : txs) {
            const double hours = (tx.timestamp - rec.first_seen) / 3600.0;
            Stream& s = tx.delta_btc > 0.0 ? rec.credit : rec.debit;
            s.times.push_back(hours);
            s.amounts.push_back(std::abs(tx.delta_btc) * rec.usd_price);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<AddressRecord> ingest(const IngestInputs& inputs) {
    auto transactions = read_transactions(inputs.transactions);
    const PriceSeries prices = read_prices(inputs.prices);
    const auto labels = read_labels(inputs.labels);
    return build_records(std::move(transactions), prices, labels);
}

AddressRecord window_and_normalize(const AddressRecord& record, double window_hours) {
    if (!(window_hours > 0.0)) throw ConfigError("window_hours must be positive");
    if (record.normalized) throw InputError("record " + record.address_id + " is already normalized");
    AddressRecord out = record;
    out.normalized = true;
    for (Stream* s : {&out.credit, &out.debit}) {
        Stream kept;
        for (std::size_t i = 0; i < s->size(); ++i) {
            if (s->times[i] <= window_hours) {
                kept.times.push_back(s->times[i] / window_hours);
                kept.amounts.push_back(s->amounts[i]);
            }
        }
        *s = std::move(kept);
    }
    return out;
}

std::vector<AddressRecord> filter_min_transactions(std::vector<AddressRecord> records, std::size_t threshold) {
    if (threshold < 1) throw ConfigError("min_transactions must be at least 1");
    std::erase_if(records, [&](const AddressRecord& r) { return r.transaction_count() < threshold; });
    return records;
}

std::vector<double> uniform_grid(int points) {
    if (points < 2) throw ConfigError("grid needs at least two points");
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = static_cast<double>(i) / (points - 1);
    return grid;
}

Observation smoothing_points(const Stream& stream, int grid_points, double merge_gap) {
    std::vector<double> candidates = uniform_grid(grid_points);
    candidates.insert(candidates.end(), stream.times.begin(), stream.times.end());
    std::sort(candidates.begin(), candidates.end());
    const StepCurve steps = stream.accumulated();
    const double end = candidates.back();

    // Each cluster spans less than merge_gap from its first point; it is
    // represented by that first time and the level at its last point. The
    // cluster holding the domain end keeps the end time instead.
    Observation obs;
    std::size_t i = 0;
    while (i < candidates.size()) {
        const double start = candidates[i];
        std::size_t j = i;
        while (j + 1 < candidates.size() && candidates[j + 1] - start < merge_gap) ++j;
        const double last = candidates[j];
        const double t = last == end ? end : start;
        obs.times.push_back(t);
        obs.values.push_back(std::log1p(steps.at(last)));
        i = j + 1;
    }
    return obs;
}

SmoothingPoints build_smoothing_points(const AddressRecord& record, int grid_points, double merge_minutes,
                                       double window_hours) {
    if (!record.normalized) throw InputError("record " + record.address_id + " is not windowed");
    const double gap = merge_minutes / (60.0 * window_hours);
    return {smoothing_points(record.credit, grid_points, gap), smoothing_points(record.debit, grid_points, gap)};
}

std::string_view curve_type_name(CurveType type) { return kCurveNames[static_cast<std::size_t>(type)]; }

std::optional<CurveType> parse_curve_type(std::string_view text) {
    for (std::size_t i = 0; i < kCurveNames.size(); ++i) {
        if (kCurveNames[i] == text) return static_cast<CurveType>(i);
    }
    return std::nullopt;
}

int curve_penalty_order(CurveType type) {
    switch (type) {
        case CurveType::credit_level:
        case CurveType::debit_level:
            return 2;
        case CurveType::credit_derivative:
        case CurveType::debit_derivative:
            return kDerivativePenalty;
        case CurveType::credit_rate:
        case CurveType::debit_rate:
            return 1;
    }
    return 2;
}

Eigen::VectorXd CurveBundle::sample(CurveType type, std::span<const double> grid) const {
    switch (type) {
        case CurveType::credit_level:
            return credit_level.evaluate(grid, 0);
        case CurveType::debit_level:
            return debit_level.evaluate(grid, 0);
        case CurveType::credit_derivative:
            return credit_derivative.evaluate(grid, 1);
        case CurveType::debit_derivative:
            return debit_derivative.evaluate(grid, 1);
        case CurveType::credit_rate:
            return credit_rate.eval(grid);
        case CurveType::debit_rate:
            return debit_rate.eval(grid);
    }
    return {};
}

std::vector<double> knot_policy(std::span<const double> times, std::size_t max_knots) {
    std::vector<double> inner;
    for (std::size_t i = 1; i + 1 < times.size(); ++i) inner.push_back(times[i]);
    if (max_knots == 0 || inner.size() <= max_knots) return inner;
    std::vector<double> thinned(max_knots);
    const double step = static_cast<double>(inner.size() - 1) / static_cast<double>(max_knots > 1 ? max_knots - 1 : 1);
    for (std::size_t k = 0; k < max_knots; ++k) {
        thinned[k] = inner[static_cast<std::size_t>(std::llround(static_cast<double>(k) * step))];
    }
    return thinned;
}

namespace {

struct StreamFits {
    SmoothCurve level;
    SmoothCurve derivative;
    RateFit rate;
};

StreamFits fit_stream(const Observation& obs, const Stream& stream, std::span<const double> grid,
                      const PipelineConfig& config) {
    BasisSpec spec;
    spec.order = 4;
    spec.interior_breakpoints = knot_policy(obs.times, config.max_knots);
    const BasisPtr basis = make_basis(std::move(spec));
    StreamFits out;
    out.level = penalized_fit(obs, basis, config.level_lambda, 2);
    out.derivative = resmooth_for_derivative(out.level, grid, config.deriv_lambda);
    RateOptions options;
    options.penalty_order = 1;
    out.rate = fit_rate(stream.events(), basis, config.rate_lambda, options);
    return out;
}

}  // namespace

CurveBundle fit_curves(const AddressRecord& record, const PipelineConfig& config) {
    const SmoothingPoints pts =
        build_smoothing_points(record, config.grid_points, config.merge_minutes, config.window_hours);
    const std::vector<double> grid = uniform_grid(config.grid_points);
    StreamFits credit = fit_stream(pts.credit, record.credit, grid, config);
    StreamFits debit = fit_stream(pts.debit, record.debit, grid, config);
    for (const RateFit* r : {&credit.rate, &debit.rate}) {
        if (!r->converged) {
            spdlog::warn("rate fit for address {} stopped after {} iterations (gradient norm {:.3g})",
                         record.address_id, r->iterations, r->final_gradient_norm);
        }
    }
    CurveBundle b;
    b.record = record;
    b.credit_level = std::move(credit.level);
    b.debit_level = std::move(debit.level);
    b.credit_derivative = std::move(credit.derivative);
    b.debit_derivative = std::move(debit.derivative);
    b.credit_rate = std::move(credit.rate);
    b.debit_rate = std::move(debit.rate);
    return b;
}

FitResult fit_all_curves(const std::vector<AddressRecord>& records, const PipelineConfig& config) {
    std::vector<std::optional<CurveBundle>> slots(records.size());
    std::vector<std::string> errors(records.size());
    parallel_for(records.size(), config.threads, [&](std::size_t i) {
        try {
            slots[i] = fit_curves(records[i], config);
        } catch (const NumericalError& e) {
            errors[i] = e.what();
        } catch (const InputError& e) {
            errors[i] = e.what();
        }
    });
    FitResult out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (slots[i]) {
            out.bundles.push_back(std::move(*slots[i]));
        } else {
            spdlog::warn("address {} excluded: {}", records[i].address_id, errors[i]);
            out.failures.push_back({records[i].address_id, errors[i]});
        }
    }
    return out;
}

namespace {

detail::json stream_to_json(const Stream& s) { return {{"times", s.times}, {"amounts", s.amounts}}; }

Stream stream_from_json(const detail::json& j) {
    Stream s;
    s.times = detail::member(j, "times").get<std::vector<double>>();
    s.amounts = detail::member(j, "amounts").get<std::vector<double>>();
    if (s.times.size() != s.amounts.size()) throw InputError("stream times and amounts differ in length");
    return s;
}

}  // namespace

std::string bundle_to_json(const CurveBundle& b) {
    const AddressRecord& r = b.record;
    detail::json j = {{"address_id", r.address_id},
                      {"label", label_name(r.label)},
                      {"first_seen", r.first_seen},
                      {"first_seen_iso", format_timestamp(r.first_seen)},
                      {"usd_price", r.usd_price},
                      {"normalized", r.normalized},
                      {"credit", stream_to_json(r.credit)},
                      {"debit", stream_to_json(r.debit)}};
    j["curves"] = {{"credit_level", detail::curve_to_json(b.credit_level)},
                   {"debit_level", detail::curve_to_json(b.debit_level)},
                   {"credit_derivative", detail::curve_to_json(b.credit_derivative)},
                   {"debit_derivative", detail::curve_to_json(b.debit_derivative)},
                   {"credit_rate", detail::rate_to_json(b.credit_rate)},
                   {"debit_rate", detail::rate_to_json(b.debit_rate)}};
    return j.dump() + "\n";
}

CurveBundle bundle_from_json(std::string_view text) {
    detail::json j;
    try {
        j = detail::json::parse(text);
    } catch (const detail::json::exception& e) {
        throw InputError(std::string("bundle is not valid JSON: ") + e.what());
    }
    try {
        CurveBundle b;
        AddressRecord& r = b.record;
        r.address_id = detail::member(j, "address_id").get<std::string>();
        const auto label = parse_label(detail::member(j, "label").get<std::string>());
        if (!label) throw InputError("unknown label");
        r.label = *label;
        r.first_seen = detail::member(j, "first_seen").get<double>();
        r.usd_price = detail::member(j, "usd_price").get<double>();
        r.normalized = detail::member(j, "normalized").get<bool>();
        r.credit = stream_from_json(detail::member(j, "credit"));
        r.debit = stream_from_json(detail::member(j, "debit"));
        const detail::json& c = detail::member(j, "curves");
        b.credit_level = detail::curve_from_json(detail::member(c, "credit_level"));
        b.debit_level = detail::curve_from_json(detail::member(c, "debit_level"));
        b.credit_derivative = detail::curve_from_json(detail::member(c, "credit_derivative"));
        b.debit_derivative = detail::curve_from_json(detail::member(c, "debit_derivative"));
        b.credit_rate = detail::rate_from_json(detail::member(c, "credit_rate"));
        b.debit_rate = detail::rate_from_json(detail::member(c, "debit_rate"));
        return b;
    } catch (const detail::json::exception& e) {
        throw InputError(std::string("malformed bundle: ") + e.what());
    }
}

std::string bundle_file_name(std::string_view address_id) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (const char ch : address_id) {
        const auto c = static_cast<unsigned char>(ch);
        if ((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '-') {
            out.push_back(ch);
        } else {
            out.push_back('_');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 15]);
        }
    }
    return out + ".json";
}

}  // namespace fdaclass
