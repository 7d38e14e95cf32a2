#include "fdaclass/synth.hpp"

#include "fdaclass/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace fdaclass {

namespace {

enum class Shape { flat, early, late, bump, bursts };

struct StreamPlan {
    Shape shape;
    double mean_count;
    double log_amount_mu;
    double log_amount_sigma;
};

struct ClassPlan {
    Label label;
    StreamPlan credit;
    StreamPlan debit;
};

// Counts and amount scales overlap across classes; the timing shapes do not.
const std::array<ClassPlan, 5> kPlans = {{
    {Label::exchange, {Shape::flat, 30, 0.0, 1.0}, {Shape::flat, 28, 0.2, 1.0}},
    {Label::gambling, {Shape::early, 30, -0.3, 1.0}, {Shape::early, 22, 0.0, 1.0}},
    {Label::pools, {Shape::bump, 28, 0.0, 1.0}, {Shape::bursts, 28, 0.2, 1.0}},
    {Label::services_others, {Shape::late, 30, 0.3, 1.0}, {Shape::late, 26, 0.3, 1.0}},
    {Label::darknet, {Shape::bursts, 28, 0.3, 1.0}, {Shape::bump, 22, 0.4, 1.0}},
}};

// Per-address draw of a class shape: a density on [0, 1] with a known bound.
struct Density {
    Shape shape;
    double a = 0.0;
    double b = 0.0;
    double width = 0.0;

    double operator()(double t) const {
        switch (shape) {
            case Shape::flat:
                return 1.0;
            case Shape::early:
                return std::exp(-a * t);
            case Shape::late:
                return std::pow(t, a);
            case Shape::bump:
                return std::exp(-0.5 * (t - a) * (t - a) / (width * width));
            case Shape::bursts: {
                const double u = (t - a) / width;
                const double v = (t - b) / width;
                return std::exp(-0.5 * u * u) + std::exp(-0.5 * v * v);
            }
        }
        return 1.0;
    }
    double bound() const { return shape == Shape::bursts ? 2.0 : 1.0; }
};

Density draw_density(Shape shape, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Density d{shape};
    switch (shape) {
        case Shape::flat:
            break;
        case Shape::early:
            d.a = 3.0 + 3.0 * u(rng);
            break;
        case Shape::late:
            d.a = 1.5 + 1.5 * u(rng);
            break;
        case Shape::bump:
            d.a = 0.35 + 0.3 * u(rng);
            d.width = 0.06 + 0.06 * u(rng);
            break;
        case Shape::bursts:
            d.a = 0.1 + 0.2 * u(rng);
            d.b = 0.7 + 0.2 * u(rng);
            d.width = 0.04;
            break;
    }
    return d;
}

std::vector<std::pair<double, double>> draw_stream(const StreamPlan& plan, double overflow, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::lognormal_distribution<double> scale(0.0, 0.3);
    std::lognormal_distribution<double> amount(plan.log_amount_mu, plan.log_amount_sigma);
    const Density density = draw_density(plan.shape, rng);
    std::poisson_distribution<int> count(plan.mean_count * scale(rng));
    const int n = count(rng);
    std::vector<std::pair<double, double>> out;  // (normalized time, USD)
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double t = 0.0;
        if (u(rng) < overflow) {
            t = 1.0 + 0.1 * u(rng);
        } else {
            do {
                t = u(rng);
            } while (u(rng) * density.bound() > density(t));
        }
        out.emplace_back(t, amount(rng));
    }
    return out;
}

}  // namespace

SynthData generate_synthetic(const SynthConfig& config) {
    if (config.per_class == 0) throw ConfigError("per_class must be positive");
    if (!(config.window_hours > 0.0)) throw ConfigError("window_hours must be positive");
    if (config.span_days < 1) throw ConfigError("span_days must be positive");

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> step(0.0, 0.03);

    SynthData data;
    const std::int64_t first_day = parse_date(config.start_date);
    const auto tail_days = static_cast<std::int64_t>(std::ceil(1.1 * config.window_hours / 24.0)) + 2;
    double log_price = std::log(500.0);
    for (std::int64_t day = first_day; day <= first_day + config.span_days + tail_days; ++day) {
        data.prices.emplace(day, std::exp(log_price));
        log_price += step(rng);
    }

    const std::size_t total = config.per_class * kPlans.size();
    for (std::size_t i = 0; i < total; ++i) {
        const ClassPlan& plan = kPlans[i % kPlans.size()];
        char id[32];
        std::snprintf(id, sizeof id, "a%05zu", i);
        data.labels.emplace(id, plan.label);

        const double start = (static_cast<double>(first_day) +
                              std::floor(u(rng) * config.span_days)) * 86400.0 + std::floor(u(rng) * 86400.0);
        auto credits = draw_stream(plan.credit, config.overflow_fraction, rng);
        auto debits = draw_stream(plan.debit, config.overflow_fraction, rng);
        std::lognormal_distribution<double> opening(plan.credit.log_amount_mu, plan.credit.log_amount_sigma);
        credits.emplace_back(0.0, opening(rng));

        struct Pending {
            double seconds;
            double usd;
        };
        std::vector<Pending> rows;
        for (const auto& [t, usd] : credits) rows.push_back({start + std::round(t * config.window_hours * 3600.0), usd});
        for (const auto& [t, usd] : debits) rows.push_back({start + std::round(t * config.window_hours * 3600.0), -usd});
        std::stable_sort(rows.begin(), rows.end(), [](const Pending& a, const Pending& b) { return a.seconds < b.seconds; });

        // BTC amounts are USD divided by the lifespan mean price, which
        // ingest multiplies back.
        const auto day_lo = static_cast<std::int64_t>(std::floor(rows.front().seconds / 86400.0));
        const auto day_hi = static_cast<std::int64_t>(std::floor(rows.back().seconds / 86400.0));
        double price_sum = 0.0;
        for (std::int64_t d = day_lo; d <= day_hi; ++d) price_sum += data.prices.at(d);
        const double mean_price = price_sum / static_cast<double>(day_hi - day_lo + 1);
        for (const Pending& r : rows) data.transactions.push_back({id, r.seconds, r.usd / mean_price});
    }
    return data;
}

IngestInputs write_synthetic(const SynthData& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    IngestInputs paths{dir / "transactions.csv", dir / "prices.csv", dir / "labels.csv"};
    auto open = [](const std::filesystem::path& p) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw InputError("cannot write " + p.string());
        return out;
    };
    char buf[64];
    {
        auto out = open(paths.transactions);
        out << "address_id,timestamp_iso8601,delta_btc\n";
        for (const Transaction& tx : data.transactions) {
            std::snprintf(buf, sizeof buf, "%.17g", tx.delta_btc);
            out << tx.address_id << ',' << format_timestamp(tx.timestamp) << ',' << buf << '\n';
        }
    }
    {
        auto out = open(paths.prices);
        out << "date_iso8601,usd_per_btc\n";
        for (const auto& [day, price] : data.prices) {
            std::snprintf(buf, sizeof buf, "%.17g", price);
            out << format_timestamp(static_cast<double>(day) * 86400.0).substr(0, 10) << ',' << buf << '\n';
        }
    }
    {
        auto out = open(paths.labels);
        out << "address_id,label\n";
        for (const auto& [id, label] : data.labels) out << id << ',' << label_name(label) << '\n';
    }
    return paths;
}

}  // namespace fdaclass
