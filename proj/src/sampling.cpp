#include "fdaclass/sampling.hpp"

#include "fdaclass/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace fdaclass {

namespace {

std::vector<std::vector<std::size_t>> by_class(const std::vector<ClassIndex>& labels) {
    int classes = 0;
    for (ClassIndex c : labels) {
        if (c < 0) throw InputError("negative class index");
        classes = std::max(classes, c + 1);
    }
    std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < labels.size(); ++i) groups[static_cast<std::size_t>(labels[i])].push_back(i);
    return groups;
}

}  // namespace

std::vector<std::size_t> undersample_indices(const std::vector<ClassIndex>& labels, std::uint64_t seed) {
    auto groups = by_class(labels);
    std::size_t smallest = labels.size();
    for (const auto& g : groups) {
        if (!g.empty()) smallest = std::min(smallest, g.size());
    }
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> out;
    for (auto& g : groups) {
        if (g.empty()) continue;
        std::shuffle(g.begin(), g.end(), rng);
        out.insert(out.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(smallest));
    }
    std::sort(out.begin(), out.end());
    return out;
}

Split stratified_split(const std::vector<ClassIndex>& labels, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0, 1)");
    auto groups = by_class(labels);
    std::mt19937_64 rng(seed);
    Split s;
    for (std::size_t c = 0; c < groups.size(); ++c) {
        auto& g = groups[c];
        if (g.empty()) continue;
        if (g.size() < 2) throw InputError("class " + std::to_string(c) + " has fewer than two samples");
        std::shuffle(g.begin(), g.end(), rng);
        auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(g.size()) * test_fraction));
        n_test = std::clamp<std::size_t>(n_test, 1, g.size() - 1);
        s.test.insert(s.test.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(n_test));
        s.train.insert(s.train.end(), g.begin() + static_cast<std::ptrdiff_t>(n_test), g.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

std::vector<std::vector<std::size_t>> kfold(const std::vector<ClassIndex>& labels, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("cv_folds must be at least 2");
    auto groups = by_class(labels);
    for (std::size_t c = 0; c < groups.size(); ++c) {
        if (!groups[c].empty() && groups[c].size() < static_cast<std::size_t>(k)) {
            throw InputError("class " + std::to_string(c) + " has " + std::to_string(groups[c].size()) +
                             " rows, fewer than " + std::to_string(k) + " folds");
        }
    }
    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    std::size_t deal = 0;  // continues across classes so fold sizes also balance
    for (auto& g : groups) {
        std::shuffle(g.begin(), g.end(), rng);
        for (std::size_t i : g) folds[deal++ % folds.size()].push_back(i);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& fold) {
    std::vector<std::size_t> out;
    out.reserve(n - std::min(n, fold.size()));
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (j < fold.size() && fold[j] == i) {
            ++j;
        } else {
            out.push_back(i);
        }
    }
    return out;
}

}  // namespace fdaclass
