#pragma once

#include <cstdint>
#include <vector>

namespace fdaclass {

// Class labels are dense integers 0..C-1; C is taken as max + 1.
using ClassIndex = int;

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Row indices keeping min-class-count rows of every present class, drawn
// without replacement. Sorted ascending.
std::vector<std::size_t> undersample_indices(const std::vector<ClassIndex>& labels, std::uint64_t seed);

// Per class, round(n_c * test_fraction) rows go to test. Throws InputError
// when a class has fewer than two rows.
Split stratified_split(const std::vector<ClassIndex>& labels, double test_fraction, std::uint64_t seed);

// Validation folds (each sorted) partitioning the rows; every class is dealt
// round-robin so per-fold class counts differ by at most one.
std::vector<std::vector<std::size_t>> kfold(const std::vector<ClassIndex>& labels, int k, std::uint64_t seed);

// Rows of [0, n) not in `fold` (fold sorted).
std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& fold);

}  // namespace fdaclass
