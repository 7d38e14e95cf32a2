#pragma once

#include "fdaclass/error.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace fdaclass::detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline double parse_real(std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw InputError("not a number: '" + std::string(s) + "'");
    return v;
}

// Streams the data rows of a headed CSV file. fn(fields, line_number) is
// called once per non-blank row; errors it throws are prefixed with file:line.
template <typename Fn>
void for_each_csv_row(const std::filesystem::path& path, const std::vector<std::string_view>& header, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (!have_header) {
            if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
                line.erase(0, 3);
            }
            const auto names = split_fields(line);
            if (names.size() != header.size()) {
                throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected header with " +
                                 std::to_string(header.size()) + " columns");
            }
            for (std::size_t i = 0; i < header.size(); ++i) {
                if (names[i] != header[i]) {
                    throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected column '" +
                                     std::string(header[i]) + "', found '" + std::string(names[i]) + "'");
                }
            }
            have_header = true;
            continue;
        }
        if (fields.size() != header.size()) {
            throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        }
        try {
            fn(fields, line_no);
        } catch (const InputError& e) {
            throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) throw InputError(path.string() + ": missing header");
}

}  // namespace fdaclass::detail
