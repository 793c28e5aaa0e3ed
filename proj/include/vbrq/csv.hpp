#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vbrq/matstat.hpp"

namespace vbrq::csv {

/// Shortest representation that parses back to the same double; "nan"/"inf" for non-finite.
std::string format_double(double v);

/// Throws IoError naming `context` on malformed input.
double parse_double(std::string_view s, std::string_view context = {});

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws IoError if absent.
    std::size_t column(std::string_view name) const;
};

Table read(const std::filesystem::path& path);

void write(const std::filesystem::path& path, const Table& table);

/// Row-major names of an n x n matrix: prefix_11, prefix_12, ..., prefix_nn.
std::vector<std::string> matrix_columns(std::string_view prefix, Eigen::Index n);

/// Row-major flattening matching matrix_columns.
std::vector<std::string> flatten(const Matrix& m);

}  // namespace vbrq::csv
