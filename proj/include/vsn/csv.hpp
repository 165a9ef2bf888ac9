#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace vsn::csv {

/// Fixed numeric formatting used by every emitted table so reruns are
/// byte-identical.
std::string num(double v);

using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;
};

/// Comma-separated, '\n' line ends; fields containing ',', '"' or a newline
/// are quoted.
void write(const Table& t, const std::filesystem::path& path);
std::string encode(const Table& t);
Table read(const std::filesystem::path& path);
Table decode(const std::string& text);

}  // namespace vsn::csv
