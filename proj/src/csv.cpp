#include "vsn/csv.hpp"

#include <cmath>

#include <fmt/format.h>

#include "binary_io.hpp"
#include "vsn/error.hpp"

namespace vsn::csv {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";  // folds -0
    return fmt::format("{:.12g}", v);
}

namespace {
std::string field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}
}  // namespace

std::string encode(const Table& t) {
    std::string out;
    auto line = [&](const Row& r) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) out += ',';
            out += field(r[i]);
        }
        out += '\n';
    };
    line(t.header);
    for (const auto& r : t.rows) line(r);
    return out;
}

void write(const Table& t, const std::filesystem::path& path) { detail::spit(path, encode(t)); }

Table decode(const std::string& text) {
    std::vector<Row> lines;
    Row row;
    std::string cur;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(cur));
            cur.clear();
            any = true;
        } else if (c == '\n') {
            if (any || !cur.empty()) {
                row.push_back(std::move(cur));
                lines.push_back(std::move(row));
            }
            row.clear();
            cur.clear();
            any = false;
        } else if (c != '\r') {
            cur += c;
            any = true;
        }
    }
    if (quoted) throw Error(Errc::MalformedRecord, "unterminated quoted CSV field");
    if (any || !cur.empty()) {
        row.push_back(std::move(cur));
        lines.push_back(std::move(row));
    }
    Table t;
    if (lines.empty()) return t;
    t.header = std::move(lines.front());
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].size() != t.header.size())
            throw Error(Errc::MalformedRecord, fmt::format("CSV row {} has {} fields, header has {}", i + 1,
                                                           lines[i].size(), t.header.size()));
        t.rows.push_back(std::move(lines[i]));
    }
    return t;
}

Table read(const std::filesystem::path& path) { return decode(detail::slurp(path)); }

}  // namespace vsn::csv
