#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ctxcausal {

// Minimal RFC-4180-style CSV table. Lines starting with '#' before the
// header are treated as metadata comments and preserved on write.
struct CsvTable {
    std::vector<std::string> comments;  // leading '#' lines, without the '#'
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;        // -1 when absent
    int require_column(const std::string& name) const;  // throws when absent
    const std::string& at(std::size_t row, int col) const { return rows[row][col]; }
};

CsvTable read_csv(const std::string& path);
CsvTable read_csv_stream(std::istream& in);

void write_csv(const std::string& path, const CsvTable& table);
std::string format_csv(const CsvTable& table);

std::string csv_escape(const std::string& field);

}  // namespace ctxcausal
