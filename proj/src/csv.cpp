#include "ctxcausal/csv.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctxcausal {

int CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

int CsvTable::require_column(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw std::runtime_error("missing column: " + name);
    return c;
}

namespace {

// Parses one record starting at the current stream position; handles quoted
// fields containing commas, escaped quotes and embedded newlines.
bool read_record(std::istream& in, std::vector<std::string>& out) {
    out.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int ch;
    while ((ch = in.get()) != EOF) {
        any = true;
        const char c = static_cast<char>(ch);
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get();
            break;
        } else {
            field.push_back(c);
        }
    }
    if (!any) return false;
    out.push_back(field);
    return true;
}

}  // namespace

CsvTable read_csv_stream(std::istream& in) {
    CsvTable table;
    std::vector<std::string> record;
    bool have_header = false;
    while (read_record(in, record)) {
        if (!have_header && record.size() == 1 && !record[0].empty() && record[0][0] == '#') {
            table.comments.push_back(record[0].substr(1));
            continue;
        }
        if (record.size() == 1 && record[0].empty()) continue;  // blank line
        if (!have_header) {
            table.header = record;
            have_header = true;
        } else {
            table.rows.push_back(record);
        }
    }
    return table;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return read_csv_stream(in);
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

std::string format_csv(const CsvTable& table) {
    std::ostringstream out;
    for (const auto& c : table.comments) out << '#' << c << '\n';
    auto emit = [&out](const std::vector<std::string>& rec) {
        for (std::size_t i = 0; i < rec.size(); ++i) {
            if (i) out << ',';
            out << csv_escape(rec[i]);
        }
        out << '\n';
    };
    emit(table.header);
    for (const auto& row : table.rows) emit(row);
    return out.str();
}

void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << format_csv(table);
}

}  // namespace ctxcausal
