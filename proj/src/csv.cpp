#include "netfuse/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace netfuse {

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

int CsvTable::column(const std::string& name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    throw SchemaError("missing required column '" + name + "'");
}

CsvTable read_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open file: " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty file: " + path);
    t.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto row = split_csv_line(line);
        if (row.size() != t.header.size())
            throw SchemaError(path + ": row with " + std::to_string(row.size()) +
                              " fields, expected " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows)
{
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file: " + path);
    for (std::size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << row[i];
        out << '\n';
    }
}

std::string format_double(double v)
{
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

long parse_long(const std::string& s, const std::string& what)
{
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (errno != 0 || end == s.c_str() || *end != '\0')
        throw SchemaError("invalid integer '" + s + "' for " + what);
    return v;
}

double parse_double(const std::string& s, const std::string& what)
{
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (errno != 0 || end == s.c_str() || *end != '\0')
        throw SchemaError("invalid number '" + s + "' for " + what);
    return v;
}

}  // namespace netfuse
