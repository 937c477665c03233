#pragma once

#include <string>
#include <vector>

#include "netfuse/common.hpp"

namespace netfuse {

// Minimal CSV support for the documented file schemas: UTF-8, comma separated,
// a required header row, no quoting (station ids and dates never contain commas).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::vector<std::string> split_csv_line(const std::string& line);

// Shortest round-trip formatting for doubles so emitted files are reproducible.
std::string format_double(double v);

long parse_long(const std::string& s, const std::string& what);
double parse_double(const std::string& s, const std::string& what);

}  // namespace netfuse
