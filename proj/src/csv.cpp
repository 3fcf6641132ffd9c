#include "tidecal/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tidecal/types.hpp"

namespace tidecal {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_to_string(const CsvTable& t) {
    std::string out;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (c) out += ',';
        out += t.header[c];
    }
    out += '\n';
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size())
            throw config_error("csv: row width does not match header");
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += format_double(row[c]);
        }
        out += '\n';
    }
    return out;
}

CsvTable csv_from_string(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw config_error("csv: empty document");
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) t.header.push_back(cell);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) {
            char* end = nullptr;
            double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str())
                throw config_error("csv: bad number '" + cell + "' at line " + std::to_string(lineno));
            row.push_back(v);
        }
        if (row.size() != t.header.size())
            throw config_error("csv: row width mismatch at line " + std::to_string(lineno));
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_csv(const std::string& path, const CsvTable& t) {
    write_text_file(path, csv_to_string(t));
}

CsvTable read_csv(const std::string& path) {
    return csv_from_string(read_text_file(path));
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw error("cannot open for writing: " + path);
    out << content;
    if (!out) throw error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string file_checksum(const std::string& path) {
    const std::string data = read_text_file(path);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace tidecal
