#ifndef TIDECAL_CSV_HPP
#define TIDECAL_CSV_HPP

#include <string>
#include <vector>

namespace tidecal {

/// Rectangular numeric CSV with one header row. All values are written
/// with %.17g, so a write/read round trip reproduces doubles bit-exactly.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t cols() const { return header.size(); }
};

std::string format_double(double v);

std::string csv_to_string(const CsvTable& t);
CsvTable csv_from_string(const std::string& text);

void write_csv(const std::string& path, const CsvTable& t);
CsvTable read_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

/// FNV-1a 64-bit checksum of a file's bytes, as 16 hex digits.
std::string file_checksum(const std::string& path);

}  // namespace tidecal

#endif
