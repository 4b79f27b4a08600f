#pragma once

#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

namespace hbar::csv {

/// Fixed-format float for CSV cells: deterministic, locale-free, '.'
/// decimal separator, enough digits to round-trip a double.
std::string fmt(double v);
std::string fmt(std::size_t v);

/// A CSV file with the standard preamble: a comment line carrying the
/// config hash and artifact version, then the header row. LF endings.
class Writer {
public:
    Writer(const std::string& path, const std::string& config_hash,
           const std::vector<std::string>& header);

    void row(const std::vector<std::string>& cells);

private:
    std::ofstream out_;
    std::size_t width_;
};

}  // namespace hbar::csv
