#include "hbar/csv.hpp"

#include "hbar/errors.hpp"

#include <cstdio>

namespace hbar::csv {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string fmt(std::size_t v) { return std::to_string(v); }

Writer::Writer(const std::string& path, const std::string& config_hash,
               const std::vector<std::string>& header)
    : out_(path, std::ios::binary), width_(header.size()) {
    if (!out_) throw ArtifactError("cannot open for writing: " + path);
    out_ << "# config_hash=" << config_hash << " version=1\n";
    row(header);
}

void Writer::row(const std::vector<std::string>& cells) {
    if (cells.size() != width_)
        throw ContractError("csv row has " + std::to_string(cells.size()) +
                            " cells, header has " + std::to_string(width_));
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << cells[i];
    }
    out_ << '\n';
    if (!out_) throw ArtifactError("csv write failed");
}

}  // namespace hbar::csv
