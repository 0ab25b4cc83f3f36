#include "csv.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace oppsched::cli {

std::string cell(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{:.9g}", v);
}

std::string cell(std::int64_t v) { return fmt::format("{}", v); }
std::string cell(int v) { return fmt::format("{}", v); }
std::string cell(std::size_t v) { return fmt::format("{}", v); }
std::string cell(bool v) { return v ? "true" : "false"; }

std::string cell(std::string_view v) {
    if (v.find_first_of(",\"\n") == std::string_view::npos) return std::string(v);
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

CsvWriter::CsvWriter(std::ostream& os, const nlohmann::json& manifest, std::vector<std::string> header)
    : os_(os), columns_(header.size()) {
    os_ << "# manifest: " << manifest.dump() << '\n';
    write_row(header);
    rows_ = 0;
}

void CsvWriter::write_row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_)
        throw std::logic_error(fmt::format("csv row has {} cells, header has {}", cells.size(), columns_));
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) os_ << ',';
        os_ << cells[i];
    }
    os_ << '\n';
    ++rows_;
}

}  // namespace oppsched::cli
