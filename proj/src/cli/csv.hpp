#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace oppsched::cli {

std::string cell(double v);
std::string cell(std::int64_t v);
std::string cell(int v);
std::string cell(std::size_t v);
std::string cell(bool v);
std::string cell(std::string_view v);
inline std::string cell(const char* v) { return cell(std::string_view(v)); }
inline std::string cell(const std::string& v) { return cell(std::string_view(v)); }

/// Writes `# manifest: {...}`, the header row, then rows. Doubles carry nine
/// significant digits; text cells are quoted when they contain a comma.
class CsvWriter {
public:
    CsvWriter(std::ostream& os, const nlohmann::json& manifest, std::vector<std::string> header);

    template <class... T>
    void row(const T&... cells) {
        static_assert(sizeof...(T) > 0);
        write_row({cell(cells)...});
    }

    std::size_t rows() const { return rows_; }

private:
    void write_row(const std::vector<std::string>& cells);

    std::ostream& os_;
    std::size_t columns_;
    std::size_t rows_ = 0;
};

}  // namespace oppsched::cli
