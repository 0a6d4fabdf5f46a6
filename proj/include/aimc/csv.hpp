#ifndef AIMC_CSV_HPP
#define AIMC_CSV_HPP

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace aimc {

/// Quotes a field when it contains a comma, quote, CR or LF; embedded
/// quotes are doubled.
inline std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

/// Shortest round-trip text for a double ("nan", "inf" for non-finite).
inline std::string csv_number(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[40];
    for (int prec = 6; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v)
            break;
    }
    return buf;
}

using CsvCell = std::variant<std::string, double, long long>;

/// Writes "# key=value ..." metadata, a header row and data rows.
class CsvWriter {
public:
    CsvWriter(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& metadata,
              std::vector<std::string> header)
        : os_(os), width_(header.size())
    {
        os_ << '#';
        for (const auto& [k, v] : metadata)
            os_ << ' ' << k << '=' << v;
        os_ << '\n';
        for (std::size_t k = 0; k < header.size(); ++k)
            os_ << (k ? "," : "") << csv_escape(header[k]);
        os_ << '\n';
    }

    void row(const std::vector<CsvCell>& cells)
    {
        if (cells.size() != width_)
            throw std::invalid_argument("CsvWriter: row width does not match the header");
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (k)
                os_ << ',';
            std::visit(
                [this](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, std::string>)
                        os_ << csv_escape(v);
                    else if constexpr (std::is_same_v<T, double>)
                        os_ << csv_number(v);
                    else
                        os_ << v;
                },
                cells[k]);
        }
        os_ << '\n';
    }

private:
    std::ostream& os_;
    std::size_t width_;
};

} // namespace aimc

#endif // AIMC_CSV_HPP
