#pragma once

#include <charconv>
#include <cmath>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace adfe {

/// Shortest round-trip decimal form; NaN becomes an empty (null) cell.
inline std::string format_number(double x) {
    if (std::isnan(x)) return {};
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline std::string format_number(std::optional<double> x) {
    return x ? format_number(*x) : std::string{};
}

/// Minimal RFC-4180 style CSV builder.
class CsvWriter {
public:
    explicit CsvWriter(std::initializer_list<std::string_view> header) {
        std::vector<std::string> h(header.begin(), header.end());
        row(h);
    }
    explicit CsvWriter(const std::vector<std::string>& header) { row(header); }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ += ',';
            append_cell(cells[i]);
        }
        out_ += '\n';
    }

    const std::string& str() const noexcept { return out_; }

private:
    void append_cell(std::string_view cell) {
        if (cell.find_first_of(",\"\n") == std::string_view::npos) {
            out_ += cell;
            return;
        }
        out_ += '"';
        for (char c : cell) {
            if (c == '"') out_ += '"';
            out_ += c;
        }
        out_ += '"';
    }

    std::string out_;
};

}  // namespace adfe
