#pragma once

// CSV output with 17 significant digits, so every double round-trips.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "core.hpp"

namespace electroseis {

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

struct CsvCell {
    std::string text;

    CsvCell(const char* s) : text(csv_quote(s)) {}
    CsvCell(const std::string& s) : text(csv_quote(s)) {}
    CsvCell(bool b) : text(b ? "true" : "false") {}
    template <class T, std::enable_if_t<std::is_floating_point_v<T>, int> = 0>
    CsvCell(T v) : text(format_double(static_cast<double>(v))) {}
    template <class T, std::enable_if_t<std::is_integral_v<T> && !std::is_same_v<T, bool>, int> = 0>
    CsvCell(T v) : text(std::to_string(v)) {}
};

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
        : path_(path), out_(path, std::ios::trunc), columns_(header.size()) {
        if (!out_) throw ValidationError("csv: cannot open '" + path.string() + "' for writing");
        std::vector<CsvCell> h;
        for (const auto& s : header) h.emplace_back(s);
        write(h);
    }

    void row(const std::vector<CsvCell>& cells) {
        if (cells.size() != columns_)
            throw ValidationError("csv: row has " + std::to_string(cells.size()) + " cells, header has " +
                                  std::to_string(columns_));
        write(cells);
    }

    const std::filesystem::path& path() const { return path_; }

private:
    void write(const std::vector<CsvCell>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i].text;
        out_ << '\n';
        if (!out_) throw ValidationError("csv: write to '" + path_.string() + "' failed");
    }

    std::filesystem::path path_;
    std::ofstream out_;
    std::size_t columns_;
};

}  // namespace electroseis
