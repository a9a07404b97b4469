#ifndef MMV_CSV_HPP
#define MMV_CSV_HPP

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmv {

/// CSV writer with a fixed header row, '.' decimal separator, 17 significant
/// digits, and newline-terminated records, so reruns diff byte for byte.
class CsvWriter {
public:
    CsvWriter(const std::string& path, std::initializer_list<std::string> header)
        : out_(path, std::ios::binary), n_cols_(header.size()) {
        if (!out_) throw std::runtime_error("cannot open for writing: " + path);
        bool first = true;
        for (const auto& name : header) {
            if (!first) out_ << ',';
            out_ << name;
            first = false;
        }
        out_ << '\n';
    }

    static std::string format(double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != n_cols_)
            throw std::logic_error("csv row width does not match the header");
        bool first = true;
        for (const auto& c : cells) {
            if (!first) out_ << ',';
            out_ << c;
            first = false;
        }
        out_ << '\n';
    }

    void row_values(const std::vector<double>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(format(v));
        row(cells);
    }

private:
    std::ofstream out_;
    std::size_t n_cols_;
};

}  // namespace mmv

#endif  // MMV_CSV_HPP
