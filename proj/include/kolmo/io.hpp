// io.hpp - CSV output with round-trip float formatting
#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "kolmo/core.hpp"

namespace kolmo {

// 17 significant digits, '.' separator regardless of locale.
inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    std::string s(buf);
    for (auto& c : s)
        if (c == ',') c = '.';
    return s;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw ValidationError("cannot open " + path + " for writing");
    }

    void header(const std::vector<std::string>& cols) { row_strings(cols); }

    void row(const std::vector<double>& vals) {
        std::string line;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (i) line += ',';
            line += fmt(vals[i]);
        }
        out_ << line << '\n';
    }

    void row_strings(const std::vector<std::string>& vals) {
        for (std::size_t i = 0; i < vals.size(); ++i) out_ << (i ? "," : "") << vals[i];
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

}  // namespace kolmo
