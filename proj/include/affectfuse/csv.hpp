#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "affectfuse/core.hpp"

namespace affectfuse::csv {

/// Plain comma splitting; the formats used here never quote fields.
inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        const auto cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                            : pos - start);
        cells.emplace_back(detail::trim(cell));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

inline Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    Table t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
            line.erase(0, 3);
        if (detail::trim(line).empty()) continue;
        if (!have_header) {
            t.header = split(line);
            have_header = true;
            continue;
        }
        t.rows.push_back(split(line));
        t.line_numbers.push_back(lineno);
    }
    if (!have_header) throw DataError(path + ": missing CSV header");
    return t;
}

inline void expect_header(const Table& t, const std::vector<std::string_view>& expected,
                          const std::string& path) {
    bool ok = t.header.size() == expected.size();
    for (std::size_t i = 0; ok && i < expected.size(); ++i)
        ok = detail::lower(t.header[i]) == detail::lower(expected[i]);
    if (!ok) {
        std::string want;
        for (auto e : expected) want += (want.empty() ? "" : ",") + std::string(e);
        throw DataError(path + ": expected header " + want);
    }
}

}  // namespace affectfuse::csv
