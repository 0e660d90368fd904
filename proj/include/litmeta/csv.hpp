#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "litmeta/common.hpp"

namespace litmeta::csv {

// RFC 4180 style parsing: quoted cells may contain commas, newlines and
// doubled quotes. Rows are vectors of raw cell strings.
inline std::vector<std::vector<std::string>> parse(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool in_quotes = false;
    bool row_started = false;

    // Strip a UTF-8 BOM if present.
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

    size_t i = 0;
    auto end_cell = [&] {
        row.push_back(std::move(cell));
        cell.clear();
    };
    auto end_row = [&] {
        end_cell();
        rows.push_back(std::move(row));
        row.clear();
        row_started = false;
    };

    while (i < text.size()) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cell.push_back(c);
            }
        } else {
            if (c == '"' && cell.empty()) {
                in_quotes = true;
                row_started = true;
            } else if (c == ',') {
                end_cell();
                row_started = true;
            } else if (c == '\n') {
                if (row_started || !cell.empty() || !row.empty()) end_row();
            } else if (c == '\r') {
                // handled by the following \n, or ignored at end of row
            } else {
                cell.push_back(c);
                row_started = true;
            }
        }
        ++i;
    }
    if (row_started || !cell.empty() || !row.empty()) end_row();
    return rows;
}

inline std::string escape(std::string_view cell) {
    bool needs_quotes = cell.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!needs_quotes) return std::string(cell);
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string write_row(const std::vector<std::string>& cells) {
    std::string line;
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) line.push_back(',');
        line += escape(cells[i]);
    }
    line.push_back('\n');
    return line;
}

}  // namespace litmeta::csv
