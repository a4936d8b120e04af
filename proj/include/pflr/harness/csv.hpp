#pragma once

#include "pflr/core.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pflr::csv {

inline std::string fmt(double v)
{
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string fmt_fixed(double v, int digits = 3)
{
    if (!std::isfinite(v)) return fmt(v);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

/// Quotes a field only when it carries a comma, quote or newline.
inline std::string field(const std::string& s)
{
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + '"';
}

class Writer {
public:
    explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary)
    {
        if (!out_) throw Error("cannot open '" + path + "' for writing");
    }

    Writer& row(const std::vector<std::string>& cells)
    {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (k) out_ << ',';
            out_ << field(cells[k]);
        }
        out_ << '\n';
        if (!out_) throw Error("write failed on '" + path_ + "'");
        return *this;
    }

    Writer& row(const std::vector<double>& cells)
    {
        std::vector<std::string> s;
        s.reserve(cells.size());
        for (double v : cells) s.push_back(fmt(v));
        return row(s);
    }

    void matrix(const Mat& m)
    {
        for (Index i = 0; i < m.rows(); ++i) {
            std::vector<double> r(static_cast<std::size_t>(m.cols()));
            for (Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
            row(r);
        }
    }

private:
    std::string path_;
    std::ofstream out_;
};

struct Table {
    std::vector<std::string> header;  // empty when the file had none
    Mat values;
};

namespace detail {

inline std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char ch = line[k];
        if (quoted) {
            if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                cur += '"';
                ++k;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline bool parse_number(const std::string& s, double& v)
{
    std::size_t a = s.find_first_not_of(" \t"), b = s.find_last_not_of(" \t");
    if (a == std::string::npos) return false;
    const std::string t = s.substr(a, b - a + 1);
    if (t == "NA" || t == "NaN" || t == "nan") {
        v = std::numeric_limits<double>::quiet_NaN();
        return true;
    }
    try {
        std::size_t used = 0;
        v = std::stod(t, &used);
        return used == t.size();
    } catch (const std::exception&) {
        return false;
    }
}

} // namespace detail

/// Reads a numeric CSV. A first row that does not parse as numbers is taken as the header.
inline Table read(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    Table t;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0, width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto cells = detail::split(line);
        std::vector<double> r(cells.size());
        bool numeric = true;
        for (std::size_t k = 0; k < cells.size() && numeric; ++k) numeric = detail::parse_number(cells[k], r[k]);
        if (!numeric) {
            if (rows.empty() && t.header.empty()) {
                t.header = std::move(cells);
                width = t.header.size();
                continue;
            }
            throw Error(pflr::detail::concat(path, ":", lineno, ": non-numeric value"));
        }
        if (width == 0) width = r.size();
        if (r.size() != width)
            throw Error(pflr::detail::concat(path, ":", lineno, ": expected ", width, " fields, found ", r.size()));
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw Error("'" + path + "' has no data rows");
    t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j) t.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    return t;
}

} // namespace pflr::csv
