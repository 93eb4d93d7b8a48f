#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wellspec/common.hpp"
#include "wellspec/rng.hpp"

namespace wellspec {

// Immutable after construction; shared freely across workers.
struct Dataset {
    std::vector<std::string> names;  // predictor column names, header order
    Matrix x;                        // n x p predictor values
    std::string target_name;
    std::vector<double> y;

    std::size_t n() const { return y.size(); }
    std::size_t p() const { return x.cols; }
};

// One half-split of the rows. Regenerating with the same (seed, b, n) yields
// the identical plan.
struct SplitPlan {
    std::uint64_t seed = 0;
    std::size_t b = 0;
    std::vector<std::size_t> half_a;  // floor(n/2) indices, ascending
    std::vector<std::size_t> half_b;  // the complement, ascending
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
    return s.substr(a, b - a);
}

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

inline bool parse_finite(const std::string& cell, double& out) {
    if (cell.empty()) return false;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto res = std::from_chars(first, last, out);
    if (res.ec != std::errc() || res.ptr != last) return false;
    return std::isfinite(out);
}

}  // namespace detail

// CSV ingestion: comma separated, UTF-8, header row, decimal cells with
// optional scientific notation. Any non-finite or unparsable cell is a hard
// error naming the data row and column; silently dropping rows would change
// n and every rank statistic downstream.
inline Dataset load_csv(const std::string& path, const std::string& target_name) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw input_error("empty file: " + path);
    const std::vector<std::string> header = detail::split_line(line);

    int target_idx = -1;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j].empty()) throw input_error("empty header name in column " + std::to_string(j + 1));
        for (std::size_t k = j + 1; k < header.size(); ++k)
            if (header[j] == header[k]) throw input_error("duplicate column name: " + header[j]);
        if (header[j] == target_name) target_idx = static_cast<int>(j);
    }
    if (target_idx < 0) throw input_error("target column not found: " + target_name);
    if (header.size() < 2) throw input_error("no predictor columns");

    std::vector<std::vector<double>> rows;
    std::size_t data_row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++data_row;
        const std::vector<std::string> cells = detail::split_line(line);
        if (cells.size() != header.size())
            throw input_error("row " + std::to_string(data_row) + " has " + std::to_string(cells.size()) +
                              " cells, expected " + std::to_string(header.size()));
        std::vector<double> vals(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j) {
            if (!detail::parse_finite(cells[j], vals[j]))
                throw input_error("non-numeric or non-finite cell at row " + std::to_string(data_row) +
                                  ", column '" + header[j] + "': '" + cells[j] + "'");
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw input_error("no data rows in " + path);

    Dataset ds;
    ds.target_name = target_name;
    for (std::size_t j = 0; j < header.size(); ++j)
        if (static_cast<int>(j) != target_idx) ds.names.push_back(header[j]);
    ds.x = Matrix(rows.size(), header.size() - 1);
    ds.y.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::size_t c = 0;
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (static_cast<int>(j) == target_idx)
                ds.y[i] = rows[i][j];
            else
                ds.x(i, c++) = rows[i][j];
        }
    }
    return ds;
}

// Shortest-exact formatting (%.17g round-trips IEEE doubles bit-exactly).
inline void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write file: " + path);
    for (std::size_t j = 0; j < ds.p(); ++j) out << ds.names[j] << ',';
    out << ds.target_name << '\n';
    char buf[40];
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t j = 0; j < ds.p(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.x(i, j));
            out << buf << ',';
        }
        std::snprintf(buf, sizeof buf, "%.17g", ds.y[i]);
        out << buf << '\n';
    }
}

// Uniform-random partition into |half_a| = floor(n/2) and |half_b| =
// ceil(n/2), a pure function of (n, seed, b).
inline SplitPlan make_split(std::size_t n, std::uint64_t seed, std::size_t b) {
    if (n < 4) throw input_error("make_split requires n >= 4, got n = " + std::to_string(n));
    RngStream rng(seed, {0x5354u /* "ST" */, b});
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(idx);
    SplitPlan plan;
    plan.seed = seed;
    plan.b = b;
    plan.half_a.assign(idx.begin(), idx.begin() + n / 2);
    plan.half_b.assign(idx.begin() + n / 2, idx.end());
    std::sort(plan.half_a.begin(), plan.half_a.end());
    std::sort(plan.half_b.begin(), plan.half_b.end());
    return plan;
}

inline RngStream derive_rng(std::uint64_t master, const std::vector<std::uint64_t>& path) {
    return RngStream(master, path);
}

}  // namespace wellspec
