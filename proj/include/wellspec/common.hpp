#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace wellspec {

// Row-major dense matrix. Small on purpose; all linear algebra in this
// library is loops over rows.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
    double* row(std::size_t i) { return data.data() + i * cols; }

    static Matrix from_column(const std::vector<double>& v) {
        Matrix m(v.size(), 1);
        for (std::size_t i = 0; i < v.size(); ++i) m.data[i] = v[i];
        return m;
    }

    Matrix select_rows(const std::vector<std::size_t>& idx) const {
        Matrix out(idx.size(), cols);
        for (std::size_t k = 0; k < idx.size(); ++k)
            for (std::size_t j = 0; j < cols; ++j) out(k, j) = (*this)(idx[k], j);
        return out;
    }

    Matrix select_cols(const std::vector<int>& idx) const {
        Matrix out(rows, idx.size());
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t k = 0; k < idx.size(); ++k)
                out(i, k) = (*this)(i, static_cast<std::size_t>(idx[k]));
        return out;
    }
};

inline std::vector<double> select(const std::vector<double>& v,
                                  const std::vector<std::size_t>& idx) {
    std::vector<double> out(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) out[k] = v[idx[k]];
    return out;
}

inline double squared_distance(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double t = a[j] - b[j];
        s += t * t;
    }
    return s;
}

// Errors caused by user input (bad file, bad column, bad config). The CLI
// maps these to exit code 2; everything else is an internal failure.
class input_error : public std::runtime_error {
  public:
    explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Logging, controlled by the WELLSPEC_LOG environment variable
// (off|info|debug, default off).
// ---------------------------------------------------------------------------

enum class LogLevel { kOff = 0, kInfo = 1, kDebug = 2 };

inline LogLevel log_level() {
    static const LogLevel lvl = [] {
        const char* e = std::getenv("WELLSPEC_LOG");
        if (!e) return LogLevel::kOff;
        const std::string s(e);
        if (s == "debug") return LogLevel::kDebug;
        if (s == "info") return LogLevel::kInfo;
        return LogLevel::kOff;
    }();
    return lvl;
}

template <typename... Args>
void log_info(const char* fmt, Args... args) {
    if (log_level() >= LogLevel::kInfo) {
        std::fprintf(stderr, "[wellspec] ");
        std::fprintf(stderr, fmt, args...);
        std::fprintf(stderr, "\n");
    }
}

template <typename... Args>
void log_debug(const char* fmt, Args... args) {
    if (log_level() >= LogLevel::kDebug) {
        std::fprintf(stderr, "[wellspec:debug] ");
        std::fprintf(stderr, fmt, args...);
        std::fprintf(stderr, "\n");
    }
}

}  // namespace wellspec
