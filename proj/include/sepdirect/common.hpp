#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

namespace sepdirect {

/// Lookup of an unknown catalog / dictionary key.
class NotFoundError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based row and the offending column/field name.
class ParseError : public std::runtime_error {
  public:
    ParseError(std::string message, std::size_t row, std::string column)
        : std::runtime_error(std::move(message)), row_(row), column_(std::move(column)) {}

    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

  private:
    std::size_t row_;
    std::string column_;
};

enum class FitFailure { non_convergence, separation };

/// Maximum-likelihood fit failure; keeps the last iterate for diagnostics.
class FitError : public std::runtime_error {
  public:
    FitError(FitFailure kind, std::string message, std::vector<double> last_coef)
        : std::runtime_error(std::move(message)), kind_(kind), last_coef_(std::move(last_coef)) {}

    FitFailure kind() const noexcept { return kind_; }
    const std::vector<double>& last_coefficients() const noexcept { return last_coef_; }

  private:
    FitFailure kind_;
    std::vector<double> last_coef_;
};

/// Fitted competing-event survival fell below the hard floor (weights unbounded).
class PositivityError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kPositivityWarnEps = 1e-3;
inline constexpr double kPositivityHardFloor = 1e-8;

inline double expit(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Interpolated empirical quantile on an ascending-sorted vector
/// (linear interpolation between order statistics; h = (n-1)p + 1).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
    if (sorted.size() == 1) return sorted.front();
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double quantile(std::vector<double> sample, double p) {
    std::sort(sample.begin(), sample.end());
    return quantile_sorted(sample, p);
}

/// Shortest round-trip decimal form; keeps repeated runs byte-identical.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace sepdirect
