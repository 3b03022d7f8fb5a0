#pragma once
// Quantiles by linear interpolation between order statistics (the
// "type 7" definition). Fence computations for the distribution filters
// record this choice in their reports.

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

namespace ptod {

// p in [0,1]; values need not be sorted.
inline double quantile_type7(std::span<const double> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile of empty sample");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.size() == 1) return sorted[0];
    double h = p * static_cast<double>(sorted.size() - 1);
    size_t lo = static_cast<size_t>(h);
    if (lo >= sorted.size() - 1) return sorted.back();
    double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

struct Quartiles {
    double q1 = 0.0;
    double q3 = 0.0;
    double iqr() const { return q3 - q1; }
};

inline Quartiles quartiles(std::span<const double> values) {
    return {quantile_type7(values, 0.25), quantile_type7(values, 0.75)};
}

}  // namespace ptod
