#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kinex/analysis.hpp"
#include "kinex/error.hpp"

namespace kinex {

double Histogram::integral() const {
    double sum = 0.0;
    for (std::size_t b = 0; b < densities.size(); ++b) {
        sum += densities[b] * width(b);
    }
    return sum;
}

Histogram pdf_histogram(const Sample& sample, const HistogramOptions& options) {
    sample.validate();
    if (options.bin_count < 2) {
        throw Error(ErrorKind::InvalidParameter, "histogram needs at least 2 bins");
    }
    double min_pos = std::numeric_limits<double>::infinity();
    double max_pos = 0.0;
    double zero_weight = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double v = sample.values[i];
        if (v > 0.0) {
            min_pos = std::min(min_pos, v);
            max_pos = std::max(max_pos, v);
        } else {
            zero_weight += sample.weights[i];
        }
    }
    if (!(max_pos > 0.0)) {
        throw Error(ErrorKind::EmptyInput, "histogram needs at least one positive income");
    }

    const bool log_bins = options.scheme == BinScheme::Logarithmic;
    double lo = options.lo.value_or(min_pos);
    double hi = options.hi.value_or(max_pos);
    if (log_bins && !(lo > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "logarithmic bins need a positive lower edge");
    }
    if (lo > hi) {
        throw Error(ErrorKind::InvalidParameter, "histogram range is inverted");
    }
    if (lo == hi) {
        // Degenerate support: centre the value in a finite range.
        if (log_bins) {
            lo /= 2.0;
            hi *= 2.0;
        } else {
            const double half = lo > 0.0 ? 0.5 * lo : 0.5;
            lo -= half;
            hi += half;
        }
    }

    const std::size_t bins = options.bin_count;
    Histogram h;
    h.scheme = options.scheme;
    h.edges.resize(bins + 1);
    for (std::size_t k = 0; k <= bins; ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(bins);
        h.edges[k] = log_bins ? std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * f)
                              : lo + (hi - lo) * f;
    }
    h.edges.front() = lo;
    h.edges.back() = hi;

    std::vector<double> mass(bins, 0.0);
    double in_range = 0.0;
    double out_of_range = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double v = sample.values[i];
        if (!(v > 0.0)) continue;
        if (v < lo || v > hi) {
            out_of_range += sample.weights[i];
            continue;
        }
        auto it = std::upper_bound(h.edges.begin(), h.edges.end(), v);
        auto bin = static_cast<std::size_t>(std::distance(h.edges.begin(), it));
        bin = std::clamp<std::size_t>(bin, 1, bins) - 1;
        mass[bin] += sample.weights[i];
        in_range += sample.weights[i];
    }

    const double total = sample.total_weight();
    h.zero_mass_fraction = zero_weight / total;
    h.out_of_range_fraction = out_of_range / total;
    const double norm = in_range + (options.zeros_in_denominator ? zero_weight : 0.0);
    h.densities.assign(bins, 0.0);
    if (norm > 0.0) {
        for (std::size_t b = 0; b < bins; ++b) {
            h.densities[b] = mass[b] / (norm * h.width(b));
        }
    }
    return h;
}

std::size_t count_modes(std::span<const double> densities, const ModeOptions& options) {
    if (options.smoothing_window == 0 || options.smoothing_window % 2 == 0) {
        throw Error(ErrorKind::InvalidParameter, "smoothing window must be odd");
    }
    const std::size_t n = densities.size();
    if (n == 0) return 0;

    // Moving average; the density is taken as zero outside the binned support.
    const auto half = static_cast<std::ptrdiff_t>(options.smoothing_window / 2);
    std::vector<double> s(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -half; k <= half; ++k) {
            const auto j = static_cast<std::ptrdiff_t>(i) + k;
            if (j >= 0 && j < static_cast<std::ptrdiff_t>(n)) acc += densities[j];
        }
        s[i] = acc / static_cast<double>(options.smoothing_window);
    }
    const double peak = *std::max_element(s.begin(), s.end());
    if (!(peak > 0.0)) return 0;
    const double threshold = options.min_prominence * peak;

    std::size_t modes = 0;
    std::size_t l = 0;
    while (l < n) {
        std::size_t r = l;
        while (r + 1 < n && s[r + 1] == s[l]) ++r;
        const double v = s[l];
        const bool rises_in = l == 0 || s[l - 1] < v;
        const bool falls_out = r + 1 == n || s[r + 1] < v;
        if (rises_in && falls_out) {
            // Prominence: height above the higher of the two flanking minima. Each
            // side is scanned up to the nearest strictly higher point; running off
            // the support edge means the side bottoms out at zero.
            double left_min = 0.0;
            for (std::size_t k = l; k-- > 0;) {
                if (s[k] > v) {
                    left_min = *std::min_element(s.begin() + static_cast<std::ptrdiff_t>(k) + 1,
                                                 s.begin() + static_cast<std::ptrdiff_t>(l));
                    break;
                }
            }
            double right_min = 0.0;
            for (std::size_t k = r + 1; k < n; ++k) {
                if (s[k] > v) {
                    right_min = *std::min_element(s.begin() + static_cast<std::ptrdiff_t>(r) + 1,
                                                  s.begin() + static_cast<std::ptrdiff_t>(k));
                    break;
                }
            }
            if (v - std::max(left_min, right_min) > threshold) ++modes;
        }
        l = r + 1;
    }
    return modes;
}

std::size_t count_modes(const Histogram& hist, const ModeOptions& options) {
    return count_modes(std::span<const double>(hist.densities), options);
}

double gini(const Sample& sample) {
    if (sample.empty()) {
        throw Error(ErrorKind::EmptyInput, "gini of an empty sample");
    }
    sample.validate();
    std::vector<std::size_t> order(sample.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return sample.values[a] < sample.values[b]; });

    const double total_w = sample.total_weight();
    double total_wx = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) total_wx += sample.weights[i] * sample.values[i];
    if (!(total_wx > 0.0)) {
        throw Error(ErrorKind::UndefinedMeasure, "gini is undefined for a zero mean");
    }

    // sum_i sum_j w_i w_j |x_i - x_j| = 2 sum_i w_i x_i (C_{i-1} - (W - C_i)), ascending order.
    double below = 0.0;
    double acc = 0.0;
    for (const std::size_t i : order) {
        const double w = sample.weights[i];
        const double above = total_w - below - w;
        acc += w * sample.values[i] * (below - above);
        below += w;
    }
    const double mean = total_wx / total_w;
    const double g = 2.0 * acc / (2.0 * total_w * total_w * mean);
    return std::max(0.0, g);
}

}  // namespace kinex
