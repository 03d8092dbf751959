#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "kinex/exchange.hpp"

namespace kinex {

// Weighted income observations. Weights default to 1; `weighted` records
// whether they were supplied explicitly.
struct Sample {
    std::vector<double> values;
    std::vector<double> weights;
    bool weighted = false;

    static Sample unweighted(std::vector<double> values);
    static Sample with_weights(std::vector<double> values, std::vector<double> weights);
    static Sample from_snapshot(const Snapshot& snap) { return unweighted(snap.incomes); }

    std::size_t size() const noexcept { return values.size(); }
    bool empty() const noexcept { return values.empty(); }
    double total_weight() const noexcept;

    // Throws InvalidInput on negative values, non-positive weights or a length mismatch.
    void validate() const;
};

struct CcdfPoint {
    double x = 0.0;
    double q = 0.0;
};

// Q(x) = W(X >= x) / W at the distinct positive sample values (or raw weight
// sums when not normalized). Zero incomes count in W only.
struct Ccdf {
    std::vector<CcdfPoint> points;
    bool normalized = true;
    double total_weight = 0.0;

    // Step evaluation of P(X >= x); 1 (or W) for x <= 0, 0 past the largest point.
    double at(double x) const;
    // P(X > x), the right limit of at().
    double above(double x) const;
};

Ccdf ccdf(const Sample& sample, bool normalized = true);

enum class BinScheme { Linear, Logarithmic };

struct HistogramOptions {
    BinScheme scheme = BinScheme::Linear;
    std::size_t bin_count = 50;
    // Explicit support; defaults to [min positive, max positive].
    std::optional<double> lo;
    std::optional<double> hi;
    // Count zero incomes in the normalisation total instead of only reporting them.
    bool zeros_in_denominator = false;
};

struct Histogram {
    std::vector<double> edges;
    std::vector<double> densities;
    BinScheme scheme = BinScheme::Linear;
    // Weight fraction of zero incomes in the whole sample.
    double zero_mass_fraction = 0.0;
    // Weight fraction of positive incomes outside [edges.front(), edges.back()].
    double out_of_range_fraction = 0.0;

    double width(std::size_t bin) const { return edges[bin + 1] - edges[bin]; }
    // Sum of density * width.
    double integral() const;
};

Histogram pdf_histogram(const Sample& sample, const HistogramOptions& options);

enum class FitMethod { Hill, LogLogLeastSquares };

std::string to_string(FitMethod method);

struct TailFit {
    double alpha = 0.0;
    double amplitude = 0.0;
    double x_min = 0.0;
    std::size_t n_tail = 0;
    double stderr_alpha = 0.0;
    FitMethod method = FitMethod::Hill;
};

// Hill / maximum-likelihood exponent of the survival function above x_min:
//   alpha = W_tail / sum w_i ln(x_i / x_min),  stderr = alpha / sqrt(W_tail)
// and A = Q(x_min) x_min^alpha so Q = A x^-alpha meets the empirical CCDF at x_min.
TailFit fit_pareto_hill(const Sample& sample, double x_min);

// Ordinary least squares of ln Q on ln x over the CCDF points with x >= x_min.
TailFit fit_pareto_ls(const Ccdf& ccdf, double x_min);

struct TopFraction {
    double q = 0.01;
};

struct KsMinimum {
    // Candidates need at least this many tail points.
    std::size_t min_tail = 10;
    // Candidate thresholds are thinned to at most this many, evenly spaced in rank.
    std::size_t max_candidates = 200;
};

using XminMethod = std::variant<TopFraction, KsMinimum>;

double select_xmin(const Sample& sample, const XminMethod& method = TopFraction{});

struct RelativeCurve {
    std::vector<double> grid;
    std::vector<double> ratios;
    std::string reference_tag;
    // Requested grid points dropped because the reference CCDF is zero there.
    std::size_t dropped = 0;
};

// R(x) = Q_t(x) / Q_ref(x) with both CCDFs normalised. Default grid: the
// distinct positive values of the reference sample.
RelativeCurve relative_ccdf(const Sample& current, const Sample& reference,
                            std::optional<std::vector<double>> grid = std::nullopt,
                            std::string reference_tag = "reference");

double gini(const Sample& sample);

struct ModeOptions {
    double min_prominence = 0.05;
    // Odd moving-average window applied before peak detection; 1 disables smoothing.
    std::size_t smoothing_window = 3;
};

std::size_t count_modes(std::span<const double> densities, const ModeOptions& options = {});
std::size_t count_modes(const Histogram& hist, const ModeOptions& options = {});

// sup_x |Q_a(x) - Q_b(x)| over both step functions.
double ks_distance(const Ccdf& a, const Ccdf& b);
// Same against a continuous survival function S(x) = P(X >= x).
double ks_distance(const Ccdf& a, const std::function<double(double)>& survival);

struct FitConfig {
    XminMethod xmin = TopFraction{};
    FitMethod method = FitMethod::Hill;
};

TailFit fit_tail(const Sample& sample, const FitConfig& config);

struct AlphaPoint {
    double t = 0.0;
    std::string label;
    std::optional<TailFit> fit;
    // Diagnostic for gaps.
    std::string gap_reason;
};

struct TimedSample {
    double t = 0.0;
    // Free-form period name; empty when t alone identifies the element.
    std::string label;
    Sample sample;
};

// A failing element becomes a gap; throws EmptySeries when every element fails.
std::vector<AlphaPoint> alpha_timeseries(std::span<const TimedSample> series,
                                         const FitConfig& config = {});
std::vector<AlphaPoint> alpha_timeseries(std::span<const Snapshot> snapshots,
                                         const FitConfig& config = {});

}  // namespace kinex
