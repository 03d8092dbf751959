#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kinex/analysis.hpp"
#include "kinex/error.hpp"

namespace kinex {

namespace {

struct WeightedPoint {
    double x;
    double w;
};

// Positive observations, largest first.
std::vector<WeightedPoint> positive_descending(const Sample& sample) {
    std::vector<WeightedPoint> pts;
    pts.reserve(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        if (sample.values[i] > 0.0) {
            pts.push_back({sample.values[i], sample.weights[i]});
        }
    }
    std::sort(pts.begin(), pts.end(),
              [](const WeightedPoint& a, const WeightedPoint& b) { return a.x > b.x; });
    return pts;
}

double top_fraction_xmin(const Sample& sample, double q) {
    if (!(q > 0.0 && q <= 1.0)) {
        throw Error(ErrorKind::InvalidParameter, "top fraction must lie in (0, 1]");
    }
    const auto pts = positive_descending(sample);
    if (pts.size() < 2) {
        throw Error(ErrorKind::EmptyInput, "x_min selection needs at least 2 positive values");
    }
    const double smallest_positive = pts.back().x;

    double x_min = 0.0;
    if (!sample.weighted) {
        // Rank ceil(q n) from the top, n counting zero incomes too.
        const auto n = static_cast<double>(sample.size());
        auto rank = static_cast<std::size_t>(std::ceil(q * n * (1.0 - 1e-12)));
        rank = std::clamp<std::size_t>(rank, 1, sample.size());
        x_min = rank <= pts.size() ? pts[rank - 1].x : 0.0;
    } else {
        // Smallest x whose tail weight fraction is still <= q.
        const double budget = q * sample.total_weight() * (1.0 + 1e-12);
        double tail = 0.0;
        x_min = pts.front().x;
        std::size_t k = 0;
        while (k < pts.size()) {
            const double x = pts[k].x;
            double with_ties = tail;
            std::size_t j = k;
            while (j < pts.size() && pts[j].x == x) {
                with_ties += pts[j].w;
                ++j;
            }
            if (with_ties > budget) {
                break;
            }
            tail = with_ties;
            x_min = x;
            k = j;
        }
    }
    return x_min > 0.0 ? x_min : smallest_positive;
}

double ks_min_xmin(const Sample& sample, const KsMinimum& method) {
    const auto pts = positive_descending(sample);
    const std::size_t min_tail = std::max<std::size_t>(method.min_tail, 2);
    if (pts.size() < min_tail) {
        throw Error(ErrorKind::EmptyInput, "too few positive values for KS-based x_min selection");
    }

    // Candidate k: x_min = pts[k].x with the tail being pts[0..end_k), end_k past all ties.
    std::vector<std::size_t> candidates;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const bool last_of_ties = k + 1 == pts.size() || pts[k + 1].x != pts[k].x;
        if (last_of_ties && k + 1 >= min_tail) {
            candidates.push_back(k);
        }
    }
    if (candidates.empty()) {
        throw Error(ErrorKind::EmptyInput, "no x_min candidate leaves enough tail points");
    }
    if (method.max_candidates > 0 && candidates.size() > method.max_candidates) {
        std::vector<std::size_t> thinned;
        const std::size_t m = method.max_candidates;
        const std::size_t steps = std::max<std::size_t>(m - 1, 1);
        for (std::size_t i = 0; i < m; ++i) {
            thinned.push_back(candidates[i * (candidates.size() - 1) / steps]);
        }
        thinned.erase(std::unique(thinned.begin(), thinned.end()), thinned.end());
        candidates = std::move(thinned);
    }

    std::vector<double> cum_w(pts.size() + 1, 0.0);
    std::vector<double> cum_wlog(pts.size() + 1, 0.0);
    for (std::size_t k = 0; k < pts.size(); ++k) {
        cum_w[k + 1] = cum_w[k] + pts[k].w;
        cum_wlog[k + 1] = cum_wlog[k] + pts[k].w * std::log(pts[k].x);
    }

    double best_x = pts[candidates.front()].x;
    double best_d = std::numeric_limits<double>::infinity();
    for (const std::size_t k : candidates) {
        const double x_min = pts[k].x;
        const double w_tail = cum_w[k + 1];
        const double log_sum = cum_wlog[k + 1] - w_tail * std::log(x_min);
        if (!(log_sum > 0.0)) {
            continue;
        }
        const double alpha = w_tail / log_sum;
        double d = 0.0;
        std::size_t i = 0;
        while (i <= k) {
            const double x = pts[i].x;
            std::size_t j = i;
            while (j <= k && pts[j].x == x) ++j;
            const double q_at = cum_w[j] / w_tail;   // P(X >= x | tail)
            const double q_above = cum_w[i] / w_tail;  // P(X > x | tail)
            const double s = std::pow(x / x_min, -alpha);
            d = std::max({d, std::abs(q_at - s), std::abs(q_above - s)});
            i = j;
        }
        // Ties in d favour the larger tail, i.e. the later candidate.
        if (d <= best_d) {
            best_d = d;
            best_x = x_min;
        }
    }
    if (!std::isfinite(best_d)) {
        throw Error(ErrorKind::InsufficientTail, "every x_min candidate has a degenerate tail");
    }
    return best_x;
}

}  // namespace

std::string to_string(FitMethod method) {
    return method == FitMethod::Hill ? "hill" : "loglog-ls";
}

TailFit fit_pareto_hill(const Sample& sample, double x_min) {
    if (!(x_min > 0.0) || !std::isfinite(x_min)) {
        throw Error(ErrorKind::InvalidParameter, "x_min must be positive");
    }
    sample.validate();
    std::size_t n_tail = 0;
    double w_tail = 0.0;
    double log_sum = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        if (sample.values[i] >= x_min) {
            ++n_tail;
            w_tail += sample.weights[i];
            log_sum += sample.weights[i] * std::log(sample.values[i] / x_min);
        }
    }
    if (n_tail < 2) {
        throw Error(ErrorKind::InsufficientTail,
                    "need at least 2 values >= x_min, found " + std::to_string(n_tail));
    }
    if (!(log_sum > 0.0)) {
        throw Error(ErrorKind::InsufficientTail, "every tail value equals x_min");
    }
    TailFit fit;
    fit.method = FitMethod::Hill;
    fit.x_min = x_min;
    fit.n_tail = n_tail;
    fit.alpha = w_tail / log_sum;
    fit.stderr_alpha = fit.alpha / std::sqrt(w_tail);
    fit.amplitude = (w_tail / sample.total_weight()) * std::pow(x_min, fit.alpha);
    return fit;
}

TailFit fit_pareto_ls(const Ccdf& curve, double x_min) {
    if (!(x_min > 0.0) || !std::isfinite(x_min)) {
        throw Error(ErrorKind::InvalidParameter, "x_min must be positive");
    }
    std::vector<double> u;
    std::vector<double> y;
    for (const auto& p : curve.points) {
        if (p.x >= x_min && p.q > 0.0) {
            u.push_back(std::log(p.x));
            y.push_back(std::log(p.q));
        }
    }
    const std::size_t n = u.size();
    if (n < 2) {
        throw Error(ErrorKind::InsufficientTail,
                    "need at least 2 CCDF points >= x_min, found " + std::to_string(n));
    }
    const double u_mean = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(n);
    const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double suu = 0.0;
    double suy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        suu += (u[i] - u_mean) * (u[i] - u_mean);
        suy += (u[i] - u_mean) * (y[i] - y_mean);
    }
    const double slope = suy / suu;
    const double intercept = y_mean - slope * u_mean;
    if (!(slope < 0.0)) {
        throw Error(ErrorKind::InsufficientTail, "log-log tail is not decreasing");
    }

    TailFit fit;
    fit.method = FitMethod::LogLogLeastSquares;
    fit.x_min = x_min;
    fit.n_tail = n;
    fit.alpha = -slope;
    fit.amplitude = std::exp(intercept);
    if (n > 2) {
        double ssr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - (intercept + slope * u[i]);
            ssr += r * r;
        }
        fit.stderr_alpha = std::sqrt(ssr / static_cast<double>(n - 2) / suu);
    }
    return fit;
}

double select_xmin(const Sample& sample, const XminMethod& method) {
    sample.validate();
    if (const auto* top = std::get_if<TopFraction>(&method)) {
        return top_fraction_xmin(sample, top->q);
    }
    return ks_min_xmin(sample, std::get<KsMinimum>(method));
}

TailFit fit_tail(const Sample& sample, const FitConfig& config) {
    double x_min = 0.0;
    try {
        x_min = select_xmin(sample, config.xmin);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyInput) throw;
        throw Error(ErrorKind::InsufficientTail, "too few positive values to place a tail");
    }
    if (config.method == FitMethod::Hill) {
        return fit_pareto_hill(sample, x_min);
    }
    return fit_pareto_ls(ccdf(sample, true), x_min);
}

std::vector<AlphaPoint> alpha_timeseries(std::span<const TimedSample> series,
                                         const FitConfig& config) {
    std::vector<AlphaPoint> out;
    out.reserve(series.size());
    bool any = false;
    for (const auto& element : series) {
        AlphaPoint point;
        point.t = element.t;
        point.label = element.label;
        try {
            point.fit = fit_tail(element.sample, config);
            any = true;
        } catch (const Error& e) {
            point.gap_reason = e.what();
        }
        out.push_back(std::move(point));
    }
    if (!any) {
        throw Error(ErrorKind::EmptySeries, "no element of the series admits a tail fit");
    }
    return out;
}

std::vector<AlphaPoint> alpha_timeseries(std::span<const Snapshot> snapshots,
                                         const FitConfig& config) {
    std::vector<TimedSample> series;
    series.reserve(snapshots.size());
    for (const auto& snap : snapshots) {
        series.push_back({static_cast<double>(snap.sweep_index), {}, Sample::from_snapshot(snap)});
    }
    return alpha_timeseries(std::span<const TimedSample>(series), config);
}

}  // namespace kinex
