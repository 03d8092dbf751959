#include <algorithm>
#include <cmath>
#include <numeric>

#include "kinex/analysis.hpp"
#include "kinex/error.hpp"

namespace kinex {

Sample Sample::unweighted(std::vector<double> values) {
    Sample s;
    s.weights.assign(values.size(), 1.0);
    s.values = std::move(values);
    return s;
}

Sample Sample::with_weights(std::vector<double> values, std::vector<double> weights) {
    Sample s;
    s.values = std::move(values);
    s.weights = std::move(weights);
    s.weighted = true;
    s.validate();
    return s;
}

double Sample::total_weight() const noexcept {
    return std::accumulate(weights.begin(), weights.end(), 0.0);
}

void Sample::validate() const {
    if (values.size() != weights.size()) {
        throw Error(ErrorKind::InvalidInput, "sample values and weights differ in length");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] >= 0.0) || !std::isfinite(values[i])) {
            throw Error(ErrorKind::InvalidInput,
                        "sample value " + std::to_string(i) + " is negative or not finite");
        }
        if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
            throw Error(ErrorKind::InvalidInput,
                        "sample weight " + std::to_string(i) + " is not positive");
        }
    }
}

double Ccdf::at(double x) const {
    if (x <= 0.0) {
        return normalized ? 1.0 : total_weight;
    }
    const auto it = std::lower_bound(points.begin(), points.end(), x,
                                     [](const CcdfPoint& p, double v) { return p.x < v; });
    return it == points.end() ? 0.0 : it->q;
}

double Ccdf::above(double x) const {
    if (x < 0.0) {
        return normalized ? 1.0 : total_weight;
    }
    const auto it = std::upper_bound(points.begin(), points.end(), x,
                                     [](double v, const CcdfPoint& p) { return v < p.x; });
    return it == points.end() ? 0.0 : it->q;
}

Ccdf ccdf(const Sample& sample, bool normalized) {
    if (sample.empty()) {
        throw Error(ErrorKind::EmptyInput, "cannot build a CCDF from an empty sample");
    }
    sample.validate();

    std::vector<std::size_t> order(sample.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return sample.values[a] > sample.values[b]; });

    Ccdf out;
    out.normalized = normalized;
    out.total_weight = sample.total_weight();
    const double scale = normalized ? 1.0 / out.total_weight : 1.0;

    double tail = 0.0;
    std::size_t k = 0;
    while (k < order.size() && sample.values[order[k]] > 0.0) {
        const double x = sample.values[order[k]];
        while (k < order.size() && sample.values[order[k]] == x) {
            tail += sample.weights[order[k]];
            ++k;
        }
        out.points.push_back({x, tail * scale});
    }
    std::reverse(out.points.begin(), out.points.end());
    return out;
}

double ks_distance(const Ccdf& a, const Ccdf& b) {
    if (!a.normalized || !b.normalized) {
        throw Error(ErrorKind::InvalidInput, "KS distance needs normalized CCDFs");
    }
    double d = 0.0;
    auto probe = [&](double x) {
        d = std::max(d, std::abs(a.at(x) - b.at(x)));
        d = std::max(d, std::abs(a.above(x) - b.above(x)));
    };
    probe(0.0);
    for (const auto& p : a.points) probe(p.x);
    for (const auto& p : b.points) probe(p.x);
    return d;
}

double ks_distance(const Ccdf& a, const std::function<double(double)>& survival) {
    if (!a.normalized) {
        throw Error(ErrorKind::InvalidInput, "KS distance needs a normalized CCDF");
    }
    if (a.points.empty()) {
        return std::abs(1.0 - survival(0.0));
    }
    // Q is constant on (p_k, p_k+1] and S is monotone, so the supremum sits at a
    // point or at its right limit.
    double d = std::abs(a.points.front().q - survival(0.0));
    for (std::size_t k = 0; k < a.points.size(); ++k) {
        const double s = survival(a.points[k].x);
        const double right = k + 1 < a.points.size() ? a.points[k + 1].q : 0.0;
        d = std::max({d, std::abs(a.points[k].q - s), std::abs(right - s)});
    }
    return d;
}

RelativeCurve relative_ccdf(const Sample& current, const Sample& reference,
                            std::optional<std::vector<double>> grid, std::string reference_tag) {
    if (current.empty() || reference.empty()) {
        throw Error(ErrorKind::EmptyInput, "relative CCDF needs two non-empty samples");
    }
    const Ccdf q_cur = ccdf(current, true);
    const Ccdf q_ref = ccdf(reference, true);

    std::vector<double> xs;
    if (grid) {
        xs = std::move(*grid);
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    } else {
        xs.reserve(q_ref.points.size());
        for (const auto& p : q_ref.points) xs.push_back(p.x);
    }

    RelativeCurve out;
    out.reference_tag = std::move(reference_tag);
    for (double x : xs) {
        const double denom = q_ref.at(x);
        if (!(denom > 0.0)) {
            ++out.dropped;
            continue;
        }
        out.grid.push_back(x);
        out.ratios.push_back(q_cur.at(x) / denom);
    }
    if (out.grid.empty()) {
        throw Error(ErrorKind::NoOverlap, "no grid point where the reference CCDF is positive");
    }
    return out;
}

}  // namespace kinex
