#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipw/observables.hpp"

namespace ipw {

/// Linear interpolation of a series at time t; t must lie inside the range.
inline double series_value_at(const ObservableSeries& s, double t) {
    s.validate();
    if (s.times.empty()) throw std::invalid_argument("series_value_at: empty series");
    if (t < s.times.front() || t > s.times.back())
        throw std::domain_error("series_value_at: time outside the sampled range");
    const auto it = std::lower_bound(s.times.begin(), s.times.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - s.times.begin());
    if (hi == 0 || s.times[hi] == t) return s.values[hi];
    const double t0 = s.times[hi - 1], t1 = s.times[hi];
    const double u = (t - t0) / (t1 - t0);
    return (1.0 - u) * s.values[hi - 1] + u * s.values[hi];
}

enum class CompareMetric { MaxAbs, TimeIntegratedAbs, RelAt };

inline CompareMetric parse_metric(const std::string& name) {
    if (name == "max_abs") return CompareMetric::MaxAbs;
    if (name == "time_integrated_abs") return CompareMetric::TimeIntegratedAbs;
    if (name == "rel_at") return CompareMetric::RelAt;
    throw std::invalid_argument("parse_metric: unknown metric '" + name + "'");
}

namespace detail {

/// Sorted union of both sample grids restricted to the common time range.
inline std::vector<double> merged_times(const ObservableSeries& a, const ObservableSeries& b) {
    a.validate();
    b.validate();
    if (a.times.empty() || b.times.empty())
        throw std::invalid_argument("compare_series: empty series");
    const double lo = std::max(a.times.front(), b.times.front());
    const double hi = std::min(a.times.back(), b.times.back());
    if (!(lo <= hi)) throw std::invalid_argument("compare_series: disjoint time ranges");

    std::vector<double> ts;
    ts.reserve(a.times.size() + b.times.size());
    for (double t : a.times)
        if (t >= lo && t <= hi) ts.push_back(t);
    for (double t : b.times)
        if (t >= lo && t <= hi) ts.push_back(t);
    ts.push_back(lo);
    ts.push_back(hi);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

}  // namespace detail

/// |a - b| over the common range: its maximum, its trapezoid time integral on
/// the merged sample partition, or the relative gap at one time (b is the
/// reference).
inline double compare_series(const ObservableSeries& a, const ObservableSeries& b,
                             CompareMetric metric, double t_at = 0.0) {
    if (metric == CompareMetric::RelAt) {
        const double va = series_value_at(a, t_at);
        const double vb = series_value_at(b, t_at);
        if (vb == 0.0) throw std::domain_error("compare_series: reference is zero at t");
        return std::abs(va - vb) / std::abs(vb);
    }
    const std::vector<double> ts = detail::merged_times(a, b);
    if (metric == CompareMetric::MaxAbs) {
        double worst = 0.0;
        for (double t : ts) worst = std::max(worst, std::abs(series_value_at(a, t) - series_value_at(b, t)));
        return worst;
    }
    double acc = 0.0, prev = std::abs(series_value_at(a, ts[0]) - series_value_at(b, ts[0]));
    for (std::size_t i = 1; i < ts.size(); ++i) {
        const double cur = std::abs(series_value_at(a, ts[i]) - series_value_at(b, ts[i]));
        acc += 0.5 * (prev + cur) * (ts[i] - ts[i - 1]);
        prev = cur;
    }
    return acc;
}

/// Times of the interior local extrema, each refined by the vertex of the
/// quadratic through the extremal sample and its neighbors. Plateaus are
/// skipped: an extremum needs a strict slope sign change.
inline std::vector<double> extremum_times(const ObservableSeries& s) {
    s.validate();
    std::vector<double> out;
    for (std::size_t i = 1; i + 1 < s.times.size(); ++i) {
        const double dl = s.values[i] - s.values[i - 1];
        const double dr = s.values[i + 1] - s.values[i];
        if (!(dl * dr < 0.0)) continue;
        const double tl = s.times[i - 1], tm = s.times[i], tr = s.times[i + 1];
        const double g1 = dl / (tm - tl);
        const double g2 = (dr / (tr - tm) - g1) / (tr - tl);
        double t_star = tm;
        if (g2 != 0.0) t_star = 0.5 * (tl + tm) - g1 / (2.0 * g2);
        out.push_back(std::clamp(t_star, tl, tr));
    }
    return out;
}

}  // namespace ipw
