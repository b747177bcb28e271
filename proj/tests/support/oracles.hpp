#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Each one is the direct O(n^2) reading of its definition.

#include "fcox/metrics.hpp"
#include "fcox/random.hpp"
#include "fcox/survival.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace oracle {

using fcox::Matrix;
using fcox::Vector;

inline fcox::SurvivalDataset make_dataset(const Matrix& X, const std::vector<double>& times,
                                          const std::vector<bool>& events,
                                          std::map<std::string, fcox::ProtectedColumn> prot = {}) {
    Vector t(static_cast<Eigen::Index>(times.size()));
    for (std::size_t i = 0; i < times.size(); ++i) t[static_cast<Eigen::Index>(i)] = times[i];
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < X.cols(); ++j) names.push_back("x" + std::to_string(j));
    return fcox::SurvivalDataset(X, t, events, std::move(prot), names);
}

inline fcox::ProtectedColumn binary_column(std::vector<int> values) {
    return fcox::ProtectedColumn{std::move(values), {0, 1}, {"0", "1"}};
}

// Product over events of exp(eta_i) / sum_{j: T_j >= T_i} exp(eta_j).
inline double partial_likelihood_product(const Vector& eta, const Vector& time,
                                         const std::vector<bool>& event) {
    double product = 1.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        if (!event[static_cast<std::size_t>(i)]) continue;
        double denom = 0.0;
        for (Eigen::Index j = 0; j < eta.size(); ++j)
            if (time[j] >= time[i]) denom += std::exp(eta[j]);
        product *= std::exp(eta[i]) / denom;
    }
    return product;
}

inline double c_index(std::span<const double> s, std::span<const double> t,
                      const std::vector<bool>& e) {
    long comparable = 0, concordant = 0, tied = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!e[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (!(t[i] < t[j])) continue;
            ++comparable;
            if (s[i] > s[j]) ++concordant;
            else if (s[i] == s[j]) ++tied;
        }
    }
    return (static_cast<double>(concordant) + 0.5 * static_cast<double>(tied)) /
           static_cast<double>(comparable);
}

// Cumulative/dynamic AUC at t, enumerating every case/control pair.
// Returns NaN when t has no cases or no controls.
inline double auc_at(std::span<const double> s, std::span<const double> t,
                     const std::vector<bool>& e, const fcox::KaplanMeierCurve& g, double horizon) {
    double numerator = 0.0, weight_total = 0.0;
    long controls = 0;
    for (std::size_t j = 0; j < s.size(); ++j)
        if (t[j] > horizon) ++controls;
    bool any_case = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!(t[i] <= horizon && e[i])) continue;
        const double gi = g.left_limit(t[i]);
        if (!(gi > 0)) continue;
        any_case = true;
        long twice = 0;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (!(t[j] > horizon)) continue;
            if (s[i] > s[j]) twice += 2;
            else if (s[i] == s[j]) twice += 1;
        }
        numerator += (1.0 / gi) * static_cast<double>(twice);
        weight_total += 1.0 / gi;
    }
    if (!any_case || controls == 0) return std::nan("");
    return numerator / (weight_total * 2.0 * static_cast<double>(controls));
}

inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x,
                                 double h = 1e-6) {
    Vector g(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        Vector hi = x, lo = x;
        hi[k] += h;
        lo[k] -= h;
        g[k] = (f(hi) - f(lo)) / (2 * h);
    }
    return g;
}

inline double relative_error(const Vector& a, const Vector& b) {
    const double scale = std::max({a.lpNorm<Eigen::Infinity>(), b.lpNorm<Eigen::Infinity>(), 1e-12});
    return (a - b).lpNorm<Eigen::Infinity>() / scale;
}

// Random instance with distinct times and roughly the requested censoring.
struct Instance {
    Matrix X;
    std::vector<double> times;
    std::vector<bool> events;
};

inline Instance random_instance(fcox::Rng& rng, std::size_t n, std::size_t p,
                                double censor_fraction, bool integer_times = false) {
    Instance out{Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p)), {}, {}};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j)
            out.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rng.normal();
        out.times.push_back(integer_times ? static_cast<double>(1 + rng.below(10))
                                          : rng.exponential() * 10.0);
        out.events.push_back(rng.uniform() >= censor_fraction);
    }
    return out;
}

}  // namespace oracle
