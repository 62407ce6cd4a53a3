#pragma once

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <cstddef>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace tlab {

struct TTestResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

/// Welch two-sample t-test, two-sided.
inline TTestResult t_test(const std::vector<double>& a, const std::vector<double>& b, bool warn = true) {
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("t_test: each sample needs at least 2 values");
    auto moments = [](const std::vector<double>& x) {
        double mean = 0;
        for (double v : x) mean += v;
        mean /= static_cast<double>(x.size());
        double ss = 0;
        for (double v : x) ss += (v - mean) * (v - mean);
        return std::pair<double, double>{mean, ss / static_cast<double>(x.size() - 1)};
    };
    const auto [ma, va] = moments(a);
    const auto [mb, vb] = moments(b);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double sa = va / na, sb = vb / nb;
    TTestResult r;
    if (sa + sb == 0.0) {
        if (ma == mb) return r;
        if (warn) std::cerr << "warning: t_test on zero-variance samples with different means; p = 0\n";
        r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        r.df = na + nb - 2;
        r.p = 0.0;
        return r;
    }
    r.t = (ma - mb) / std::sqrt(sa + sb);
    r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1) + sb * sb / (nb - 1));
    r.p = boost::math::ibeta(r.df / 2.0, 0.5, r.df / (r.df + r.t * r.t));
    return r;
}

/// "**" for p < 0.01, "*" for p < 0.05, otherwise empty.
inline std::string significance_stars(double p) {
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

}  // namespace tlab
