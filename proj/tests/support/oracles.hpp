#pragma once

// Analytic reference solutions shared by unit and acceptance tests.

#include <cmath>
#include <numbers>

#include "electroseis/core.hpp"

namespace oracle {

using electroseis::Vec3;

/// (1,1,0) cavity eigenmode of the unit cube with alpha = beta = 1, gamma = 0:
/// D = e3 sin(pi x) sin(pi y) cos(w t), B from dB/dt = -curl D, w = pi sqrt(2).
struct CavityMode {
    double omega = std::numbers::pi * std::numbers::sqrt2;

    Vec3 D(const Vec3& x, double t) const {
        const double pi = std::numbers::pi;
        return {0.0, 0.0, std::sin(pi * x[0]) * std::sin(pi * x[1]) * std::cos(omega * t)};
    }
    Vec3 B(const Vec3& x, double t) const {
        const double pi = std::numbers::pi;
        const double s = -(pi / omega) * std::sin(omega * t);
        return {s * std::sin(pi * x[0]) * std::cos(pi * x[1]), -s * std::cos(pi * x[0]) * std::sin(pi * x[1]), 0.0};
    }
};

/// Least-squares slope of log(y) against log(x).
inline double log_slope(double x0, double y0, double x1, double y1) {
    return std::log(y1 / y0) / std::log(x1 / x0);
}

}  // namespace oracle
