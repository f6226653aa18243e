#pragma once

#include <cstddef>
#include <vector>

namespace electroseis {

namespace quad {

/// Composite 4-point Gauss-Legendre rule on [a, b] with P panels.
struct Rule {
    std::vector<double> x, w;
};

inline Rule gauss_composite(double a, double b, std::size_t panels) {
    static const double xi[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
    static const double wi[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
    Rule r;
    const double h = (b - a) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
        const double c = a + (static_cast<double>(p) + 0.5) * h;
        for (int q = 0; q < 4; ++q) {
            r.x.push_back(c + 0.5 * h * xi[q]);
            r.w.push_back(0.5 * h * wi[q]);
        }
    }
    return r;
}

}  // namespace quad

}  // namespace electroseis
