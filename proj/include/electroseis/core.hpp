#pragma once

// Shared primitives: error types, grid-shaped storage, small vector helpers and
// the slab-parallel loop used by every solver.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace electroseis {

/// Bad input: configuration, inadmissible parameters, malformed files.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Failure during a computation: CFL violation, blow-up, non-convergence.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Vec3 = std::array<double, 3>;
using Index3 = std::array<std::size_t, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm2(const Vec3& a) { return dot(a, a); }

inline std::string to_string(const Index3& idx) {
    return "(" + std::to_string(idx[0]) + "," + std::to_string(idx[1]) + "," + std::to_string(idx[2]) + ")";
}

/// Scalar samples on a 3-D index box, x-fastest ordering.
///
/// Every field in the library, staggered or not, is stored on the node-shaped
/// box (n1+1)x(n2+1)x(n3+1); staggered components simply leave their last
/// index plane unused (zero).
class Array3 {
public:
    Array3() = default;
    explicit Array3(Index3 shape, double fill = 0.0)
        : shape_(shape), data_(shape[0] * shape[1] * shape[2], fill) {}

    const Index3& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::size_t linear(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return i + shape_[0] * (j + shape_[1] * k);
    }
    double& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept { return data_[linear(i, j, k)]; }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept { return data_[linear(i, j, k)]; }
    double& operator[](const Index3& p) noexcept { return data_[linear(p[0], p[1], p[2])]; }
    double operator[](const Index3& p) const noexcept { return data_[linear(p[0], p[1], p[2])]; }

    std::vector<double>& values() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    Array3& operator+=(const Array3& o) {
        for (std::size_t n = 0; n < data_.size(); ++n) data_[n] += o.data_[n];
        return *this;
    }
    Array3& operator-=(const Array3& o) {
        for (std::size_t n = 0; n < data_.size(); ++n) data_[n] -= o.data_[n];
        return *this;
    }
    Array3& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend Array3 operator-(Array3 a, const Array3& b) { return a -= b; }
    friend Array3 operator+(Array3 a, const Array3& b) { return a += b; }
    friend Array3 operator*(double s, Array3 a) { return a *= s; }

    bool operator==(const Array3& o) const = default;

private:
    Index3 shape_{0, 0, 0};
    std::vector<double> data_;
};

/// Three scalar components sharing one index box.
struct VectorField {
    std::array<Array3, 3> c;

    VectorField() = default;
    explicit VectorField(Index3 shape) : c{Array3(shape), Array3(shape), Array3(shape)} {}

    const Index3& shape() const { return c[0].shape(); }
    Array3& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
    const Array3& operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

    double max_abs() const { return std::max({c[0].max_abs(), c[1].max_abs(), c[2].max_abs()}); }

    VectorField& operator+=(const VectorField& o) {
        for (int i = 0; i < 3; ++i) c[i] += o.c[i];
        return *this;
    }
    VectorField& operator-=(const VectorField& o) {
        for (int i = 0; i < 3; ++i) c[i] -= o.c[i];
        return *this;
    }
    VectorField& operator*=(double s) {
        for (auto& a : c) a *= s;
        return *this;
    }
    friend VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
    friend VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
    friend VectorField operator*(double s, VectorField a) { return a *= s; }

    bool operator==(const VectorField& o) const = default;
};

/// Worker count: ELECTROSEIS_THREADS if set and positive, else hardware concurrency.
inline unsigned worker_count() {
    if (const char* env = std::getenv("ELECTROSEIS_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(k) for k in [begin, end) split into contiguous slabs.
///
/// Each index is handled by exactly one worker and writes only its own
/// outputs, so results are bit-identical for any worker count.
template <class Fn>
void parallel_for(std::size_t begin, std::size_t end, Fn&& fn) {
    if (end <= begin) return;
    const std::size_t count = end - begin;
    const std::size_t workers = std::min<std::size_t>(worker_count(), count);
    if (workers <= 1) {
        for (std::size_t k = begin; k < end; ++k) fn(k);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = begin + w * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t k = lo; k < hi; ++k) fn(k);
        });
    }
    for (auto& t : pool) t.join();
}

/// Sum of per-slab partial sums, accumulated in slab order.
template <class Fn>
double parallel_sum(std::size_t begin, std::size_t end, Fn&& slab_sum) {
    if (end <= begin) return 0.0;
    std::vector<double> partial(end - begin, 0.0);
    parallel_for(begin, end, [&](std::size_t k) { partial[k - begin] = slab_sum(k); });
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

inline bool all_finite(const Array3& a) {
    for (double v : a.values())
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace electroseis
