#pragma once

// Yee-grid operators. Edge component e at index idx lives at node(idx) +
// h_e/2 e_e and exists for idx_e < n_e; face component f at idx lives at
// node(idx) shifted by half a cell along both axes other than f.

#include "core.hpp"
#include "domain_grid.hpp"

namespace electroseis {

enum class Stagger : std::uint32_t { node = 0, edge = 1, face = 2, cell = 3 };

namespace detail {

inline Index3 shifted(Index3 p, int axis, long d) {
    p[axis] = static_cast<std::size_t>(static_cast<long>(p[axis]) + d);
    return p;
}

/// Calls fn(i,j,k) over the node box, parallel over k-slabs.
template <class Fn>
void for_nodes(const Grid& g, Fn&& fn) {
    parallel_for(0, g.n[2] + 1, [&](std::size_t k) {
        for (std::size_t j = 0; j <= g.n[1]; ++j)
            for (std::size_t i = 0; i <= g.n[0]; ++i) fn(i, j, k);
    });
}

}  // namespace detail

inline bool edge_exists(const Grid& g, int e, const Index3& p) { return p[e] < g.n[e]; }

inline bool face_exists(const Grid& g, int f, const Index3& p) {
    for (int a = 0; a < 3; ++a)
        if (a != f && p[a] >= g.n[a]) return false;
    return true;
}

/// Edge e at p lies in the boundary (tangential to some box face).
inline bool edge_on_boundary(const Grid& g, int e, const Index3& p) {
    for (int a = 0; a < 3; ++a)
        if (a != e && (p[a] == 0 || p[a] == g.n[a])) return true;
    return false;
}

/// Face f at p lies in the boundary (normal along f).
inline bool face_on_boundary(const Grid& g, int f, const Index3& p) { return p[f] == 0 || p[f] == g.n[f]; }

/// Node field averaged onto edges of direction e (2 nodes).
inline Array3 average_to_edges(const Grid& g, const Array3& node, int e) {
    Array3 out(g.node_shape());
    detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
        const Index3 p{i, j, k};
        if (!edge_exists(g, e, p)) return;
        out[p] = 0.5 * (node[p] + node[detail::shifted(p, e, 1)]);
    });
    return out;
}

/// Node field averaged onto faces with normal f (4 nodes).
inline Array3 average_to_faces(const Grid& g, const Array3& node, int f) {
    Array3 out(g.node_shape());
    const int a = (f + 1) % 3, b = (f + 2) % 3;
    detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
        const Index3 p{i, j, k};
        if (!face_exists(g, f, p)) return;
        const Index3 pa = detail::shifted(p, a, 1);
        out[p] = 0.25 * (node[p] + node[pa] + node[detail::shifted(p, b, 1)] + node[detail::shifted(pa, b, 1)]);
    });
    return out;
}

inline VectorField average_to_edges(const Grid& g, const Array3& node) {
    VectorField v;
    for (int e = 0; e < 3; ++e) v[e] = average_to_edges(g, node, e);
    return v;
}
inline VectorField average_to_faces(const Grid& g, const Array3& node) {
    VectorField v;
    for (int f = 0; f < 3; ++f) v[f] = average_to_faces(g, node, f);
    return v;
}

/// Discrete curl mapping an edge field to a face field (all faces).
inline VectorField curl_edge_to_face(const Grid& g, const VectorField& d) {
    VectorField out(g.node_shape());
    for (int f = 0; f < 3; ++f) {
        const int a = (f + 1) % 3, b = (f + 2) % 3;
        detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
            const Index3 p{i, j, k};
            if (!face_exists(g, f, p)) return;
            out[f][p] = (d[b][detail::shifted(p, a, 1)] - d[b][p]) / g.h[a] -
                        (d[a][detail::shifted(p, b, 1)] - d[a][p]) / g.h[b];
        });
    }
    return out;
}

/// Discrete curl mapping a face field to an edge field.
///
/// With interior_only the boundary (tangential) edges are left at zero, which
/// is how the PEC condition enters the D update.
inline VectorField curl_face_to_edge(const Grid& g, const VectorField& bf, bool interior_only = true) {
    VectorField out(g.node_shape());
    for (int e = 0; e < 3; ++e) {
        const int a = (e + 1) % 3, b = (e + 2) % 3;
        detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
            const Index3 p{i, j, k};
            if (!edge_exists(g, e, p)) return;
            const bool bnd = edge_on_boundary(g, e, p);
            if (bnd && interior_only) return;
            // outside the box the face values are taken as zero
            const double bb_lo = p[a] > 0 ? bf[b][detail::shifted(p, a, -1)] : 0.0;
            const double bb_hi = p[a] < g.n[a] ? bf[b][p] : 0.0;
            const double ba_lo = p[b] > 0 ? bf[a][detail::shifted(p, b, -1)] : 0.0;
            const double ba_hi = p[b] < g.n[b] ? bf[a][p] : 0.0;
            out[e][p] = (bb_hi - bb_lo) / g.h[a] - (ba_hi - ba_lo) / g.h[b];
        });
    }
    return out;
}

/// Divergence of an edge field at nodes; only interior nodes are filled.
inline Array3 div_edges(const Grid& g, const VectorField& d) {
    Array3 out(g.node_shape());
    detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
        if (g.is_boundary_node(i, j, k)) return;
        const Index3 p{i, j, k};
        double s = 0.0;
        for (int e = 0; e < 3; ++e) s += (d[e][p] - d[e][detail::shifted(p, e, -1)]) / g.h[e];
        out[p] = s;
    });
    return out;
}

/// Divergence of a face field at cells (index = lowest corner).
inline Array3 div_faces(const Grid& g, const VectorField& b) {
    Array3 out(g.node_shape());
    detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
        if (i == g.n[0] || j == g.n[1] || k == g.n[2]) return;
        const Index3 p{i, j, k};
        double s = 0.0;
        for (int f = 0; f < 3; ++f) s += (b[f][detail::shifted(p, f, 1)] - b[f][p]) / g.h[f];
        out[p] = s;
    });
    return out;
}

/// Zeroes tangential edge components on the boundary.
inline void zero_tangential_edges(const Grid& g, VectorField& d) {
    for (int e = 0; e < 3; ++e)
        detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
            const Index3 p{i, j, k};
            if (!edge_exists(g, e, p) || edge_on_boundary(g, e, p)) d[e][p] = 0.0;
        });
}

/// Zeroes normal face components on the boundary.
inline void zero_normal_faces(const Grid& g, VectorField& b) {
    for (int f = 0; f < 3; ++f)
        detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
            const Index3 p{i, j, k};
            if (!face_exists(g, f, p) || face_on_boundary(g, f, p)) b[f][p] = 0.0;
        });
}

namespace detail {

/// Value at node index m from half-offset samples s(q) at q + 1/2, q in [0, n).
/// Mean of the two neighbours inside, linear extrapolation at the ends.
template <class Sample>
double half_to_node(std::size_t m, std::size_t n, Sample&& s) {
    if (n == 1) return s(0);
    if (m == 0) return 1.5 * s(0) - 0.5 * s(1);
    if (m == n) return 1.5 * s(n - 1) - 0.5 * s(n - 2);
    return 0.5 * (s(m - 1) + s(m));
}

}  // namespace detail

/// Edge field interpolated to nodes, one component at a time.
inline VectorField edges_to_nodes(const Grid& g, const VectorField& d) {
    VectorField out(g.node_shape());
    for (int e = 0; e < 3; ++e)
        detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
            const Index3 p{i, j, k};
            out[e][p] = detail::half_to_node(p[e], g.n[e], [&](std::size_t q) {
                Index3 r = p;
                r[e] = q;
                return d[e][r];
            });
        });
    return out;
}

/// Face field interpolated to nodes along the two tangential axes.
inline VectorField faces_to_nodes(const Grid& g, const VectorField& b) {
    VectorField out(g.node_shape());
    for (int f = 0; f < 3; ++f) {
        const int a = (f + 1) % 3, c = (f + 2) % 3;
        detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
            const Index3 p{i, j, k};
            out[f][p] = detail::half_to_node(p[a], g.n[a], [&](std::size_t qa) {
                return detail::half_to_node(p[c], g.n[c], [&](std::size_t qc) {
                    Index3 r = p;
                    r[a] = qa;
                    r[c] = qc;
                    return b[f][r];
                });
            });
        });
    }
    return out;
}

/// Samples fn(x) component-wise at edge midpoints; missing edges stay zero.
template <class Fn>
VectorField sample_edges(const Grid& g, Fn&& fn) {
    VectorField out(g.node_shape());
    for (int e = 0; e < 3; ++e)
        detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
            if (!edge_exists(g, e, {i, j, k})) return;
            out[e](i, j, k) = fn(g.edge(e, i, j, k))[e];
        });
    return out;
}

template <class Fn>
VectorField sample_faces(const Grid& g, Fn&& fn) {
    VectorField out(g.node_shape());
    for (int f = 0; f < 3; ++f)
        detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
            if (!face_exists(g, f, {i, j, k})) return;
            out[f](i, j, k) = fn(g.face(f, i, j, k))[f];
        });
    return out;
}

template <class Fn>
Array3 sample_nodes(const Grid& g, Fn&& fn) {
    Array3 out(g.node_shape());
    detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) { out(i, j, k) = fn(g.node(i, j, k)); });
    return out;
}

template <class Fn>
VectorField sample_nodes_vec(const Grid& g, Fn&& fn) {
    VectorField out(g.node_shape());
    detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
        const Vec3 v = fn(g.node(i, j, k));
        for (int c = 0; c < 3; ++c) out[c](i, j, k) = v[c];
    });
    return out;
}

/// Componentwise product of two same-shaped vector fields.
inline VectorField hadamard(const VectorField& a, const VectorField& b) {
    VectorField out = a;
    for (int c = 0; c < 3; ++c)
        for (std::size_t n = 0; n < out[c].size(); ++n) out[c].values()[n] *= b[c].values()[n];
    return out;
}

/// Sum of a.b over all stored samples times the cell volume.
inline double weighted_dot(const Grid& g, const VectorField& w, const VectorField& a, const VectorField& b) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
        const auto& wv = w[c].values();
        const auto& av = a[c].values();
        const auto& bv = b[c].values();
        for (std::size_t n = 0; n < av.size(); ++n) s += wv[n] * av[n] * bv[n];
    }
    return s * g.cell_volume();
}

}  // namespace electroseis
