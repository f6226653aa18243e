#pragma once

// Binary field snapshots:
//   "ESEISNAP" | u32 version | u32 stagger | 3 x u64 dims | f64 time | u32 components
//   | components x dims f64 payload, x fastest | u64 sum of payload bytes
// Everything little-endian.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "staggered.hpp"

namespace electroseis {

inline constexpr char snapshot_magic[8] = {'E', 'S', 'E', 'I', 'S', 'N', 'A', 'P'};
inline constexpr std::uint32_t snapshot_version = 1;

struct FieldSnapshot {
    Stagger stagger = Stagger::node;
    Index3 dims{0, 0, 0};
    double time = 0.0;
    std::vector<Array3> components;

    bool operator==(const FieldSnapshot&) const = default;
};

inline FieldSnapshot make_snapshot(const VectorField& f, Stagger s, double t) {
    return {s, f.shape(), t, {f[0], f[1], f[2]}};
}

inline FieldSnapshot make_snapshot(const Array3& f, Stagger s, double t) { return {s, f.shape(), t, {f}}; }

inline VectorField vector_field(const FieldSnapshot& s) {
    if (s.components.size() != 3) throw ValidationError("snapshot: 3 components expected, found " + std::to_string(s.components.size()));
    VectorField f;
    for (int c = 0; c < 3; ++c) f[c] = s.components[static_cast<std::size_t>(c)];
    return f;
}

namespace detail {

template <class T>
void put_le(std::vector<unsigned char>& out, T v) {
    std::uint64_t bits = 0;
    if constexpr (std::is_floating_point_v<T>) {
        bits = std::bit_cast<std::uint64_t>(v);
    } else {
        bits = static_cast<std::uint64_t>(v);
    }
    for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<unsigned char>(bits >> (8 * b)));
}

inline std::uint64_t get_le(const unsigned char* p, std::size_t bytes) {
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < bytes; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    return v;
}

}  // namespace detail

inline std::vector<unsigned char> encode_snapshot(const FieldSnapshot& s) {
    for (const auto& c : s.components)
        if (c.shape() != s.dims) throw ValidationError("snapshot: component shape does not match the declared dims");
    std::vector<unsigned char> out(snapshot_magic, snapshot_magic + 8);
    detail::put_le(out, snapshot_version);
    detail::put_le(out, static_cast<std::uint32_t>(s.stagger));
    for (std::size_t d : s.dims) detail::put_le(out, static_cast<std::uint64_t>(d));
    detail::put_le(out, s.time);
    detail::put_le(out, static_cast<std::uint32_t>(s.components.size()));
    const std::size_t start = out.size();
    for (const auto& c : s.components)
        for (double v : c.values()) detail::put_le(out, v);
    std::uint64_t sum = 0;
    for (std::size_t i = start; i < out.size(); ++i) sum += out[i];
    detail::put_le(out, sum);
    return out;
}

/// expected, when given, must match the stored dims.
inline FieldSnapshot decode_snapshot(const std::vector<unsigned char>& in, const Index3* expected = nullptr) {
    constexpr std::size_t header = 8 + 4 + 4 + 24 + 8 + 4;
    if (in.size() < header + 8) throw ValidationError("snapshot: truncated file (" + std::to_string(in.size()) + " bytes)");
    if (std::memcmp(in.data(), snapshot_magic, 8) != 0) throw ValidationError("snapshot: bad magic tag");
    const unsigned char* p = in.data() + 8;
    const auto version = static_cast<std::uint32_t>(detail::get_le(p, 4));
    if (version != snapshot_version) throw ValidationError("snapshot: unsupported format version " + std::to_string(version));
    const auto code = static_cast<std::uint32_t>(detail::get_le(p + 4, 4));
    if (code > 3) throw ValidationError("snapshot: unknown staggering code " + std::to_string(code));
    FieldSnapshot s;
    s.stagger = static_cast<Stagger>(code);
    std::uint64_t count = 1;
    for (int a = 0; a < 3; ++a) {
        const std::uint64_t d = detail::get_le(p + 8 + 8 * a, 8);
        if (d == 0 || d > (std::uint64_t{1} << 32)) throw ValidationError("snapshot: implausible dimension " + std::to_string(d));
        s.dims[a] = static_cast<std::size_t>(d);
        count *= d;
    }
    s.time = std::bit_cast<double>(detail::get_le(p + 32, 8));
    const auto ncomp = static_cast<std::uint32_t>(detail::get_le(p + 40, 4));
    if (expected && *expected != s.dims)
        throw ValidationError("snapshot: dimension mismatch, file has " + to_string(s.dims) + ", grid expects " +
                              to_string(*expected));
    const std::uint64_t payload = count * ncomp * 8;
    if (in.size() < header + payload + 8) throw ValidationError("snapshot: truncated file (payload incomplete)");
    if (in.size() > header + payload + 8) throw ValidationError("snapshot: trailing bytes after checksum");
    std::uint64_t sum = 0;
    for (std::size_t i = header; i < header + payload; ++i) sum += in[i];
    if (sum != detail::get_le(in.data() + header + payload, 8)) throw ValidationError("snapshot: checksum mismatch");
    const unsigned char* q = in.data() + header;
    for (std::uint32_t c = 0; c < ncomp; ++c) {
        Array3 a(s.dims);
        for (double& v : a.values()) {
            v = std::bit_cast<double>(detail::get_le(q, 8));
            q += 8;
        }
        s.components.push_back(std::move(a));
    }
    return s;
}

inline void write_snapshot(const std::filesystem::path& path, const FieldSnapshot& s) {
    const auto bytes = encode_snapshot(s);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("snapshot: cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ValidationError("snapshot: write to '" + path.string() + "' failed");
}

inline FieldSnapshot read_snapshot(const std::filesystem::path& path, const Index3* expected = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("snapshot: cannot open '" + path.string() + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_snapshot(bytes, expected);
}

inline FieldSnapshot read_snapshot(const std::filesystem::path& path, const Index3& expected) {
    return read_snapshot(path, &expected);
}

}  // namespace electroseis
