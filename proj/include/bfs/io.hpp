#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "bfs/errors.hpp"

namespace bfs {

// Little-endian primitives for the binary containers. All multi-byte fields in
// dataset/model/trace files are little-endian regardless of host order.

namespace detail {

inline bool host_is_little_endian() {
    const std::uint16_t probe = 1;
    std::uint8_t b;
    std::memcpy(&b, &probe, 1);
    return b == 1;
}

template <typename T>
inline void byteswap_inplace(T& v) {
    auto* p = reinterpret_cast<std::uint8_t*>(&v);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(p[i], p[sizeof(T) - 1 - i]);
}

} // namespace detail

template <typename T>
inline void le_write(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    if (!detail::host_is_little_endian()) detail::byteswap_inplace(value);
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
inline T le_read(std::istream& in, const char* what) {
    static_assert(std::is_trivially_copyable_v<T>);
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in || in.gcount() != static_cast<std::streamsize>(sizeof(T)))
        throw truncated_file_error(std::string("truncated file while reading ") + what);
    if (!detail::host_is_little_endian()) detail::byteswap_inplace(value);
    return value;
}

inline void le_write_f64s(std::ostream& out, const double* data, std::size_t n) {
    if (detail::host_is_little_endian()) {
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    } else {
        for (std::size_t i = 0; i < n; ++i) le_write(out, data[i]);
    }
}

inline void le_read_f64s(std::istream& in, double* data, std::size_t n, const char* what) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in || in.gcount() != static_cast<std::streamsize>(n * sizeof(double)))
        throw truncated_file_error(std::string("truncated file while reading ") + what);
    if (!detail::host_is_little_endian()) {
        for (std::size_t i = 0; i < n; ++i) detail::byteswap_inplace(data[i]);
    }
}

inline void write_magic(std::ostream& out, const char magic[9]) {
    out.write(magic, 8);
}

inline void check_magic(std::istream& in, const char expected[9], const char* filetype) {
    char got[8];
    in.read(got, 8);
    if (!in || in.gcount() != 8)
        throw truncated_file_error(std::string("file too short to hold a ") + filetype + " header");
    if (std::memcmp(got, expected, 8) != 0)
        throw bad_magic_error(std::string("bad magic: not a ") + filetype + " file (or wrong version)");
}

// FNV-1a 64-bit running hash. Used for content hashes in manifests and
// reproducibility checks; not cryptographic.
class Fnv1a {
public:
    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001B3ULL;
        }
    }
    void update_f64(double v) {
        if (!detail::host_is_little_endian()) detail::byteswap_inplace(v);
        update(&v, sizeof(v));
    }
    void update_f64s(const double* data, std::size_t n) {
        if (detail::host_is_little_endian()) {
            update(data, n * sizeof(double));
        } else {
            for (std::size_t i = 0; i < n; ++i) update_f64(data[i]);
        }
    }
    void update_u64(std::uint64_t v) {
        if (!detail::host_is_little_endian()) detail::byteswap_inplace(v);
        update(&v, sizeof(v));
    }
    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

inline std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open file for hashing: " + path);
    Fnv1a h;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        h.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return h.digest();
}

inline std::string hash_to_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return s;
}

inline std::ofstream open_output(const std::string& path, std::ios::openmode mode = std::ios::binary) {
    std::ofstream out(path, mode);
    if (!out) throw data_error("cannot open output file: " + path);
    return out;
}

inline std::ifstream open_input(const std::string& path, std::ios::openmode mode = std::ios::binary) {
    std::ifstream in(path, mode);
    if (!in) throw data_error("cannot open input file: " + path);
    return in;
}

} // namespace bfs
