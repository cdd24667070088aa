#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "etlnet/errors.hpp"

// Little-endian primitives shared by the checkpoint and window-cache formats.
namespace etlnet::binio {

template <class U>
void put_le(std::ostream& os, U value) {
    static_assert(std::is_unsigned_v<U>);
    unsigned char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <class U>
U get_le(std::istream& is, const char* what) {
    static_assert(std::is_unsigned_v<U>);
    unsigned char bytes[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
        throw FormatError(std::string("truncated file while reading ") + what);
    }
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
    return value;
}

inline void put_f32(std::ostream& os, float v) { put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v)); }
inline float get_f32(std::istream& is, const char* what) {
    return std::bit_cast<float>(get_le<std::uint32_t>(is, what));
}
inline void put_f64(std::ostream& os, double v) { put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(std::istream& is, const char* what) {
    return std::bit_cast<double>(get_le<std::uint64_t>(is, what));
}

inline void put_string(std::ostream& os, const std::string& s) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is, const char* what, std::size_t max_len = 1u << 24) {
    const auto n = get_le<std::uint32_t>(is, what);
    if (n > max_len) throw FormatError(std::string("implausible string length while reading ") + what);
    std::string s(n, '\0');
    if (n && !is.read(s.data(), n)) throw FormatError(std::string("truncated file while reading ") + what);
    return s;
}

inline void expect_magic(std::istream& is, const char (&magic)[5], const std::string& path) {
    char got[4];
    if (!is.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
        throw FormatError(path + ": bad magic, expected '" + std::string(magic, 4) + "'");
    }
}

}  // namespace etlnet::binio
