#pragma once

// Little-endian primitives shared by the dataset and checkpoint formats.
// Byte order is explicit so files travel between hosts.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "pptv/error.hpp"

namespace pptv::binio {

inline void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline void put_u8(std::ostream& os, std::uint8_t v) {
    os.put(static_cast<char>(v));
}

inline std::uint64_t get_u64(std::istream& is, const char* what) {
    char b[8];
    is.read(b, 8);
    if (is.gcount() != 8) throw TruncatedError(std::string("truncated payload reading ") + what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

inline double get_f64(std::istream& is, const char* what) {
    return std::bit_cast<double>(get_u64(is, what));
}

inline std::uint8_t get_u8(std::istream& is, const char* what) {
    const int c = is.get();
    if (c == std::istream::traits_type::eof())
        throw TruncatedError(std::string("truncated payload reading ") + what);
    return static_cast<std::uint8_t>(c);
}

inline void expect_magic(std::istream& is, const char* magic, const char* format_name) {
    char buf[9] = {};
    is.read(buf, 8);
    if (is.gcount() != 8) throw TruncatedError(std::string("file too short for a ") + format_name + " header");
    if (std::string(buf, 8) != magic)
        throw BadMagicError(std::string("bad magic for ") + format_name + ": got \"" + std::string(buf, 8) + "\"");
}

// Extent guard: rejects sizes that cannot describe a real payload.
inline int checked_extent(std::uint64_t v, const char* what, std::uint64_t limit = (1u << 30)) {
    if (v == 0 || v > limit)
        throw ExtentError(std::string(what) + " extent out of range: " + std::to_string(v));
    return static_cast<int>(v);
}

}  // namespace pptv::binio
