#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace crossgo::io {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Little-endian regardless of host order.
template <typename U>
void put_le(std::ostream& out, U value)
{
    static_assert(std::is_unsigned_v<U>);
    char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    out.write(bytes, sizeof(U));
}

template <typename U>
U get_le(std::istream& in)
{
    static_assert(std::is_unsigned_v<U>);
    unsigned char bytes[sizeof(U)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw FormatError("unexpected end of file");
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(static_cast<U>(bytes[i]) << (8 * i));
    return value;
}

inline void put_f32(std::ostream& out, float v)
{
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
}

inline float get_f32(std::istream& in)
{
    return std::bit_cast<float>(get_le<std::uint32_t>(in));
}

inline void expect_magic(std::istream& in, const char (&magic)[5])
{
    char got[4];
    if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0)
        throw FormatError(std::string("bad magic, expected ") + magic);
}

}  // namespace crossgo::io
