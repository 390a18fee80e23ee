#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pact {

using Bytes = std::vector<std::uint8_t>;

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

inline std::string to_string(const Bytes& b) {
    return std::string(b.begin(), b.end());
}

std::string hex_encode(const std::uint8_t* data, std::size_t len);

inline std::string hex_encode(const Bytes& b) { return hex_encode(b.data(), b.size()); }

template <std::size_t N>
std::string hex_encode(const std::array<std::uint8_t, N>& a) {
    return hex_encode(a.data(), N);
}

// Returns false on odd length or non-hex characters.
bool hex_decode(std::string_view hex, Bytes& out);

template <std::size_t N>
bool hex_decode(std::string_view hex, std::array<std::uint8_t, N>& out) {
    Bytes tmp;
    if (!hex_decode(hex, tmp) || tmp.size() != N) return false;
    std::memcpy(out.data(), tmp.data(), N);
    return true;
}

// Canonical tuple encoding used everywhere a structured value is signed or
// hashed: each field is a 4-byte big-endian length followed by the raw bytes.
// Field order is fixed by the caller, so two encoders fed the same fields in
// the same order produce identical bytes.
class Encoder {
public:
    Encoder& field(const Bytes& b) { return raw(b.data(), b.size()); }
    Encoder& field(std::string_view s) {
        return raw(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
    }
    template <std::size_t N>
    Encoder& field(const std::array<std::uint8_t, N>& a) { return raw(a.data(), N); }
    Encoder& field_u64(std::uint64_t v);

    const Bytes& bytes() const { return buf_; }
    Bytes take() { return std::move(buf_); }

private:
    Encoder& raw(const std::uint8_t* data, std::size_t len);
    Bytes buf_;
};

void put_u32_be(Bytes& out, std::uint32_t v);
std::uint32_t get_u32_be(const std::uint8_t* p);
void put_u64_be(Bytes& out, std::uint64_t v);
std::uint64_t get_u64_be(const std::uint8_t* p);

}  // namespace pact
