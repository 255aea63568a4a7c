/**
 * @file
 * Canonical byte encoding for channel payloads. Integers are little-endian
 * fixed width; byte strings, text and vectors carry a u32 length prefix.
 * Only classical value types are writable.
 */
#pragma once

#include <array>
#include <concepts>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "q2pc/angle8.hpp"
#include "q2pc/primitives.hpp"

namespace q2pc {

class WireError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

template <typename T> struct is_byte_array : std::false_type {};
template <std::size_t N> struct is_byte_array<std::array<std::uint8_t, N>> : std::true_type {};

template <typename T> struct is_wire_vector : std::false_type {};
template <std::integral T> struct is_wire_vector<std::vector<T>> : std::true_type {};

/// Types with a canonical encoding. Quantum state types are deliberately absent.
template <typename T>
concept WireEncodable = std::integral<T> || std::same_as<T, Angle8> || std::same_as<T, std::string> ||
                        std::same_as<T, std::string_view> || is_byte_array<T>::value || is_wire_vector<T>::value;

class ByteWriter {
  public:
    template <std::unsigned_integral T> ByteWriter &uint(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        return *this;
    }
    ByteWriter &u8(std::uint8_t v) { return uint(v); }
    ByteWriter &u32(std::uint32_t v) { return uint(v); }
    ByteWriter &u64(std::uint64_t v) { return uint(v); }
    ByteWriter &i32(std::int32_t v) { return uint(static_cast<std::uint32_t>(v)); }
    ByteWriter &bit(int b) { return u8(static_cast<std::uint8_t>(b & 1)); }
    ByteWriter &angle(Angle8 a) { return u8(static_cast<std::uint8_t>(a.value())); }
    ByteWriter &bytes(ByteView b) {
        u32(static_cast<std::uint32_t>(b.size()));
        out_.insert(out_.end(), b.begin(), b.end());
        return *this;
    }
    ByteWriter &text(std::string_view s) { return bytes(as_bytes(s)); }
    template <std::size_t N> ByteWriter &fixed(const std::array<std::uint8_t, N> &a) {
        out_.insert(out_.end(), a.begin(), a.end());
        return *this;
    }
    ByteWriter &bits(const std::vector<std::uint8_t> &b) { return bytes(b); }
    ByteWriter &u32s(const std::vector<std::uint32_t> &v) {
        u32(static_cast<std::uint32_t>(v.size()));
        for (auto x : v) u32(x);
        return *this;
    }

    template <WireEncodable T> ByteWriter &put(const T &v) {
        if constexpr (std::same_as<T, Angle8>) {
            return angle(v);
        } else if constexpr (std::same_as<T, std::string> || std::same_as<T, std::string_view>) {
            return text(v);
        } else if constexpr (is_byte_array<T>::value) {
            return fixed(v);
        } else if constexpr (is_wire_vector<T>::value) {
            u32(static_cast<std::uint32_t>(v.size()));
            for (auto x : v) put(x);
            return *this;
        } else {
            return uint(static_cast<std::make_unsigned_t<T>>(v));
        }
    }

    const Bytes &data() const & { return out_; }
    Bytes data() && { return std::move(out_); }

  private:
    Bytes out_;
};

class ByteReader {
  public:
    explicit ByteReader(ByteView in) : in_(in) {}

    template <std::unsigned_integral T> T uint() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(in_[pos_ + i]) << (8 * i);
        pos_ += sizeof(T);
        return v;
    }
    std::uint8_t u8() { return uint<std::uint8_t>(); }
    std::uint32_t u32() { return uint<std::uint32_t>(); }
    std::uint64_t u64() { return uint<std::uint64_t>(); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    int bit() {
        auto v = u8();
        if (v > 1) throw WireError("bit field out of range");
        return v;
    }
    Angle8 angle() {
        auto v = u8();
        if (v > 7) throw WireError("angle field out of range");
        return Angle8(v);
    }
    Bytes bytes() {
        const std::uint32_t n = u32();
        need(n);
        Bytes out(in_.begin() + static_cast<std::ptrdiff_t>(pos_), in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return out;
    }
    std::string text() {
        Bytes b = bytes();
        return std::string(b.begin(), b.end());
    }
    template <std::size_t N> std::array<std::uint8_t, N> fixed() {
        need(N);
        std::array<std::uint8_t, N> out{};
        for (std::size_t i = 0; i < N; ++i) out[i] = in_[pos_ + i];
        pos_ += N;
        return out;
    }
    std::vector<std::uint8_t> bits() {
        Bytes b = bytes();
        for (auto x : b) {
            if (x > 1) throw WireError("bit string entry out of range");
        }
        return b;
    }
    std::vector<std::uint32_t> u32s() {
        const std::uint32_t n = u32();
        if (n > remaining() / 4) throw WireError("truncated vector");
        std::vector<std::uint32_t> v(n);
        for (auto &x : v) x = u32();
        return v;
    }

    std::size_t remaining() const { return in_.size() - pos_; }
    void expect_end() const {
        if (pos_ != in_.size()) throw WireError("trailing bytes in payload");
    }

  private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw WireError("truncated payload");
    }

    ByteView in_;
    std::size_t pos_ = 0;
};

} // namespace q2pc
