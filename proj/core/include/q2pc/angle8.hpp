#pragma once

#include <complex>
#include <cstdint>
#include <numbers>
#include <ostream>

namespace q2pc {

/// Angle in units of pi/4, reduced mod 8.
class Angle8 {
  public:
    constexpr Angle8() = default;
    constexpr explicit Angle8(int units) : value_(reduce(units)) {}

    [[nodiscard]] constexpr int value() const { return value_; }
    [[nodiscard]] constexpr bool is_even() const { return value_ % 2 == 0; }
    [[nodiscard]] double radians() const { return value_ * std::numbers::pi / 4.0; }

    /// e^{i * value * pi/4}
    [[nodiscard]] std::complex<double> phase() const;

    constexpr Angle8 operator-() const { return Angle8(-value_); }
    constexpr Angle8 operator+(Angle8 o) const { return Angle8(value_ + o.value_); }
    constexpr Angle8 operator-(Angle8 o) const { return Angle8(value_ - o.value_); }
    constexpr Angle8 &operator+=(Angle8 o) { return *this = *this + o; }
    constexpr bool operator==(const Angle8 &) const = default;

    static constexpr Angle8 pi() { return Angle8(4); }
    static constexpr Angle8 half_pi() { return Angle8(2); }

  private:
    static constexpr std::uint8_t reduce(int v) {
        int r = v % 8;
        return static_cast<std::uint8_t>(r < 0 ? r + 8 : r);
    }
    std::uint8_t value_ = 0;
};

inline std::ostream &operator<<(std::ostream &out, Angle8 a) {
    return out << a.value() << "pi/4";
}

inline std::complex<double> Angle8::phase() const {
    static const double h = std::numbers::sqrt2 / 2.0;
    static const std::complex<double> table[8] = {
        {1, 0}, {h, h}, {0, 1}, {-h, h}, {-1, 0}, {-h, -h}, {0, -1}, {h, -h}};
    return table[value_];
}

} // namespace q2pc
