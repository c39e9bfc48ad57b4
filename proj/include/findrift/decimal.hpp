#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace findrift {

// Exact base-10 value: mantissa * 10^exponent, normalized so the mantissa
// carries no trailing zeros (and zero is always {0,0}). Exactness matters
// because the materiality tolerance is evaluated at its boundary: 1,000,000
// vs 1,050,000 must flag at exactly 5% while a one-unit smaller difference
// must not, and binary floating point cannot make that distinction reliably.
class Decimal {
public:
    Decimal() : mantissa_(0), exponent_(0) {}
    Decimal(std::int64_t mantissa, std::int32_t exponent);

    std::int64_t mantissa() const { return mantissa_; }
    std::int32_t exponent() const { return exponent_; }

    bool is_zero() const { return mantissa_ == 0; }
    bool is_negative() const { return mantissa_ < 0; }

    Decimal negated() const { return Decimal(-mantissa_, exponent_); }
    Decimal abs() const { return mantissa_ < 0 ? negated() : *this; }

    // Shift by a power of ten (percent -> -2, K/M/B -> +3/+6/+9).
    Decimal scaled_pow10(std::int32_t shift) const {
        return Decimal(mantissa_, exponent_ + shift);
    }

    bool operator==(const Decimal& other) const {
        return mantissa_ == other.mantissa_ && exponent_ == other.exponent_;
    }
    bool operator!=(const Decimal& other) const { return !(*this == other); }

    // Exact integer comparisons (arbitrary precision internally).
    static int compare(const Decimal& a, const Decimal& b);
    bool operator<(const Decimal& other) const { return compare(*this, other) < 0; }

    // Exact test of |a - b| >= eps * min(|a|, |b|). Both zero -> false
    // (identical values); exactly one zero -> true (no finite relative
    // difference). eps must be positive.
    static bool rel_diff_at_least(const Decimal& a, const Decimal& b,
                                  const Decimal& eps);

    // Exact test of |observed - expected| <= tol * |expected|; when expected
    // is zero, passes only if observed is exactly zero.
    static bool within_rel_tolerance(const Decimal& observed,
                                     const Decimal& expected,
                                     const Decimal& tol);

    // Plain decimal text, no exponent notation: "1050000", "-0.05", "12.5".
    std::string to_string() const;

    double to_double() const;

    // Parses a plain decimal literal: optional sign, digits, optional
    // fractional part ("-12.50"). Returns nullopt for anything else or on
    // mantissa overflow.
    static std::optional<Decimal> parse(const std::string& text);

private:
    std::int64_t mantissa_;
    std::int32_t exponent_;
};

}  // namespace findrift
