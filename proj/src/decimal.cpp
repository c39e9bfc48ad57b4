#include "findrift/decimal.hpp"

#include <gmpxx.h>

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace findrift {

namespace {

// Value as an arbitrary-precision integer mantissa at a given exponent:
// align both operands to the smaller exponent before integer comparison.
mpz_class aligned_mantissa(const Decimal& d, std::int32_t target_exponent) {
    mpz_class m(static_cast<long>(d.mantissa()));
    std::int32_t shift = d.exponent() - target_exponent;
    if (shift > 0) {
        mpz_class pow10;
        mpz_ui_pow_ui(pow10.get_mpz_t(), 10, static_cast<unsigned long>(shift));
        m *= pow10;
    }
    return m;
}

}  // namespace

Decimal::Decimal(std::int64_t mantissa, std::int32_t exponent)
    : mantissa_(mantissa), exponent_(exponent) {
    if (mantissa_ == 0) {
        exponent_ = 0;
        return;
    }
    while (mantissa_ % 10 == 0) {
        mantissa_ /= 10;
        ++exponent_;
    }
}

int Decimal::compare(const Decimal& a, const Decimal& b) {
    std::int32_t base = std::min(a.exponent_, b.exponent_);
    mpz_class ma = aligned_mantissa(a, base);
    mpz_class mb = aligned_mantissa(b, base);
    return cmp(ma, mb);
}

bool Decimal::rel_diff_at_least(const Decimal& a, const Decimal& b,
                                const Decimal& eps) {
    if (a.is_zero() && b.is_zero()) return false;
    if (a.is_zero() || b.is_zero()) return true;

    // |a-b| >= eps * min(|a|,|b|), all sides scaled to a common exponent so
    // the comparison is between exact integers.
    std::int32_t base = std::min({a.exponent_, b.exponent_,
                                  a.exponent_ + eps.exponent_,
                                  b.exponent_ + eps.exponent_});
    mpz_class ma = ::abs(aligned_mantissa(a, base));
    mpz_class mb = ::abs(aligned_mantissa(b, base));
    mpz_class diff = ::abs(aligned_mantissa(a, base) - aligned_mantissa(b, base));
    mpz_class smaller = ma < mb ? ma : mb;

    // eps * smaller: eps.mantissa * smaller * 10^(eps.exponent), folded into
    // the shared base exponent. diff is at exponent `base`; the product is at
    // exponent base + eps.exponent, so rescale the cheaper side.
    mpz_class lhs = diff;
    mpz_class rhs = mpz_class(static_cast<long>(std::llabs(eps.mantissa_))) * smaller;
    if (eps.exponent_ > 0) {
        mpz_class pow10;
        mpz_ui_pow_ui(pow10.get_mpz_t(), 10,
                      static_cast<unsigned long>(eps.exponent_));
        rhs *= pow10;
    } else if (eps.exponent_ < 0) {
        mpz_class pow10;
        mpz_ui_pow_ui(pow10.get_mpz_t(), 10,
                      static_cast<unsigned long>(-eps.exponent_));
        lhs *= pow10;
    }
    return lhs >= rhs;
}

bool Decimal::within_rel_tolerance(const Decimal& observed,
                                   const Decimal& expected,
                                   const Decimal& tol) {
    if (expected.is_zero()) return observed.is_zero();
    std::int32_t base = std::min(observed.exponent_, expected.exponent_);
    mpz_class diff =
        ::abs(aligned_mantissa(observed, base) - aligned_mantissa(expected, base));
    mpz_class bound =
        mpz_class(static_cast<long>(std::llabs(tol.mantissa_))) *
        ::abs(aligned_mantissa(expected, base));
    mpz_class lhs = diff;
    if (tol.exponent_ > 0) {
        mpz_class pow10;
        mpz_ui_pow_ui(pow10.get_mpz_t(), 10,
                      static_cast<unsigned long>(tol.exponent_));
        bound *= pow10;
    } else if (tol.exponent_ < 0) {
        mpz_class pow10;
        mpz_ui_pow_ui(pow10.get_mpz_t(), 10,
                      static_cast<unsigned long>(-tol.exponent_));
        lhs *= pow10;
    }
    return lhs <= bound;
}

std::string Decimal::to_string() const {
    if (mantissa_ == 0) return "0";
    std::string digits = std::to_string(mantissa_ < 0 ? -mantissa_ : mantissa_);
    std::string out = mantissa_ < 0 ? "-" : "";
    if (exponent_ >= 0) {
        out += digits;
        out.append(static_cast<std::size_t>(exponent_), '0');
        return out;
    }
    std::size_t frac = static_cast<std::size_t>(-exponent_);
    if (digits.size() > frac) {
        out += digits.substr(0, digits.size() - frac);
        out += '.';
        out += digits.substr(digits.size() - frac);
    } else {
        out += "0.";
        out.append(frac - digits.size(), '0');
        out += digits;
    }
    return out;
}

double Decimal::to_double() const {
    return static_cast<double>(mantissa_) * std::pow(10.0, exponent_);
}

std::optional<Decimal> Decimal::parse(const std::string& text) {
    if (text.empty()) return std::nullopt;
    std::size_t pos = 0;
    bool negative = false;
    if (text[pos] == '+' || text[pos] == '-') {
        negative = text[pos] == '-';
        ++pos;
    }
    std::int64_t mantissa = 0;
    std::int32_t exponent = 0;
    auto accumulate = [&mantissa](char c) {
        std::int64_t digit = c - '0';
        if (mantissa > (INT64_MAX - digit) / 10) return false;
        mantissa = mantissa * 10 + digit;
        return true;
    };
    std::size_t integer_digits = 0;
    while (pos < text.size() &&
           std::isdigit(static_cast<unsigned char>(text[pos]))) {
        if (!accumulate(text[pos])) return std::nullopt;
        ++integer_digits;
        ++pos;
    }
    if (integer_digits == 0) return std::nullopt;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        std::size_t fraction_digits = 0;
        while (pos < text.size() &&
               std::isdigit(static_cast<unsigned char>(text[pos]))) {
            if (!accumulate(text[pos])) return std::nullopt;
            --exponent;
            ++fraction_digits;
            ++pos;
        }
        if (fraction_digits == 0) return std::nullopt;
    }
    if (pos != text.size()) return std::nullopt;
    return Decimal(negative ? -mantissa : mantissa, exponent);
}

}  // namespace findrift
