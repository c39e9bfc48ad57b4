#include "findrift/metrics.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>

#include "findrift/error.hpp"
#include "findrift/invariants.hpp"

namespace findrift {

namespace {

bool is_word_byte(unsigned char c) {
    return std::isalnum(c) != 0 || c == '_';
}

// Decodes UTF-8 into Unicode scalar values; each invalid byte decodes to
// itself so the function is total and deterministic on arbitrary input.
std::vector<std::uint32_t> utf8_codepoints(const std::string& s) {
    std::vector<std::uint32_t> cps;
    cps.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char b0 = static_cast<unsigned char>(s[i]);
        std::size_t len = 0;
        std::uint32_t cp = 0;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        }
        bool valid = len > 0 && i + len <= s.size();
        if (valid) {
            for (std::size_t k = 1; k < len; ++k) {
                unsigned char bk = static_cast<unsigned char>(s[i + k]);
                if ((bk & 0xC0) != 0x80) {
                    valid = false;
                    break;
                }
                cp = (cp << 6) | (bk & 0x3F);
            }
        }
        if (!valid) {
            cps.push_back(b0);
            ++i;
        } else {
            cps.push_back(cp);
            i += len;
        }
    }
    return cps;
}

// Currency symbols stripped during number canonicalization. Returns the byte
// length of the symbol at `pos`, or 0.
std::size_t currency_symbol_len(const std::string& text, std::size_t pos) {
    if (pos >= text.size()) return 0;
    unsigned char c = static_cast<unsigned char>(text[pos]);
    if (c == '$') return 1;
    // U+00A3 POUND SIGN: C2 A3
    if (c == 0xC2 && pos + 1 < text.size() &&
        static_cast<unsigned char>(text[pos + 1]) == 0xA3)
        return 2;
    // U+20AC EURO SIGN: E2 82 AC
    if (c == 0xE2 && pos + 2 < text.size() &&
        static_cast<unsigned char>(text[pos + 1]) == 0x82 &&
        static_cast<unsigned char>(text[pos + 2]) == 0xAC)
        return 3;
    return 0;
}

struct NumberMatch {
    Decimal value;
    std::size_t end = 0;
};

// Attempts to read one numeric literal starting exactly at `start`. The
// grammar: optional '(' (accounting negative), sign and currency symbol in
// either order, digits with comma thousands-groups, optional fraction,
// optional '%' or K/M/B scale suffix, closing ')'. A match is rejected when
// followed by a letter or underscore (so "10ms" is not a number), except
// after '%' or ')'.
std::optional<NumberMatch> try_number(const std::string& text,
                                      std::size_t start) {
    std::size_t pos = start;
    const std::size_t n = text.size();
    bool paren = false;
    bool negative = false;

    if (pos < n && text[pos] == '(') {
        paren = true;
        ++pos;
    }
    bool saw_sign = false;
    bool saw_currency = false;
    for (int round = 0; round < 2 && pos < n; ++round) {
        if (!saw_sign && (text[pos] == '+' || text[pos] == '-')) {
            negative = text[pos] == '-';
            saw_sign = true;
            ++pos;
            continue;
        }
        std::size_t cur = currency_symbol_len(text, pos);
        if (!saw_currency && cur > 0) {
            saw_currency = true;
            pos += cur;
            continue;
        }
        break;
    }

    std::int64_t mantissa = 0;
    std::int32_t exponent = 0;
    bool any_digit = false;
    auto push_digit = [&](char c) -> bool {
        std::int64_t digit = c - '0';
        if (mantissa > (INT64_MAX - digit) / 10) return false;
        mantissa = mantissa * 10 + digit;
        any_digit = true;
        return true;
    };

    while (pos < n && std::isdigit(static_cast<unsigned char>(text[pos]))) {
        if (!push_digit(text[pos])) return std::nullopt;
        ++pos;
    }
    if (!any_digit) return std::nullopt;

    // Comma groups: a comma joins the number only when followed by exactly
    // three digits ("1,2345" ends at "1").
    while (pos < n && text[pos] == ',') {
        bool three_digits =
            pos + 3 < n &&
            std::isdigit(static_cast<unsigned char>(text[pos + 1])) &&
            std::isdigit(static_cast<unsigned char>(text[pos + 2])) &&
            std::isdigit(static_cast<unsigned char>(text[pos + 3]));
        bool bounded = pos + 4 >= n ||
                       !std::isdigit(static_cast<unsigned char>(text[pos + 4]));
        if (!(three_digits && bounded)) break;
        for (std::size_t k = 1; k <= 3; ++k) {
            if (!push_digit(text[pos + k])) return std::nullopt;
        }
        pos += 4;
    }

    if (pos + 1 < n && text[pos] == '.' &&
        std::isdigit(static_cast<unsigned char>(text[pos + 1]))) {
        ++pos;
        while (pos < n && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            if (!push_digit(text[pos])) return std::nullopt;
            --exponent;
            ++pos;
        }
    }

    bool suffix_exempts_boundary = false;
    if (pos < n && text[pos] == '%') {
        exponent -= 2;
        ++pos;
        suffix_exempts_boundary = true;
    } else if (pos < n) {
        char c = static_cast<char>(std::tolower(static_cast<unsigned char>(text[pos])));
        std::int32_t shift = c == 'k' ? 3 : c == 'm' ? 6 : c == 'b' ? 9 : 0;
        if (shift != 0) {
            bool bounded = pos + 1 >= n ||
                           (!std::isalpha(static_cast<unsigned char>(text[pos + 1])) &&
                            text[pos + 1] != '_');
            if (bounded) {
                exponent += shift;
                ++pos;
            }
        }
    }

    if (paren) {
        if (pos >= n || text[pos] != ')') return std::nullopt;
        ++pos;
        negative = true;
        suffix_exempts_boundary = true;
    }

    if (!suffix_exempts_boundary && pos < n) {
        unsigned char after = static_cast<unsigned char>(text[pos]);
        if (std::isalpha(after) || after == '_') return std::nullopt;
    }

    NumberMatch match;
    match.value = Decimal(negative ? -mantissa : mantissa, exponent);
    match.end = pos;
    return match;
}

}  // namespace

std::size_t edit_distance(const std::string& s1, const std::string& s2) {
    std::vector<std::uint32_t> a = utf8_codepoints(s1);
    std::vector<std::uint32_t> b = utf8_codepoints(s2);
    if (a.size() < b.size()) std::swap(a, b);  // b is the shorter row
    std::vector<std::size_t> prev(b.size() + 1), curr(b.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        curr[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            curr[j] = std::min({prev[j] + 1, curr[j - 1] + 1, sub});
        }
        std::swap(prev, curr);
    }
    return prev[b.size()];
}

double normalized_edit_distance(const std::string& s1, const std::string& s2) {
    std::size_t len1 = utf8_codepoints(s1).size();
    std::size_t len2 = utf8_codepoints(s2).size();
    std::size_t longest = std::max(len1, len2);
    if (longest == 0) return 0.0;
    return static_cast<double>(edit_distance(s1, s2)) /
           static_cast<double>(longest);
}

CitationSet extract_citations(const std::string& text) {
    CitationSet set;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '[') {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        if (j >= text.size() || text[j] < 'a' || text[j] > 'z') {
            ++i;
            continue;
        }
        ++j;
        std::size_t tail = 0;
        while (j < text.size() &&
               ((text[j] >= 'a' && text[j] <= 'z') ||
                (text[j] >= '0' && text[j] <= '9') || text[j] == '_')) {
            ++j;
            ++tail;
        }
        if (tail >= 2 && j < text.size() && text[j] == ']') {
            set.tags.insert(text.substr(i + 1, j - i - 1));
            i = j + 1;
        } else {
            ++i;
        }
    }
    return set;
}

std::vector<CanonicalNumber> canonicalize_numbers(const std::string& text) {
    std::vector<CanonicalNumber> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        char c = text[i];
        bool head = std::isdigit(static_cast<unsigned char>(c)) || c == '(' ||
                    c == '+' || c == '-' || currency_symbol_len(text, i) > 0;
        if (!head) {
            ++i;
            continue;
        }
        // A number may not continue an identifier: "abc123" and "x_1" have
        // word characters immediately before the candidate.
        if (i > 0 && is_word_byte(static_cast<unsigned char>(text[i - 1]))) {
            ++i;
            continue;
        }
        auto match = try_number(text, i);
        if (!match) {
            ++i;
            continue;
        }
        CanonicalNumber num;
        num.value = match->value;
        num.span_start = i;
        num.span_end = match->end;
        num.original_text = text.substr(i, match->end - i);
        out.push_back(std::move(num));
        i = match->end;
    }
    return out;
}

RunOutput make_run_output(std::string text, double latency_ms,
                          std::optional<std::uint64_t> generated_tokens,
                          std::optional<std::string> decision) {
    RunOutput out;
    out.citations = extract_citations(text);
    out.numbers = canonicalize_numbers(text);
    out.text = std::move(text);
    out.decision = std::move(decision);
    out.latency_ms = latency_ms;
    out.generated_tokens = generated_tokens;
    return out;
}

bool factual_drift(const RunOutput& o1, const RunOutput& o2,
                   const Decimal& eps) {
    if (eps.is_zero() || eps.is_negative()) {
        throw HarnessError(ErrorCode::InvalidRate,
                           "factual-drift tolerance must be positive");
    }
    if (o1.citations != o2.citations) return true;
    if (o1.numbers.size() != o2.numbers.size()) return true;
    for (std::size_t i = 0; i < o1.numbers.size(); ++i) {
        if (Decimal::rel_diff_at_least(o1.numbers[i].value, o2.numbers[i].value,
                                       eps)) {
            return true;
        }
    }
    return false;
}

IdentityResult identity_rate(const std::vector<RunOutput>& outputs,
                             double eps) {
    if (outputs.empty()) {
        throw HarnessError(ErrorCode::NoRuns, "identity rate of zero runs");
    }
    std::map<std::string, std::size_t> counts;
    for (const auto& out : outputs) ++counts[out.text];
    // Modal output; ties resolved toward the lexicographically smallest
    // string, which std::map iteration order delivers for free.
    const std::string* reference = nullptr;
    std::size_t best = 0;
    for (const auto& [text, count] : counts) {
        if (count > best) {
            best = count;
            reference = &text;
        }
    }
    IdentityResult result;
    result.reference_text = *reference;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        if (outputs[i].text == result.reference_text) {
            result.reference_index = i;
            break;
        }
    }
    std::size_t matched = 0;
    for (const auto& out : outputs) {
        if (normalized_edit_distance(out.text, result.reference_text) <= eps) {
            ++matched;
        }
    }
    result.rate =
        static_cast<double>(matched) / static_cast<double>(outputs.size());
    return result;
}

std::pair<double, double> wilson_ci(std::size_t successes, std::size_t n,
                                    double confidence) {
    if (n == 0) {
        throw HarnessError(ErrorCode::NoRuns, "Wilson interval of zero runs");
    }
    if (successes > n) {
        throw HarnessError(ErrorCode::InvalidRate,
                           "successes exceed run count");
    }
    if (!(confidence > 0.0 && confidence < 1.0)) {
        throw HarnessError(ErrorCode::InvalidRate,
                           "confidence must lie in (0,1)");
    }
    boost::math::normal_distribution<double> normal;
    double z = boost::math::quantile(normal, 0.5 + confidence / 2.0);
    double nn = static_cast<double>(n);
    double p = static_cast<double>(successes) / nn;
    double z2 = z * z;
    double denom = 1.0 + z2 / nn;
    double center = (p + z2 / (2.0 * nn)) / denom;
    double half =
        z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    double low = std::max(0.0, center - half);
    double high = std::min(1.0, center + half);
    return {low, high};
}

double fisher_exact_2x2(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                        std::uint64_t d) {
    if (a + b + c + d == 0) {
        throw HarnessError(ErrorCode::DegenerateTable,
                           "all-zero contingency table");
    }
    const std::uint64_t r1 = a + b;
    const std::uint64_t r2 = c + d;
    const std::uint64_t c1 = a + c;

    auto table_weight = [&](std::uint64_t x) {
        // Unnormalized hypergeometric weight C(r1,x) * C(r2,c1-x); the
        // common denominator C(N,c1) cancels in comparisons.
        mpz_class w1, w2;
        mpz_bin_uiui(w1.get_mpz_t(), r1, x);
        mpz_bin_uiui(w2.get_mpz_t(), r2, c1 - x);
        return mpz_class(w1 * w2);
    };

    const std::uint64_t x_min = c1 > r2 ? c1 - r2 : 0;
    const std::uint64_t x_max = std::min(r1, c1);
    const mpz_class observed = table_weight(a);
    mpz_class numerator = 0;
    mpz_class denominator = 0;
    for (std::uint64_t x = x_min; x <= x_max; ++x) {
        mpz_class w = table_weight(x);
        denominator += w;
        if (w <= observed) numerator += w;
    }
    mpq_class p(numerator, denominator);
    p.canonicalize();
    return p.get_d();
}

ConditionStats aggregate_condition(const std::vector<RunOutput>& runs,
                                   const std::vector<InvariantVerdict>& verdicts,
                                   const Decimal& eps) {
    if (runs.empty()) {
        throw HarnessError(ErrorCode::NoRuns, "aggregating zero runs");
    }
    if (runs.size() != verdicts.size()) {
        throw HarnessError(ErrorCode::AlignmentError,
                           "runs and verdicts differ in length");
    }
    ConditionStats stats;
    stats.n = runs.size();

    IdentityResult identity = identity_rate(runs, 0.0);
    stats.identity_rate = identity.rate;
    stats.reference_text = identity.reference_text;
    const RunOutput& reference = runs[identity.reference_index];

    double drift_sum = 0.0;
    std::size_t factual = 0;
    std::size_t identical = 0;
    double latency_sum = 0.0;
    double tps_sum = 0.0;
    std::size_t tps_count = 0;
    for (const auto& run : runs) {
        if (run.text == identity.reference_text) ++identical;
        drift_sum += normalized_edit_distance(run.text, identity.reference_text);
        if (factual_drift(run, reference, eps)) ++factual;
        latency_sum += run.latency_ms;
        if (run.generated_tokens && run.latency_ms > 0.0) {
            tps_sum += static_cast<double>(*run.generated_tokens) * 1000.0 /
                       run.latency_ms;
            ++tps_count;
        }
    }
    stats.identical_count = identical;
    std::tie(stats.wilson_low, stats.wilson_high) =
        wilson_ci(identical, stats.n);
    double nn = static_cast<double>(stats.n);
    stats.mean_drift = drift_sum / nn;
    stats.factual_drift_rate = static_cast<double>(factual) / nn;
    stats.mean_latency_ms = latency_sum / nn;
    if (tps_count > 0) stats.tokens_per_sec = tps_sum / static_cast<double>(tps_count);

    std::size_t violations = 0;
    for (const auto& verdict : verdicts) {
        if (!verdict.passed) ++violations;
    }
    stats.schema_violation_rate = static_cast<double>(violations) / nn;

    // Decision flips: measured against the modal decision among the runs
    // that produced one; runs without a decision stay out of both sides.
    std::map<std::string, std::size_t> decisions;
    for (const auto& run : runs) {
        if (run.decision) ++decisions[*run.decision];
    }
    if (!decisions.empty()) {
        const std::string* modal = nullptr;
        std::size_t best = 0;
        std::size_t total = 0;
        for (const auto& [label, count] : decisions) {
            total += count;
            if (count > best) {
                best = count;
                modal = &label;
            }
        }
        stats.decision_flip_rate =
            static_cast<double>(total - decisions[*modal]) /
            static_cast<double>(total);
    }
    return stats;
}

}  // namespace findrift
