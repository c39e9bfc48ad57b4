#include <doctest.h>

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "findrift/metrics.hpp"
#include "findrift/prng.hpp"

using namespace findrift;

namespace {

// Independent oracle: plain memoized recursion over byte strings (the
// library decodes UTF-8; over ASCII inputs the two must agree).
std::size_t oracle_ed(const std::string& a, const std::string& b,
                      std::map<std::pair<std::string, std::string>,
                               std::size_t>& memo) {
    if (a.empty()) return b.size();
    if (b.empty()) return a.size();
    auto key = std::make_pair(a, b);
    auto found = memo.find(key);
    if (found != memo.end()) return found->second;
    std::size_t del = oracle_ed(a.substr(1), b, memo) + 1;
    std::size_t ins = oracle_ed(a, b.substr(1), memo) + 1;
    std::size_t sub = oracle_ed(a.substr(1), b.substr(1), memo) +
                      (a[0] == b[0] ? 0 : 1);
    std::size_t best = std::min({del, ins, sub});
    memo[key] = best;
    return best;
}

std::size_t oracle_ed(const std::string& a, const std::string& b) {
    std::map<std::pair<std::string, std::string>, std::size_t> memo;
    return oracle_ed(a, b, memo);
}

std::vector<std::string> strings_up_to(std::size_t max_len,
                                       const std::string& alphabet) {
    std::vector<std::string> out{""};
    std::vector<std::string> frontier{""};
    for (std::size_t len = 1; len <= max_len; ++len) {
        std::vector<std::string> next;
        for (const std::string& prefix : frontier) {
            for (char c : alphabet) {
                next.push_back(prefix + c);
            }
        }
        out.insert(out.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    return out;
}

}  // namespace

TEST_CASE("edit_distance canonical examples") {
    CHECK(edit_distance("", "") == 0);
    CHECK(edit_distance("abc", "abc") == 0);
    CHECK(edit_distance("abc", "") == 3);
    CHECK(edit_distance("", "abc") == 3);
    CHECK(edit_distance("kitten", "sitting") == 3);
    CHECK(edit_distance("flaw", "lawn") == 2);
    CHECK(edit_distance("a", "b") == 1);
    CHECK(edit_distance("ab", "ba") == 2);
}

TEST_CASE("edit_distance equals the recursive oracle on all pairs up to 4") {
    std::vector<std::string> pool = strings_up_to(4, "ab");
    for (const std::string& a : pool) {
        for (const std::string& b : pool) {
            CHECK(edit_distance(a, b) == oracle_ed(a, b));
        }
    }
}

TEST_CASE("edit_distance oracle agreement on random longer ASCII strings") {
    Xorshift64Star rng(2024);
    const std::string alphabet = "abcx ";
    for (int round = 0; round < 60; ++round) {
        std::string a, b;
        std::size_t la = rng.bounded(10), lb = rng.bounded(10);
        for (std::size_t i = 0; i < la; ++i)
            a += alphabet[rng.bounded(alphabet.size())];
        for (std::size_t i = 0; i < lb; ++i)
            b += alphabet[rng.bounded(alphabet.size())];
        CHECK(edit_distance(a, b) == oracle_ed(a, b));
    }
}

TEST_CASE("edit_distance satisfies the metric axioms") {
    Xorshift64Star rng(7);
    std::vector<std::string> samples;
    for (int i = 0; i < 24; ++i) {
        std::string s;
        std::size_t len = rng.bounded(8);
        for (std::size_t j = 0; j < len; ++j)
            s += static_cast<char>('a' + rng.bounded(3));
        samples.push_back(s);
    }
    for (const auto& a : samples) {
        CHECK(edit_distance(a, a) == 0);
        for (const auto& b : samples) {
            std::size_t d = edit_distance(a, b);
            CHECK(d == edit_distance(b, a));           // symmetry
            if (a != b) CHECK(d > 0);                  // identity
            for (const auto& c : samples) {            // triangle inequality
                CHECK(edit_distance(a, c) <= d + edit_distance(b, c));
            }
        }
    }
}

TEST_CASE("edit_distance counts Unicode scalar values, not bytes") {
    // "é" is two bytes in UTF-8 but one scalar value.
    CHECK(edit_distance("café", "cafe") == 1);
    CHECK(edit_distance("café", "café") == 0);
    CHECK(edit_distance("日本語", "日本") == 1);
    CHECK(edit_distance("日本語", "") == 3);
    // Mixed: replacing a two-byte scalar with an ASCII one is one edit.
    CHECK(edit_distance("aéb", "axb") == 1);
}

TEST_CASE("invalid UTF-8 bytes decode as themselves instead of failing") {
    std::string invalid = "a";
    invalid += static_cast<char>(0xFF);
    invalid += 'b';
    CHECK(edit_distance(invalid, "ab") == 1);
    CHECK(edit_distance(invalid, invalid) == 0);
}

TEST_CASE("normalized_edit_distance is in [0,1] with pinned anchors") {
    CHECK(normalized_edit_distance("", "") == 0.0);
    CHECK(normalized_edit_distance("abc", "abc") == 0.0);
    CHECK(normalized_edit_distance("abc", "xyz") == 1.0);
    CHECK(normalized_edit_distance("", "xyz") == 1.0);
    CHECK(normalized_edit_distance("abcd", "abce") == doctest::Approx(0.25));
    // Normalizes by scalar-value length: 1 edit over 4 scalars.
    CHECK(normalized_edit_distance("café", "cafx") == doctest::Approx(0.25));

    Xorshift64Star rng(99);
    for (int i = 0; i < 200; ++i) {
        std::string a, b;
        std::size_t la = rng.bounded(12), lb = rng.bounded(12);
        for (std::size_t j = 0; j < la; ++j)
            a += static_cast<char>('a' + rng.bounded(4));
        for (std::size_t j = 0; j < lb; ++j)
            b += static_cast<char>('a' + rng.bounded(4));
        double ned = normalized_edit_distance(a, b);
        CHECK(ned >= 0.0);
        CHECK(ned <= 1.0);
        if (a == b) CHECK(ned == 0.0);
    }
}
