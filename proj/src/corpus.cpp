#include "findrift/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "findrift/error.hpp"
#include "findrift/hash.hpp"

namespace findrift {

namespace {

bool is_alnum(unsigned char c) { return std::isalnum(c) != 0; }

std::string to_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// Distinct case-folded alphanumeric tokens.
std::set<std::string> tokenize(const std::string& text) {
    std::set<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (is_alnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.insert(current);
            current.clear();
        }
    }
    if (!current.empty()) tokens.insert(current);
    return tokens;
}

// Section headings recognized inside document bodies: a line starting with
// "Item <number><optional letter>" (case-insensitive), e.g. "Item 1A. Risk
// Factors". Returns (offset, priority) pairs in document order.
std::vector<std::pair<std::size_t, int>> scan_headings(const std::string& body) {
    std::vector<std::pair<std::size_t, int>> headings;
    std::size_t line_start = 0;
    while (line_start < body.size()) {
        std::size_t line_end = body.find('\n', line_start);
        if (line_end == std::string::npos) line_end = body.size();
        std::string line = body.substr(line_start, line_end - line_start);
        int priority = assign_section_priority(line);
        if (priority != 99) headings.emplace_back(line_start, priority);
        line_start = line_end + 1;
    }
    return headings;
}

int priority_at(const std::vector<std::pair<std::size_t, int>>& headings,
                std::size_t offset) {
    int priority = 99;
    for (const auto& [pos, rank] : headings) {
        if (pos > offset) break;
        priority = rank;
    }
    return priority;
}

constexpr std::size_t kBracketScanLimit = 64;

// If `end` would cut a citation tag in half, push it past the closing
// bracket. Tags are bounded in length, so both scans are capped.
std::size_t avoid_bracket_split(const std::string& body, std::size_t start,
                                std::size_t end) {
    if (end >= body.size()) return end;
    std::size_t open = std::string::npos;
    std::size_t scan_floor =
        end > kBracketScanLimit ? end - kBracketScanLimit : 0;
    if (scan_floor < start) scan_floor = start;
    for (std::size_t i = end; i > scan_floor; --i) {
        char c = body[i - 1];
        if (c == ']') break;  // a closed bracket before the cut: no split
        if (c == '[') {
            open = i - 1;
            break;
        }
    }
    if (open == std::string::npos) return end;
    std::size_t scan_ceil = std::min(body.size(), open + kBracketScanLimit);
    for (std::size_t i = end; i < scan_ceil; ++i) {
        if (body[i] == ']') return i + 1;
        if (body[i] == '[') break;  // nested open: not a tag, leave the cut
    }
    return end;
}

}  // namespace

int compare_scores(const Score& a, const Score& b) {
    // a.num/a.den <=> b.num/b.den without division; denominators are
    // positive. 128-bit products cannot overflow for token counts.
    unsigned __int128 lhs =
        static_cast<unsigned __int128>(a.numerator) * b.denominator;
    unsigned __int128 rhs =
        static_cast<unsigned __int128>(b.numerator) * a.denominator;
    if (lhs < rhs) return -1;
    if (lhs > rhs) return 1;
    return 0;
}

int assign_section_priority(const std::string& heading) {
    // Token-exact match of the leading "Item <N><letter?>" designator.
    std::size_t pos = 0;
    while (pos < heading.size() &&
           std::isspace(static_cast<unsigned char>(heading[pos])))
        ++pos;
    static const std::string kItem = "item";
    std::string word;
    while (pos < heading.size() &&
           std::isalpha(static_cast<unsigned char>(heading[pos]))) {
        word.push_back(static_cast<char>(
            std::tolower(static_cast<unsigned char>(heading[pos]))));
        ++pos;
    }
    if (word != kItem) return 99;
    while (pos < heading.size() &&
           std::isspace(static_cast<unsigned char>(heading[pos])))
        ++pos;
    std::string designator;
    while (pos < heading.size() &&
           std::isdigit(static_cast<unsigned char>(heading[pos]))) {
        designator.push_back(heading[pos]);
        ++pos;
    }
    while (pos < heading.size() &&
           std::isalpha(static_cast<unsigned char>(heading[pos]))) {
        designator.push_back(static_cast<char>(
            std::tolower(static_cast<unsigned char>(heading[pos]))));
        ++pos;
    }
    // The designator must be a complete token: "Item 1A." and "Item 7"
    // qualify; "Item 10" must not resolve through the "1" entry (the digit
    // loop above consumes the full "10", which has no table entry).
    if (designator == "1a") return 1;
    if (designator == "7") return 2;
    if (designator == "8") return 3;
    if (designator == "1") return 4;
    if (designator == "3") return 5;
    return 99;
}

std::vector<Snippet> chunk_document(const SourceDocument& doc,
                                    std::size_t chunk_chars,
                                    std::size_t overlap_chars) {
    if (doc.body.empty()) {
        throw HarnessError(ErrorCode::EmptyDocument,
                           "cannot chunk empty document " + doc.doc_id);
    }
    if (chunk_chars == 0 || overlap_chars >= chunk_chars) {
        throw HarnessError(ErrorCode::InvalidChunking,
                           "overlap must be smaller than the chunk size");
    }
    auto headings = scan_headings(doc.body);
    std::vector<Snippet> snippets;
    std::size_t start = 0;
    std::size_t idx = 0;
    while (true) {
        std::size_t end = std::min(start + chunk_chars, doc.body.size());
        end = avoid_bracket_split(doc.body, start, end);
        Snippet snippet;
        char suffix[16];
        std::snprintf(suffix, sizeof(suffix), "_c%04zu", idx);
        snippet.snippet_id = doc.doc_id + suffix;
        snippet.doc_id = doc.doc_id;
        snippet.section_priority = priority_at(headings, start);
        snippet.chunk_idx = idx;
        snippet.char_span = {start, end};
        snippet.text = doc.body.substr(start, end - start);
        snippets.push_back(std::move(snippet));
        if (end >= doc.body.size()) break;
        start = end - overlap_chars;
        ++idx;
    }
    return snippets;
}

std::vector<ScoredSnippet> order_snippets(std::vector<ScoredSnippet> candidates) {
    std::sort(candidates.begin(), candidates.end(),
              [](const ScoredSnippet& a, const ScoredSnippet& b) {
                  int by_score = compare_scores(a.score, b.score);
                  if (by_score != 0) return by_score > 0;  // score descending
                  if (a.snippet.section_priority != b.snippet.section_priority)
                      return a.snippet.section_priority <
                             b.snippet.section_priority;
                  if (a.snippet.snippet_id != b.snippet.snippet_id)
                      return a.snippet.snippet_id < b.snippet.snippet_id;
                  return a.snippet.chunk_idx < b.snippet.chunk_idx;
              });
    return candidates;
}

std::vector<ScoredSnippet> retrieve(const std::string& query,
                                    const std::vector<Snippet>& corpus,
                                    std::size_t k) {
    if (k == 0) {
        throw HarnessError(ErrorCode::InvalidPlan, "retrieve needs k >= 1");
    }
    if (corpus.empty()) {
        throw HarnessError(ErrorCode::EmptyCorpus, "retrieve over empty corpus");
    }
    std::set<std::string> query_tokens = tokenize(query);
    std::vector<ScoredSnippet> scored;
    scored.reserve(corpus.size());
    for (const Snippet& snippet : corpus) {
        std::set<std::string> snippet_tokens = tokenize(snippet.text);
        std::uint64_t overlap = 0;
        for (const auto& token : query_tokens) {
            if (snippet_tokens.count(token) > 0) ++overlap;
        }
        Score score;
        score.numerator = query_tokens.empty() ? 0 : overlap;
        score.denominator = query_tokens.empty() ? 1 : query_tokens.size();
        scored.push_back({snippet, score});
    }
    scored = order_snippets(std::move(scored));
    if (scored.size() > k) scored.resize(k);
    return scored;
}

void validate_snippet_ids(const std::vector<Snippet>& snippets) {
    std::unordered_set<std::string> seen;
    for (const Snippet& snippet : snippets) {
        if (!seen.insert(snippet.snippet_id).second) {
            throw HarnessError(ErrorCode::DuplicateSnippetId,
                               "duplicate snippet_id " + snippet.snippet_id);
        }
    }
}

Corpus load_corpus(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) {
        throw HarnessError(ErrorCode::IoFailure,
                           "cannot open corpus manifest " + manifest_path);
    }
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw HarnessError(ErrorCode::ConfigError,
                           std::string("corpus manifest is not valid JSON: ") +
                               e.what());
    }
    Corpus corpus;
    corpus.version_id = manifest.at("version_id").get<std::string>();
    std::filesystem::path base =
        std::filesystem::path(manifest_path).parent_path();
    for (const auto& entry : manifest.at("documents")) {
        SourceDocument doc;
        doc.doc_id = entry.at("doc_id").get<std::string>();
        doc.title = entry.at("title").get<std::string>();
        doc.fiscal_year = entry.at("fiscal_year").get<int>();
        doc.version_id = corpus.version_id;
        if (doc.doc_id.empty()) {
            throw HarnessError(ErrorCode::ConfigError, "empty doc_id");
        }
        for (unsigned char c : doc.doc_id) {
            bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
            if (!ok) {
                throw HarnessError(ErrorCode::ConfigError,
                                   "doc_id must be lowercase [a-z0-9_]: " +
                                       doc.doc_id);
            }
        }
        std::filesystem::path body_path =
            base / entry.at("path").get<std::string>();
        std::ifstream body_in(body_path, std::ios::binary);
        if (!body_in) {
            throw HarnessError(ErrorCode::IoFailure,
                               "cannot open document body " + body_path.string());
        }
        std::ostringstream buffer;
        buffer << body_in.rdbuf();
        doc.body = buffer.str();
        doc.content_hash = sha256_hex(doc.body);
        std::string recorded = entry.at("sha256").get<std::string>();
        if (doc.content_hash != recorded) {
            throw HarnessError(ErrorCode::FixtureTampered,
                               "document " + doc.doc_id +
                                   " does not match its recorded hash");
        }
        corpus.documents.push_back(std::move(doc));
    }
    return corpus;
}

std::vector<Snippet> corpus_snippets(const Corpus& corpus,
                                     std::size_t chunk_chars,
                                     std::size_t overlap_chars) {
    std::vector<Snippet> all;
    for (const SourceDocument& doc : corpus.documents) {
        std::vector<Snippet> chunks =
            chunk_document(doc, chunk_chars, overlap_chars);
        all.insert(all.end(), std::make_move_iterator(chunks.begin()),
                   std::make_move_iterator(chunks.end()));
    }
    validate_snippet_ids(all);
    return all;
}

}  // namespace findrift
