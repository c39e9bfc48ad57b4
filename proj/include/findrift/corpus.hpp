#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace findrift {

struct SourceDocument {
    std::string doc_id;      // nonempty, lowercase [a-z0-9_]
    std::string title;
    int fiscal_year = 0;
    std::string body;
    std::string content_hash;  // sha256 of body
    std::string version_id;    // corpus version this document belongs to
};

struct Snippet {
    std::string snippet_id;  // globally unique, stable
    std::string doc_id;
    int section_priority = 99;  // lower = higher disclosure precedence
    std::size_t chunk_idx = 0;  // 0-based position within the document
    std::string text;
    std::pair<std::size_t, std::size_t> char_span;  // [start, end) into body
};

// Exact rational similarity score: overlap_count / query_token_count.
// Rationals keep tie comparisons exact — two snippets with equal scores must
// compare equal on the score key, never "almost equal" through a float.
struct Score {
    std::uint64_t numerator = 0;
    std::uint64_t denominator = 1;

    double value() const {
        return denominator == 0
                   ? 0.0
                   : static_cast<double>(numerator) /
                         static_cast<double>(denominator);
    }
};

// a <=> b by cross-multiplication: -1 when a < b, 0 equal, 1 when a > b.
int compare_scores(const Score& a, const Score& b);

struct ScoredSnippet {
    Snippet snippet;
    Score score;
};

struct Corpus {
    std::string version_id;
    std::vector<SourceDocument> documents;
};

// Sliding character window with overlap. Windows never end inside a
// citation tag's square brackets (the window extends past the closing
// bracket; tags are short, so the scan is capped at 64 chars). Snippets
// inherit the section priority of the heading in effect at their start.
std::vector<Snippet> chunk_document(const SourceDocument& doc,
                                    std::size_t chunk_chars,
                                    std::size_t overlap_chars);

// Disclosure-precedence rank for an annual-report section heading. Fixed
// table: Item 1A -> 1, Item 7 -> 2, Item 8 -> 3, Item 1 -> 4, Item 3 -> 5,
// anything else -> 99. Matching is token-exact ("Item 10" is not "Item 1").
int assign_section_priority(const std::string& heading);

// Multi-key total order: score desc, section_priority asc, snippet_id asc
// (bytewise), chunk_idx asc. A permutation of the input.
std::vector<ScoredSnippet> order_snippets(std::vector<ScoredSnippet> candidates);

// Case-folded token-overlap scoring (|query ∩ snippet| / |query| on distinct
// alphanumeric tokens) followed by order_snippets; returns the best
// min(k, corpus size) snippets. Pure in (query, corpus-as-set, k).
std::vector<ScoredSnippet> retrieve(const std::string& query,
                                    const std::vector<Snippet>& corpus,
                                    std::size_t k);

// Throws DuplicateSnippetId when ids collide (the ordering's totality
// depends on their uniqueness).
void validate_snippet_ids(const std::vector<Snippet>& snippets);

// Reads a corpus manifest (JSON: {version_id, documents:[{doc_id, title,
// fiscal_year, path, sha256}]}) and the document bodies; verifies each body
// against its recorded sha256 and validates doc ids.
Corpus load_corpus(const std::string& manifest_path);

// Chunks every document of the corpus with shared window parameters.
std::vector<Snippet> corpus_snippets(const Corpus& corpus,
                                     std::size_t chunk_chars,
                                     std::size_t overlap_chars);

}  // namespace findrift
