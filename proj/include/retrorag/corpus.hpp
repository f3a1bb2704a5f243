#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace retrorag {

inline constexpr int kIndexFormatVersion = 1;

struct Document {
    std::string id;
    std::string title;
    std::string text;
};

// A fixed-size token window of a document. passage_id is "<doc id>#<ordinal>".
struct Passage {
    std::string passage_id;
    std::string doc_id;
    std::size_t ordinal = 0;
    std::string title;
    std::string text;
    std::size_t token_count = 0;

    bool operator==(const Passage&) const = default;
};

std::string make_passage_id(std::string_view doc_id, std::size_t ordinal);

// Splits the document body into windows of chunk_size tokens. Each passage's
// text is the original surface span from its first token to its last.
std::vector<Passage> chunk_document(const Document& doc, std::size_t chunk_size);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct IndexOptions {
    std::size_t chunk_size = 100;
    Bm25Params bm25;
    // Index the title tokens alongside each passage (they do not count toward
    // chunk_size, but do count toward the BM25 length normalization).
    bool index_titles = true;
};

struct Posting {
    std::uint32_t passage;  // dense ordinal; ordinals follow passage_id order
    std::uint32_t tf;
};

struct Hit {
    Passage passage;
    double score = 0.0;
};

// Reads JSON-lines {"id","title","text"} records. Blank lines are skipped.
// Throws IngestError("line N: ...") on malformed records.
void read_corpus_jsonl(const std::filesystem::path& path,
                       const std::function<void(Document&&)>& sink);

class CorpusIndex {
public:
    class Builder {
    public:
        explicit Builder(IndexOptions options = {});

        // Throws IngestError on a duplicate or empty document id.
        void add(const Document& doc);
        CorpusIndex finish() &&;

    private:
        IndexOptions options_;
        std::vector<Passage> passages_;
        std::unordered_map<std::string, bool> seen_ids_;
    };

    CorpusIndex() = default;

    static CorpusIndex build(std::span<const Document> docs, IndexOptions options = {});
    static CorpusIndex load(const std::filesystem::path& dir);
    void save(const std::filesystem::path& dir) const;

    // Okapi BM25 of one passage; every query token occurrence contributes.
    // Throws LookupError for an unknown passage id.
    double bm25_score(std::span<const std::string> query_tokens, std::string_view passage_id) const;

    // Top-k passages with nonzero score, by score descending then passage_id
    // ascending. An empty or out-of-vocabulary query yields no hits.
    std::vector<Hit> retrieve(std::string_view query, std::size_t k) const;
    std::vector<Hit> retrieve_tokens(std::span<const std::string> query_tokens, std::size_t k) const;

    double idf(std::string_view term) const;
    std::size_t document_frequency(std::string_view term) const;
    std::span<const Posting> postings(std::string_view term) const;

    const Passage& passage(std::string_view passage_id) const;
    const Passage& passage_at(std::size_t ordinal) const { return passages_.at(ordinal); }
    std::uint32_t doc_length(std::string_view passage_id) const;
    std::span<const Passage> passages() const { return passages_; }
    std::size_t passage_count() const { return passages_.size(); }
    std::size_t vocabulary_size() const { return postings_.size(); }
    double avg_doc_length() const { return avg_doc_length_; }
    const IndexOptions& options() const { return options_; }

    // Tokens that are indexed for a passage (title tokens first when enabled).
    std::vector<std::string> indexed_tokens(const Passage& p) const;

private:
    double term_weight(double idf, std::uint32_t tf, std::uint32_t length) const;
    std::size_t ordinal_of(std::string_view passage_id) const;
    void finalize();

    IndexOptions options_;
    std::vector<Passage> passages_;
    std::vector<std::uint32_t> doc_lengths_;
    std::unordered_map<std::string, std::uint32_t> ordinal_by_id_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    double avg_doc_length_ = 0.0;
};

}  // namespace retrorag
