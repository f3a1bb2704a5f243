#include "retrorag/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "retrorag/error.hpp"
#include "retrorag/text.hpp"

namespace retrorag {

namespace fs = std::filesystem;
using nlohmann::json;

std::string make_passage_id(std::string_view doc_id, std::size_t ordinal) {
    std::string id(doc_id);
    id += '#';
    id += std::to_string(ordinal);
    return id;
}

std::vector<Passage> chunk_document(const Document& doc, std::size_t chunk_size) {
    if (chunk_size == 0) throw ConfigError("chunk_size must be at least 1");
    const auto spans = tokenize_with_spans(doc.text);
    std::vector<Passage> out;
    for (std::size_t start = 0, ordinal = 0; start < spans.size(); start += chunk_size, ++ordinal) {
        const std::size_t stop = std::min(start + chunk_size, spans.size());
        Passage p;
        p.passage_id = make_passage_id(doc.id, ordinal);
        p.doc_id = doc.id;
        p.ordinal = ordinal;
        p.title = doc.title;
        p.text = doc.text.substr(spans[start].begin, spans[stop - 1].end - spans[start].begin);
        p.token_count = stop - start;
        out.push_back(std::move(p));
    }
    return out;
}

void read_corpus_jsonl(const fs::path& path, const std::function<void(Document&&)>& sink) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("corpus not found: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto where = "line " + std::to_string(line_no) + ": ";
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw IngestError(where + "invalid JSON (" + e.what() + ")");
        }
        if (!record.is_object()) throw IngestError(where + "expected a JSON object");
        Document doc;
        for (auto [field, target] : {std::pair{"id", &doc.id}, {"title", &doc.title}, {"text", &doc.text}}) {
            auto it = record.find(field);
            if (it == record.end()) {
                if (std::string_view(field) == "title") continue;
                throw IngestError(where + "missing field \"" + field + "\"");
            }
            if (it->is_string()) {
                *target = it->get<std::string>();
            } else if (it->is_number_integer() && std::string_view(field) == "id") {
                *target = std::to_string(it->get<long long>());
            } else {
                throw IngestError(where + "field \"" + field + "\" must be a string");
            }
        }
        if (doc.id.empty()) throw IngestError(where + "empty document id");
        sink(std::move(doc));
    }
}

CorpusIndex::Builder::Builder(IndexOptions options) : options_(options) {
    if (options_.chunk_size == 0) throw ConfigError("chunk_size must be at least 1");
}

void CorpusIndex::Builder::add(const Document& doc) {
    if (doc.id.empty()) throw IngestError("empty document id");
    if (!seen_ids_.emplace(doc.id, true).second) throw IngestError("duplicate document id " + doc.id);
    for (auto& p : chunk_document(doc, options_.chunk_size)) passages_.push_back(std::move(p));
}

CorpusIndex CorpusIndex::Builder::finish() && {
    CorpusIndex index;
    index.options_ = options_;
    index.passages_ = std::move(passages_);
    std::sort(index.passages_.begin(), index.passages_.end(),
              [](const Passage& a, const Passage& b) { return a.passage_id < b.passage_id; });
    index.finalize();
    return index;
}

CorpusIndex CorpusIndex::build(std::span<const Document> docs, IndexOptions options) {
    Builder builder(options);
    for (const auto& d : docs) builder.add(d);
    return std::move(builder).finish();
}

std::vector<std::string> CorpusIndex::indexed_tokens(const Passage& p) const {
    auto tokens = options_.index_titles ? tokenize(p.title) : std::vector<std::string>{};
    auto body = tokenize(p.text);
    tokens.insert(tokens.end(), std::make_move_iterator(body.begin()), std::make_move_iterator(body.end()));
    return tokens;
}

// Rebuilds every derived structure from passages_ (which must be sorted).
void CorpusIndex::finalize() {
    doc_lengths_.assign(passages_.size(), 0);
    ordinal_by_id_.clear();
    postings_.clear();
    double total = 0.0;
    for (std::uint32_t ord = 0; ord < passages_.size(); ++ord) {
        const auto& p = passages_[ord];
        if (!ordinal_by_id_.emplace(p.passage_id, ord).second) {
            throw IngestError("duplicate passage id " + p.passage_id);
        }
        std::map<std::string, std::uint32_t> tf;
        const auto tokens = indexed_tokens(p);
        for (const auto& t : tokens) ++tf[t];
        for (const auto& [term, count] : tf) postings_[term].push_back({ord, count});
        doc_lengths_[ord] = static_cast<std::uint32_t>(tokens.size());
        total += static_cast<double>(tokens.size());
    }
    avg_doc_length_ = passages_.empty() ? 0.0 : total / static_cast<double>(passages_.size());
}

std::size_t CorpusIndex::ordinal_of(std::string_view passage_id) const {
    auto it = ordinal_by_id_.find(std::string(passage_id));
    if (it == ordinal_by_id_.end()) throw LookupError("unknown passage id " + std::string(passage_id));
    return it->second;
}

const Passage& CorpusIndex::passage(std::string_view passage_id) const {
    return passages_[ordinal_of(passage_id)];
}

std::uint32_t CorpusIndex::doc_length(std::string_view passage_id) const {
    return doc_lengths_[ordinal_of(passage_id)];
}

std::span<const Posting> CorpusIndex::postings(std::string_view term) const {
    auto it = postings_.find(std::string(term));
    if (it == postings_.end()) return {};
    return it->second;
}

std::size_t CorpusIndex::document_frequency(std::string_view term) const { return postings(term).size(); }

double CorpusIndex::idf(std::string_view term) const {
    const auto n = static_cast<double>(passages_.size());
    const auto df = static_cast<double>(document_frequency(term));
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double CorpusIndex::term_weight(double idf, std::uint32_t tf, std::uint32_t length) const {
    const auto [k1, b] = options_.bm25;
    const double norm = 1.0 - b + b * static_cast<double>(length) / avg_doc_length_;
    const double f = static_cast<double>(tf);
    return idf * f * (k1 + 1.0) / (f + k1 * norm);
}

double CorpusIndex::bm25_score(std::span<const std::string> query_tokens, std::string_view passage_id) const {
    const auto ord = static_cast<std::uint32_t>(ordinal_of(passage_id));
    double score = 0.0;
    for (const auto& term : query_tokens) {
        const auto list = postings(term);
        auto it = std::lower_bound(list.begin(), list.end(), ord,
                                   [](const Posting& p, std::uint32_t o) { return p.passage < o; });
        if (it == list.end() || it->passage != ord) continue;
        score += term_weight(idf(term), it->tf, doc_lengths_[ord]);
    }
    return score;
}

std::vector<Hit> CorpusIndex::retrieve(std::string_view query, std::size_t k) const {
    const auto tokens = tokenize(query);
    return retrieve_tokens(tokens, k);
}

std::vector<Hit> CorpusIndex::retrieve_tokens(std::span<const std::string> query_tokens, std::size_t k) const {
    if (k == 0) throw ConfigError("retrieval k must be at least 1");
    std::vector<double> acc;
    std::vector<std::uint32_t> touched;
    for (const auto& term : query_tokens) {
        const auto list = postings(term);
        if (list.empty()) continue;
        if (acc.empty()) acc.assign(passages_.size(), 0.0);
        const double w = idf(term);
        for (const auto& p : list) {
            if (acc[p.passage] == 0.0) touched.push_back(p.passage);
            acc[p.passage] += term_weight(w, p.tf, doc_lengths_[p.passage]);
        }
    }
    // Ordinal order equals passage_id order, so the tie-break is on ordinals.
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        return acc[a] != acc[b] ? acc[a] > acc[b] : a < b;
    };
    const std::size_t n = std::min(k, touched.size());
    std::partial_sort(touched.begin(), touched.begin() + static_cast<std::ptrdiff_t>(n), touched.end(), better);
    std::vector<Hit> hits;
    hits.reserve(n);
    for (std::size_t i = 0; i < n; ++i) hits.push_back({passages_[touched[i]], acc[touched[i]]});
    return hits;
}

void CorpusIndex::save(const fs::path& dir) const {
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "passages.jsonl", std::ios::binary | std::ios::trunc);
        if (!out) throw IndexFormatError("cannot write " + (dir / "passages.jsonl").string());
        for (std::size_t ord = 0; ord < passages_.size(); ++ord) {
            const auto& p = passages_[ord];
            json j = {{"passage_id", p.passage_id}, {"doc_id", p.doc_id}, {"ordinal", p.ordinal},
                      {"title", p.title}, {"text", p.text}, {"token_count", p.token_count},
                      {"indexed_length", doc_lengths_[ord]}};
            out << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
        }
    }
    {
        std::vector<const std::string*> terms;
        terms.reserve(postings_.size());
        for (const auto& [term, _] : postings_) terms.push_back(&term);
        std::sort(terms.begin(), terms.end(), [](auto* a, auto* b) { return *a < *b; });
        std::ofstream out(dir / "postings.tsv", std::ios::binary | std::ios::trunc);
        if (!out) throw IndexFormatError("cannot write " + (dir / "postings.tsv").string());
        for (const auto* term : terms) {
            out << *term;
            for (const auto& p : postings_.at(*term)) out << '\t' << p.passage << ':' << p.tf;
            out << '\n';
        }
    }
    json manifest = {
        {"format_version", kIndexFormatVersion},
        {"chunk_size", options_.chunk_size},
        {"tokenizer", std::string(kTokenizerId)},
        {"k1", options_.bm25.k1},
        {"b", options_.bm25.b},
        {"index_titles", options_.index_titles},
        {"passage_count", passages_.size()},
        {"vocabulary_size", postings_.size()},
        {"avg_doc_length", avg_doc_length_},
    };
    std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw IndexFormatError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
}

CorpusIndex CorpusIndex::load(const fs::path& dir) {
    std::ifstream mf(dir / "manifest.json", std::ios::binary);
    if (!mf) throw IndexFormatError("no index manifest in " + dir.string());
    json manifest;
    try {
        manifest = json::parse(mf);
    } catch (const json::exception& e) {
        throw IndexFormatError(std::string("unreadable index manifest: ") + e.what());
    }
    const int version = manifest.value("format_version", -1);
    if (version != kIndexFormatVersion) {
        throw IndexFormatError("index format version " + std::to_string(version) + " is not supported (expected " +
                               std::to_string(kIndexFormatVersion) + ")");
    }
    const auto tokenizer = manifest.value("tokenizer", std::string{});
    if (tokenizer != kTokenizerId) {
        throw IndexFormatError("index was built with tokenizer \"" + tokenizer + "\", expected \"" +
                               std::string(kTokenizerId) + "\"");
    }
    CorpusIndex index;
    index.options_.chunk_size = manifest.at("chunk_size").get<std::size_t>();
    index.options_.bm25.k1 = manifest.at("k1").get<double>();
    index.options_.bm25.b = manifest.at("b").get<double>();
    index.options_.index_titles = manifest.at("index_titles").get<bool>();

    std::ifstream pin(dir / "passages.jsonl", std::ios::binary);
    if (!pin) throw IndexFormatError("missing passages.jsonl in " + dir.string());
    std::string line;
    std::vector<std::uint32_t> lengths;
    while (std::getline(pin, line)) {
        if (line.empty()) continue;
        const auto j = json::parse(line);
        Passage p;
        p.passage_id = j.at("passage_id").get<std::string>();
        p.doc_id = j.at("doc_id").get<std::string>();
        p.ordinal = j.at("ordinal").get<std::size_t>();
        p.title = j.at("title").get<std::string>();
        p.text = j.at("text").get<std::string>();
        p.token_count = j.at("token_count").get<std::size_t>();
        lengths.push_back(j.at("indexed_length").get<std::uint32_t>());
        index.passages_.push_back(std::move(p));
    }
    if (index.passages_.size() != manifest.at("passage_count").get<std::size_t>()) {
        throw IndexFormatError("passage count does not match manifest");
    }
    index.doc_lengths_ = std::move(lengths);
    double total = 0.0;
    for (std::uint32_t ord = 0; ord < index.passages_.size(); ++ord) {
        const auto& id = index.passages_[ord].passage_id;
        if (ord > 0 && !(index.passages_[ord - 1].passage_id < id)) {
            throw IndexFormatError("passages.jsonl is not sorted by passage id at " + id);
        }
        index.ordinal_by_id_.emplace(id, ord);
        total += index.doc_lengths_[ord];
    }
    index.avg_doc_length_ = index.passages_.empty() ? 0.0 : total / static_cast<double>(index.passages_.size());

    std::ifstream tin(dir / "postings.tsv", std::ios::binary);
    if (!tin) throw IndexFormatError("missing postings.tsv in " + dir.string());
    while (std::getline(tin, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string term;
        std::getline(fields, term, '\t');
        auto& list = index.postings_[term];
        std::string entry;
        while (std::getline(fields, entry, '\t')) {
            const auto colon = entry.find(':');
            if (colon == std::string::npos) throw IndexFormatError("bad posting \"" + entry + "\" for term " + term);
            const Posting posting{static_cast<std::uint32_t>(std::stoul(entry.substr(0, colon))),
                                  static_cast<std::uint32_t>(std::stoul(entry.substr(colon + 1)))};
            if (posting.passage >= index.passages_.size() || (!list.empty() && list.back().passage >= posting.passage)) {
                throw IndexFormatError("posting out of range or out of order for term " + term);
            }
            list.push_back(posting);
        }
    }
    if (index.postings_.size() != manifest.at("vocabulary_size").get<std::size_t>()) {
        throw IndexFormatError("vocabulary size does not match manifest");
    }
    return index;
}

}  // namespace retrorag
