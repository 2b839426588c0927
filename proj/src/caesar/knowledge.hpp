#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "caesar/config.hpp"

namespace caesar {

// ---------------------------------------------------------------------------
// Chunking

struct ChunkRange {
    std::size_t begin = 0;  // token index, inclusive
    std::size_t end = 0;    // exclusive
    bool operator==(const ChunkRange&) const = default;
};

// Sliding window of `size` tokens advancing by size - overlap. The last window
// ends at n; no window lies entirely inside its predecessor's overlap.
std::vector<ChunkRange> chunk_ranges(std::size_t n_tokens, std::size_t size, std::size_t overlap);

std::vector<std::vector<std::string>> chunk_tokens(std::span<const std::string> tokens, std::size_t size,
                                                   std::size_t overlap);

// Chunks text on whitespace words; token budgets are converted at 3/4 word per token.
std::vector<std::string> chunk_text(const std::string& text, std::int64_t chunk_size_tokens,
                                    std::int64_t chunk_overlap_tokens);

// ---------------------------------------------------------------------------
// Embedding

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string name() const = 0;
    virtual std::size_t dimension() const = 0;
    // Unit-norm vector of size dimension().
    virtual std::vector<double> embed(const std::string& text) = 0;
};

// Feature hashing of lowercased word n-grams (1..max_ngram) into `dim` signed
// buckets, L2-normalized. Deterministic across platforms.
class HashEmbedder : public Embedder {
public:
    explicit HashEmbedder(std::size_t dim = 256, std::size_t max_ngram = 1) : dim_(dim), max_ngram_(max_ngram) {}
    std::string name() const override { return "feature-hash-" + std::to_string(dim_); }
    std::size_t dimension() const override { return dim_; }
    std::vector<double> embed(const std::string& text) override;

private:
    std::size_t dim_;
    std::size_t max_ngram_;
};

// OpenAI-compatible /embeddings endpoint (CAESAR_EMBED_BASE_URL, CAESAR_EMBED_MODEL,
// key from CAESAR_LLM_API_KEY or OPENAI_API_KEY). Vectors are re-normalized.
class OpenAiEmbedder : public Embedder {
public:
    OpenAiEmbedder(std::string base_url, std::string api_key, std::string model, std::size_t dim);
    static std::unique_ptr<OpenAiEmbedder> from_env(const EnvLookup& env);
    std::string name() const override { return "openai-compatible:" + model_; }
    std::size_t dimension() const override { return dim_; }
    std::vector<double> embed(const std::string& text) override;

private:
    std::string base_url_;
    std::string api_key_;
    std::string model_;
    std::size_t dim_;
};

void normalize(std::vector<double>& v);

// ---------------------------------------------------------------------------
// Knowledge base

struct EntryMetadata {
    std::string source_url;
    std::int64_t step = 0;
    std::int64_t depth = 0;
    std::string phase = "explore";
    bool operator==(const EntryMetadata&) const = default;
};

struct KnowledgeEntry {
    std::string entry_id;
    std::string text;
    std::vector<double> embedding;
    EntryMetadata metadata;
};

struct MetadataFilter {
    std::optional<std::int64_t> min_step, max_step;
    std::optional<std::int64_t> min_depth, max_depth;
    std::optional<std::string> source_url;
    std::optional<std::string> phase;

    bool matches(const EntryMetadata& m) const;
};

struct ScoredEntry {
    KnowledgeEntry entry;
    double score = 0.0;
    std::size_t position = 0;  // insertion index in the knowledge base
};

// Exact-scan vector store. Reads may run concurrently; writes are exclusive.
class KnowledgeBase {
public:
    explicit KnowledgeBase(Embedder& embedder) : embedder_(embedder) {}

    // Chunks, embeds and stores `text`; returns the new entry ids.
    std::vector<std::string> add(const std::string& text, const EntryMetadata& metadata,
                                 std::int64_t chunk_size_tokens, std::int64_t chunk_overlap_tokens);
    // Stores a pre-embedded entry (loading). Validates norm and required fields.
    void insert(KnowledgeEntry entry);

    // Descending cosine similarity, ties by insertion order, filter applied first.
    std::vector<ScoredEntry> retrieve(const std::string& query, std::size_t k,
                                      const MetadataFilter& filter = {}) const;

    std::size_t size() const;
    bool empty() const { return size() == 0; }
    std::vector<KnowledgeEntry> snapshot() const;
    std::vector<std::string> source_urls() const;  // distinct, first-appearance order

    Embedder& embedder() const { return embedder_; }

    void save_jsonl(const std::string& path) const;
    static void load_jsonl(const std::string& path, KnowledgeBase& into);

private:
    Embedder& embedder_;
    mutable std::shared_mutex mu_;
    std::vector<KnowledgeEntry> entries_;
};

// Sum over distinct non-stopword query terms present in `text` of the term's
// count in the query.
double lexical_overlap(const std::string& query, const std::string& text);

// Stable descending lexical-overlap order, truncated to n.
std::vector<ScoredEntry> rerank(const std::string& query, std::vector<ScoredEntry> entries, std::size_t n);

// ---------------------------------------------------------------------------
// Episodic memory

enum class MoveAction { Explore, Backtrack, WebSearch };
const char* to_string(MoveAction a);
MoveAction move_action_from_string(const std::string& s);

struct EpisodicRecord {
    std::int64_t step = 0;
    std::string from_url;
    MoveAction action = MoveAction::Explore;
    std::optional<std::string> to_url;
    std::string reasoning;
    std::vector<std::string> keywords;
};

// Top `max_terms` non-stopword terms by count (ties by first appearance).
std::vector<std::string> extract_keywords(const std::string& text, std::size_t max_terms = 10);

class EpisodicMemory {
public:
    explicit EpisodicMemory(std::size_t recall_window = 10) : window_(recall_window) {}

    // Normalizes keywords. A backtrack must land on the parent recorded by the
    // move that created `from_url` (or nowhere, from a root); otherwise Error{Validation}.
    void record(EpisodicRecord rec);

    // Follows a node rename (redirect) in the parent bookkeeping.
    void rename_url(const std::string& from, const std::string& to);

    // Records sharing at least one keyword, most recent first, capped at the window.
    std::vector<EpisodicRecord> recall(const std::vector<std::string>& keywords) const;

    std::vector<EpisodicRecord> records() const;
    std::size_t size() const;

    void save_jsonl(const std::string& path) const;

private:
    std::size_t window_;
    mutable std::shared_mutex mu_;
    std::vector<EpisodicRecord> records_;
    std::map<std::string, std::string> parent_of_;
};

std::string format_memory_context(const std::vector<EpisodicRecord>& records);

}  // namespace caesar
