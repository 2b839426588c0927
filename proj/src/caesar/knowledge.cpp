#include "caesar/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "caesar/error.hpp"
#include "caesar/http.hpp"
#include "caesar/text.hpp"

namespace caesar {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Chunking

std::vector<ChunkRange> chunk_ranges(std::size_t n_tokens, std::size_t size, std::size_t overlap) {
    if (size == 0 || overlap >= size) {
        throw Error(ErrorCode::InvalidArgument, "chunk_overlap must be smaller than chunk_size");
    }
    std::vector<ChunkRange> out;
    const std::size_t stride = size - overlap;
    for (std::size_t start = 0; start < n_tokens; start += stride) {
        std::size_t end = std::min(start + size, n_tokens);
        out.push_back({start, end});
        if (end == n_tokens) break;
    }
    return out;
}

std::vector<std::vector<std::string>> chunk_tokens(std::span<const std::string> tokens, std::size_t size,
                                                   std::size_t overlap) {
    std::vector<std::vector<std::string>> out;
    for (const auto& r : chunk_ranges(tokens.size(), size, overlap)) {
        out.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(r.begin),
                         tokens.begin() + static_cast<std::ptrdiff_t>(r.end));
    }
    return out;
}

std::vector<std::string> chunk_text(const std::string& text, std::int64_t chunk_size_tokens,
                                    std::int64_t chunk_overlap_tokens) {
    if (chunk_size_tokens <= 0 || chunk_overlap_tokens < 0 || chunk_overlap_tokens >= chunk_size_tokens) {
        throw Error(ErrorCode::InvalidArgument, "chunk_overlap must be smaller than chunk_size");
    }
    auto words = text::split_whitespace(text);
    auto size = std::max<std::int64_t>(1, text::tokens_to_words(chunk_size_tokens));
    auto overlap = std::min<std::int64_t>(text::tokens_to_words(chunk_overlap_tokens), size - 1);
    std::vector<std::string> out;
    for (auto& piece : chunk_tokens(words, static_cast<std::size_t>(size), static_cast<std::size_t>(overlap))) {
        out.push_back(text::join(piece, " "));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Embedding

void normalize(std::vector<double>& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    if (sq <= 0.0) return;
    double inv = 1.0 / std::sqrt(sq);
    for (double& x : v) x *= inv;
}

namespace {

bool is_zero(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

}  // namespace

std::vector<double> HashEmbedder::embed(const std::string& input) {
    std::vector<double> v(dim_, 0.0);
    auto words = text::terms(input);
    for (std::size_t n = 1; n <= std::max<std::size_t>(1, max_ngram_); ++n) {
        for (std::size_t i = 0; i + n <= words.size(); ++i) {
            std::string gram = words[i];
            for (std::size_t j = 1; j < n; ++j) gram += " " + words[i + j];
            std::uint64_t h = text::fnv1a64(gram);
            double sign = ((h >> 32) & 1U) ? -1.0 : 1.0;
            v[h % dim_] += sign;
        }
    }
    if (is_zero(v)) {
        // No terms (or exact cancellation): fall back to a single raw-text bucket.
        std::uint64_t h = text::fnv1a64(input);
        v[h % dim_] = 1.0;
    }
    normalize(v);
    return v;
}

OpenAiEmbedder::OpenAiEmbedder(std::string base_url, std::string api_key, std::string model, std::size_t dim)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), model_(std::move(model)), dim_(dim) {}

std::unique_ptr<OpenAiEmbedder> OpenAiEmbedder::from_env(const EnvLookup& env) {
    auto get = [&](const char* k) -> std::string {
        if (!env) return {};
        auto v = env(k);
        return v ? *v : std::string{};
    };
    std::string base = get("CAESAR_EMBED_BASE_URL");
    if (base.empty()) base = get("CAESAR_LLM_BASE_URL");
    if (base.empty()) base = "https://api.openai.com/v1";
    std::string key = get("CAESAR_LLM_API_KEY");
    if (key.empty()) key = get("OPENAI_API_KEY");
    std::string model = get("CAESAR_EMBED_MODEL");
    if (model.empty()) model = "text-embedding-3-large";
    std::size_t dim = 3072;
    if (auto d = get("CAESAR_EMBED_DIM"); !d.empty()) dim = static_cast<std::size_t>(std::stoul(d));
    return std::make_unique<OpenAiEmbedder>(base, key, model, dim);
}

std::vector<double> OpenAiEmbedder::embed(const std::string& input) {
    if (api_key_.empty()) {
        throw Error(ErrorCode::CredentialMissing, "no API key configured for embeddings");
    }
    json body = {{"model", model_}, {"input", input}};
    if (dim_ > 0) body["dimensions"] = dim_;
    auto res = http::request("POST", base_url_ + "/embeddings", {{"Authorization", "Bearer " + api_key_}},
                             body.dump(), "application/json", 120.0);
    if (res.status < 200 || res.status >= 300) {
        throw Error(ErrorCode::ProviderStatus, "embedding endpoint returned HTTP " + std::to_string(res.status));
    }
    json doc = json::parse(res.body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("data") || doc["data"].empty()) {
        throw Error(ErrorCode::ProviderStatus, "malformed embeddings response");
    }
    auto v = doc["data"][0]["embedding"].get<std::vector<double>>();
    if (v.empty()) throw Error(ErrorCode::ProviderStatus, "empty embedding vector");
    dim_ = v.size();
    normalize(v);
    return v;
}

// ---------------------------------------------------------------------------
// Knowledge base

bool MetadataFilter::matches(const EntryMetadata& m) const {
    if (min_step && m.step < *min_step) return false;
    if (max_step && m.step > *max_step) return false;
    if (min_depth && m.depth < *min_depth) return false;
    if (max_depth && m.depth > *max_depth) return false;
    if (source_url && m.source_url != *source_url) return false;
    if (phase && m.phase != *phase) return false;
    return true;
}

namespace {

std::string entry_id_for(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "kb-%06zu", index);
    return buf;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void check_entry(const KnowledgeEntry& e) {
    if (e.text.empty()) throw Error(ErrorCode::Validation, "knowledge entry " + e.entry_id + " has empty text");
    if (e.metadata.source_url.empty()) {
        throw Error(ErrorCode::Validation, "knowledge entry " + e.entry_id + " has no source_url");
    }
    double sq = 0.0;
    for (double x : e.embedding) sq += x * x;
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
        throw Error(ErrorCode::Validation, "knowledge entry " + e.entry_id + " embedding is not unit-norm");
    }
}

}  // namespace

std::vector<std::string> KnowledgeBase::add(const std::string& text, const EntryMetadata& metadata,
                                            std::int64_t chunk_size_tokens, std::int64_t chunk_overlap_tokens) {
    if (metadata.source_url.empty()) throw Error(ErrorCode::Validation, "knowledge entry needs a source_url");
    auto chunks = chunk_text(text, chunk_size_tokens, chunk_overlap_tokens);
    // Embed outside the lock; embedding may be a network call.
    std::vector<std::vector<double>> vecs;
    vecs.reserve(chunks.size());
    for (const auto& c : chunks) vecs.push_back(embedder_.embed(c));

    std::unique_lock lock(mu_);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        KnowledgeEntry e{entry_id_for(entries_.size()), std::move(chunks[i]), std::move(vecs[i]), metadata};
        ids.push_back(e.entry_id);
        entries_.push_back(std::move(e));
    }
    return ids;
}

void KnowledgeBase::insert(KnowledgeEntry entry) {
    check_entry(entry);
    std::unique_lock lock(mu_);
    if (entry.entry_id.empty()) entry.entry_id = entry_id_for(entries_.size());
    entries_.push_back(std::move(entry));
}

std::vector<ScoredEntry> KnowledgeBase::retrieve(const std::string& query, std::size_t k,
                                                 const MetadataFilter& filter) const {
    if (k == 0) return {};
    auto q = embedder_.embed(query);
    std::shared_lock lock(mu_);
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (!filter.matches(entries_[i].metadata)) continue;
        scored.emplace_back(dot(q, entries_[i].embedding), i);
    }
    auto better = [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    };
    std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);
    std::vector<ScoredEntry> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.push_back({entries_[scored[i].second], scored[i].first, scored[i].second});
    }
    return out;
}

std::size_t KnowledgeBase::size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
}

std::vector<KnowledgeEntry> KnowledgeBase::snapshot() const {
    std::shared_lock lock(mu_);
    return entries_;
}

std::vector<std::string> KnowledgeBase::source_urls() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& e : entries_) {
        if (seen.insert(e.metadata.source_url).second) out.push_back(e.metadata.source_url);
    }
    return out;
}

void KnowledgeBase::save_jsonl(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    std::shared_lock lock(mu_);
    for (const auto& e : entries_) {
        json j = {{"id", e.entry_id},
                  {"text", e.text},
                  {"metadata",
                   {{"source_url", e.metadata.source_url},
                    {"step", e.metadata.step},
                    {"depth", e.metadata.depth},
                    {"phase", e.metadata.phase}}},
                  {"embedding", e.embedding}};
        out << j.dump() << '\n';
    }
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

void KnowledgeBase::load_jsonl(const std::string& path, KnowledgeBase& into) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw Error(ErrorCode::Parse, path + ":" + std::to_string(lineno) + ": malformed entry");
        }
        try {
            KnowledgeEntry e;
            e.entry_id = j.at("id").get<std::string>();
            e.text = j.at("text").get<std::string>();
            const auto& m = j.at("metadata");
            e.metadata.source_url = m.at("source_url").get<std::string>();
            e.metadata.step = m.value("step", std::int64_t{0});
            e.metadata.depth = m.value("depth", std::int64_t{0});
            e.metadata.phase = m.value("phase", std::string("explore"));
            e.embedding = j.at("embedding").get<std::vector<double>>();
            into.insert(std::move(e));
        } catch (const json::exception& ex) {
            throw Error(ErrorCode::Parse, path + ":" + std::to_string(lineno) + ": " + ex.what());
        }
    }
}

// ---------------------------------------------------------------------------
// Rerank

double lexical_overlap(const std::string& query, const std::string& doc) {
    std::map<std::string, int> qcount;
    for (auto& t : text::terms(query)) {
        if (!text::is_stopword(t)) ++qcount[t];
    }
    if (qcount.empty()) return 0.0;
    std::set<std::string> dterms;
    for (auto& t : text::terms(doc)) dterms.insert(std::move(t));
    double score = 0.0;
    for (const auto& [t, c] : qcount) {
        if (dterms.count(t)) score += c;
    }
    return score;
}

std::vector<ScoredEntry> rerank(const std::string& query, std::vector<ScoredEntry> entries, std::size_t n) {
    std::vector<std::pair<double, std::size_t>> keyed;
    keyed.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) keyed.emplace_back(lexical_overlap(query, entries[i].entry.text), i);
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<ScoredEntry> out;
    std::size_t take = std::min(n, keyed.size());
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(std::move(entries[keyed[i].second]));
    return out;
}

// ---------------------------------------------------------------------------
// Episodic memory

const char* to_string(MoveAction a) {
    switch (a) {
        case MoveAction::Explore: return "explore";
        case MoveAction::Backtrack: return "backtrack";
        case MoveAction::WebSearch: return "web_search";
    }
    return "explore";
}

MoveAction move_action_from_string(const std::string& s) {
    auto l = text::to_lower(s);
    if (l == "explore") return MoveAction::Explore;
    if (l == "backtrack") return MoveAction::Backtrack;
    if (l == "web_search" || l == "websearch") return MoveAction::WebSearch;
    throw Error(ErrorCode::Parse, "unknown move action: " + s);
}

std::vector<std::string> extract_keywords(const std::string& input, std::size_t max_terms) {
    std::unordered_map<std::string, std::pair<int, std::size_t>> counts;  // term -> (count, first index)
    std::size_t idx = 0;
    for (auto& t : text::terms(input)) {
        if (t.size() < 3 || text::is_stopword(t)) continue;
        auto [it, fresh] = counts.try_emplace(t, 0, idx++);
        ++it->second.first;
    }
    std::vector<std::pair<std::string, std::pair<int, std::size_t>>> v(counts.begin(), counts.end());
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        if (a.second.first != b.second.first) return a.second.first > b.second.first;
        return a.second.second < b.second.second;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size() && i < max_terms; ++i) out.push_back(v[i].first);
    return out;
}

void EpisodicMemory::record(EpisodicRecord rec) {
    std::vector<std::string> kws;
    std::set<std::string> seen;
    for (const auto& k : rec.keywords) {
        auto l = text::to_lower(text::trim(k));
        if (!l.empty() && seen.insert(l).second) kws.push_back(std::move(l));
    }
    rec.keywords = std::move(kws);

    std::unique_lock lock(mu_);
    if (rec.action == MoveAction::Backtrack) {
        auto it = parent_of_.find(rec.from_url);
        if (it == parent_of_.end()) {
            if (rec.to_url && !rec.to_url->empty()) {
                throw Error(ErrorCode::Validation, "backtrack from root " + rec.from_url + " cannot land on " + *rec.to_url);
            }
        } else if (!rec.to_url || *rec.to_url != it->second) {
            throw Error(ErrorCode::Validation, "backtrack from " + rec.from_url + " must land on its parent " +
                                                   it->second);
        }
    } else if (rec.to_url && !rec.to_url->empty()) {
        parent_of_.try_emplace(*rec.to_url, rec.from_url);
    }
    records_.push_back(std::move(rec));
}

void EpisodicMemory::rename_url(const std::string& from, const std::string& to) {
    std::unique_lock lock(mu_);
    if (auto it = parent_of_.find(from); it != parent_of_.end()) {
        std::string parent = it->second;
        parent_of_.erase(it);
        parent_of_[to] = parent;
    }
    for (auto& [child, parent] : parent_of_) {
        if (parent == from) parent = to;
    }
}

std::vector<EpisodicRecord> EpisodicMemory::recall(const std::vector<std::string>& keywords) const {
    std::set<std::string> want;
    for (const auto& k : keywords) want.insert(text::to_lower(text::trim(k)));
    std::shared_lock lock(mu_);
    std::vector<EpisodicRecord> out;
    for (auto it = records_.rbegin(); it != records_.rend() && out.size() < window_; ++it) {
        bool hit = std::any_of(it->keywords.begin(), it->keywords.end(),
                               [&](const std::string& k) { return want.count(k) > 0; });
        if (hit) out.push_back(*it);
    }
    return out;
}

std::vector<EpisodicRecord> EpisodicMemory::records() const {
    std::shared_lock lock(mu_);
    return records_;
}

std::size_t EpisodicMemory::size() const {
    std::shared_lock lock(mu_);
    return records_.size();
}

void EpisodicMemory::save_jsonl(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    std::shared_lock lock(mu_);
    for (const auto& r : records_) {
        json j = {{"step", r.step},
                  {"from_url", r.from_url},
                  {"action", to_string(r.action)},
                  {"to_url", r.to_url ? json(*r.to_url) : json(nullptr)},
                  {"reasoning", r.reasoning},
                  {"keywords", r.keywords}};
        out << j.dump() << '\n';
    }
}

std::string format_memory_context(const std::vector<EpisodicRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += "- step " + std::to_string(r.step) + ": " + to_string(r.action) + " from " + r.from_url;
        if (r.to_url && !r.to_url->empty()) out += " to " + *r.to_url;
        if (!r.reasoning.empty()) out += " (" + text::collapse_whitespace(r.reasoning) + ")";
        out += "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

}  // namespace caesar
