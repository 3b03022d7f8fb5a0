#pragma once
// Grounding knowledge store: review/wiki entries, embeddings, and exact
// top-k cosine retrieval over a flat in-memory index.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ptod/math.hpp"

namespace ptod::knowledge {

enum class KnowledgeSource { review, wiki };

std::string to_string(KnowledgeSource s);
KnowledgeSource knowledge_source_from_string(const std::string& s);

struct KnowledgeEntry {
    std::string entry_id;   // content hash of (entity, text); stable across runs
    std::string entity;     // canonical name
    KnowledgeSource source = KnowledgeSource::review;
    std::string text;
    std::optional<Vec> embedding;
};

class Embedder {
  public:
    virtual ~Embedder() = default;
    virtual int dim() const = 0;
    virtual Vec embed(const std::string& text) const = 0;
};

// Deterministic hash-seeded embedder. Text with a leading bracketed style
// tag ("[tag] rest") embeds as the base vector of `rest` plus a scaled
// offset derived from the tag, so persona-tagged rewrites shift
// consistently per tag. Always unit norm.
class MockEmbedder final : public Embedder {
  public:
    explicit MockEmbedder(int dim = 384, uint64_t seed = 0);
    int dim() const override { return dim_; }
    Vec embed(const std::string& text) const override;

    static constexpr double kStyleAlpha = 0.25;

  private:
    Vec raw(const std::string& text) const;
    int dim_;
    uint64_t seed_;
};

class KnowledgeStore {
  public:
    // JSONL records {entity, text, source?}; `source` is the default for
    // records without one. Duplicate (entity, text) pairs collapse.
    // Returns the number of new entries stored.
    size_t ingest(const std::filesystem::path& path, KnowledgeSource source);

    size_t size() const { return entries_.size(); }
    const std::vector<KnowledgeEntry>& entries() const { return entries_; }
    size_t entity_count() const;

    // Single-writer phase; must run after all ingests and before retrieval.
    void build_index(const Embedder& embedder);

    // min(k, available) entries for the entity, by descending cosine
    // similarity to the query embedding; ties break by entry_id ascending.
    // Unknown entity yields an empty list. Wiki entries participate only
    // when include_wiki is set.
    std::vector<KnowledgeEntry> retrieve_top_k(const std::string& query_text,
                                               const std::string& entity, int k = 3,
                                               bool include_wiki = false) const;

  private:
    std::vector<KnowledgeEntry> entries_;
    std::map<std::string, std::vector<size_t>> by_entity_;
    std::map<std::string, size_t> dedup_;  // entity \n text -> index
    const Embedder* embedder_ = nullptr;
};

}  // namespace ptod::knowledge
