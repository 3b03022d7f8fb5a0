#include "ptod/knowledge.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "ptod/errors.hpp"
#include "ptod/util/rng.hpp"
#include "ptod/util/sha256.hpp"
#include "ptod/util/strings.hpp"

namespace ptod::knowledge {

using nlohmann::json;

std::string to_string(KnowledgeSource s) {
    return s == KnowledgeSource::review ? "review" : "wiki";
}

KnowledgeSource knowledge_source_from_string(const std::string& s) {
    if (s == "review") return KnowledgeSource::review;
    if (s == "wiki") return KnowledgeSource::wiki;
    throw ValidationError("unknown knowledge source '" + s + "'");
}

MockEmbedder::MockEmbedder(int dim, uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim <= 0) throw PreconditionError("embedding dim must be positive");
}

Vec MockEmbedder::raw(const std::string& text) const {
    std::mt19937_64 rng(fnv1a64(text) ^ seed_);
    Vec v(dim_);
    for (int i = 0; i < dim_; ++i) v[i] = gaussian(rng);
    return v;
}

Vec MockEmbedder::embed(const std::string& text) const {
    if (text.empty()) throw PreconditionError("cannot embed empty text");
    std::string body = text;
    std::optional<std::string> tag;
    if (text.front() == '[') {
        auto close = text.find("] ");
        if (close != std::string::npos) {
            tag = text.substr(1, close - 1);
            body = text.substr(close + 2);
        }
    }
    Vec v = raw(body.empty() ? text : body);
    if (tag) v += kStyleAlpha * raw("style-offset:" + *tag);
    double norm = v.norm();
    if (norm == 0.0) return Vec::Unit(dim_, 0);
    return v / norm;
}

size_t KnowledgeStore::ingest(const std::filesystem::path& path, KnowledgeSource source) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open knowledge file " + path.string());
    size_t added = 0;
    std::string line;
    size_t record = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path.string() + " record " + std::to_string(record) + ": " + e.what());
        }
        std::string entity = canonical_entity(j.value("entity", ""));
        std::string text = trim(j.value("text", ""));
        if (text.empty())
            throw ValidationError(path.string() + " record " + std::to_string(record) +
                                  ": empty text");
        if (entity.empty())
            throw ValidationError(path.string() + " record " + std::to_string(record) +
                                  ": empty entity");
        KnowledgeSource record_source =
            j.contains("source") ? knowledge_source_from_string(j["source"].get<std::string>())
                                 : source;

        std::string dedup_key = entity + "\n" + text;
        if (!dedup_.count(dedup_key)) {
            KnowledgeEntry e;
            e.entry_id = sha256_hex(dedup_key).substr(0, 16);
            e.entity = entity;
            e.source = record_source;
            e.text = text;
            dedup_[dedup_key] = entries_.size();
            by_entity_[entity].push_back(entries_.size());
            entries_.push_back(std::move(e));
            ++added;
        }
        ++record;
    }
    embedder_ = nullptr;  // new entries invalidate the index
    return added;
}

size_t KnowledgeStore::entity_count() const { return by_entity_.size(); }

void KnowledgeStore::build_index(const Embedder& embedder) {
    for (auto& e : entries_) {
        e.embedding = embedder.embed(e.text);
        if (e.embedding->size() != embedder.dim())
            throw ValidationError("embedding dim mismatch for entry " + e.entry_id);
    }
    embedder_ = &embedder;
}

std::vector<KnowledgeEntry> KnowledgeStore::retrieve_top_k(const std::string& query_text,
                                                           const std::string& entity, int k,
                                                           bool include_wiki) const {
    if (k < 1) throw PreconditionError("retrieve_top_k: k must be >= 1");
    if (!embedder_) throw PreconditionError("retrieve_top_k: index not built");

    auto it = by_entity_.find(canonical_entity(entity));
    if (it == by_entity_.end()) return {};

    Vec query = embedder_->embed(query_text);
    std::vector<std::pair<double, size_t>> scored;
    for (size_t idx : it->second) {
        const auto& e = entries_[idx];
        if (e.source == KnowledgeSource::wiki && !include_wiki) continue;
        scored.emplace_back(cosine_similarity(query, *e.embedding), idx);
    }
    std::sort(scored.begin(), scored.end(), [this](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return entries_[a.second].entry_id < entries_[b.second].entry_id;
    });

    std::vector<KnowledgeEntry> out;
    for (size_t i = 0; i < scored.size() && i < static_cast<size_t>(k); ++i)
        out.push_back(entries_[scored[i].second]);
    return out;
}

}  // namespace ptod::knowledge
