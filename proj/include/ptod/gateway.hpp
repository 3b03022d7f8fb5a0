#pragma once
// Provider-agnostic completion gateway: prompt template catalog, response
// cache, rate limiting, retries, and output-contract enforcement.

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ptod/errors.hpp"
#include "ptod/types.hpp"

namespace ptod::gateway {

enum class OutputContract { free_text, single_label, json_fields };

struct PromptTemplate {
    std::string template_id;
    std::string role_preamble;
    std::string body;                     // named {placeholder} slots
    std::vector<std::string> placeholders;
    bool expects_image = false;
    OutputContract output_contract = OutputContract::free_text;
    std::vector<std::string> labels;      // label set for single_label
    bool local = false;                   // authored here rather than ported

    // every {name} appearing in body must be declared in placeholders
    void validate() const;
};

// id -> template; the default catalog covers every pipeline role.
using TemplateCatalog = std::map<std::string, PromptTemplate>;

TemplateCatalog default_catalog();

struct DecodingParams {
    double temperature = 0.0;   // reproducibility first
    int max_tokens = 512;
    uint64_t seed = 0;

    auto operator<=>(const DecodingParams&) const = default;
};

struct CompletionRequest {
    std::string template_id;
    std::map<std::string, std::string> bindings;
    std::optional<std::filesystem::path> image;
    DecodingParams decoding;
};

struct CompletionResponse {
    std::string text;
    std::string finish_reason;  // "stop" | "contract_retry_exhausted"
    std::string provider;
    bool cache_hit = false;
};

// Backend contract. complete() returns raw text; transport problems are
// signalled with TransportError and retried by the gateway with backoff.
class Provider {
  public:
    virtual ~Provider() = default;
    virtual std::string name() const = 0;
    virtual std::string complete(const CompletionRequest& request, const PromptTemplate& tmpl,
                                 const std::string& rendered_prompt) = 0;
};

// Deterministic test backend: a pure function of the cache key. Label
// templates answer from a keyword lexicon (or image tags), rewrite
// templates prefix the input with a bracketed persona tag.
std::shared_ptr<Provider> make_mock_provider();

struct GatewayOptions {
    std::optional<std::filesystem::path> cache_dir;  // nullopt: memory-only cache
    bool cache_enabled = true;
    int max_retries = 2;               // corrective retries on contract violation
    int max_transport_retries = 3;
    int backoff_initial_ms = 1000;     // doubles per transport retry
    int max_in_flight = 4;
};

struct GatewayStats {
    uint64_t provider_calls = 0;   // raw backend invocations, retries included
    uint64_t completions = 0;
    uint64_t cache_hits = 0;
    uint64_t distinct_keys = 0;
};

std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& bindings);

// Content hash of (template_id, bindings, image digest, decoding params).
std::string cache_key(const CompletionRequest& request, const std::string& image_digest);

class Gateway {
  public:
    Gateway(TemplateCatalog catalog, std::shared_ptr<Provider> provider, GatewayOptions options);

    // Validates the request against its template, consults the cache, then
    // calls the provider enforcing the template's output contract.
    CompletionResponse complete(const CompletionRequest& request);

    ImageMetadata extract_image_metadata(const std::filesystem::path& image);

    const PromptTemplate& template_of(const std::string& template_id) const;
    GatewayStats stats() const;

  private:
    std::string call_with_contract(const CompletionRequest& request, const PromptTemplate& tmpl);
    std::string call_provider(const CompletionRequest& request, const PromptTemplate& tmpl,
                              const std::string& rendered);

    TemplateCatalog catalog_;
    std::shared_ptr<Provider> provider_;
    GatewayOptions options_;

    mutable std::mutex mutex_;
    std::condition_variable slot_free_;
    std::condition_variable pending_done_;
    int in_flight_ = 0;
    std::map<std::string, CompletionResponse> memory_cache_;
    std::set<std::string> pending_;  // keys being computed right now
    GatewayStats stats_;
};

// Normalization applied to single_label responses before membership checks.
std::string normalize_label(const std::string& raw);

}  // namespace ptod::gateway
