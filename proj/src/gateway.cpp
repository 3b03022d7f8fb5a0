#include "ptod/gateway.hpp"

#include <chrono>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "ptod/util/sha256.hpp"
#include "ptod/util/strings.hpp"

namespace ptod::gateway {

using nlohmann::json;

std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& bindings) {
    std::string out = tmpl.role_preamble;
    if (!out.empty()) out += "\n\n";
    // Single left-to-right pass over the template body; inserted values are
    // never rescanned, so braces inside bindings stay literal.
    const std::string& body = tmpl.body;
    std::string rendered;
    rendered.reserve(body.size());
    size_t pos = 0;
    while (pos < body.size()) {
        size_t open = body.find('{', pos);
        if (open == std::string::npos) {
            rendered.append(body, pos, std::string::npos);
            break;
        }
        size_t close = body.find('}', open + 1);
        if (close == std::string::npos) {
            rendered.append(body, pos, std::string::npos);
            break;
        }
        rendered.append(body, pos, open - pos);
        auto it = bindings.find(body.substr(open + 1, close - open - 1));
        if (it != bindings.end()) {
            rendered += it->second;
            pos = close + 1;
        } else {
            rendered += '{';  // unbound token kept literal
            pos = open + 1;
        }
    }
    return out + rendered;
}

std::string cache_key(const CompletionRequest& request, const std::string& image_digest) {
    // json object keys are sorted, so the serialization is canonical
    json j;
    j["template_id"] = request.template_id;
    j["bindings"] = request.bindings;
    j["image_digest"] = image_digest;
    j["temperature"] = request.decoding.temperature;
    j["max_tokens"] = request.decoding.max_tokens;
    j["seed"] = request.decoding.seed;
    return sha256_hex(j.dump());
}

namespace {

std::string digest_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read image " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(content);
}

// two-level fan-out: <cache>/ab/cd/<key>.json
std::filesystem::path cache_path(const std::filesystem::path& dir, const std::string& key) {
    return dir / key.substr(0, 2) / key.substr(2, 2) / (key + ".json");
}

std::optional<CompletionResponse> read_cache_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) return std::nullopt;
    json j;
    try {
        in >> j;
    } catch (const json::exception&) {
        return std::nullopt;  // partial write from a crashed run; recompute
    }
    CompletionResponse r;
    r.text = j.value("text", "");
    r.finish_reason = j.value("finish_reason", "stop");
    r.provider = j.value("provider", "");
    return r;
}

void write_cache_file(const std::filesystem::path& file, const CompletionResponse& r) {
    std::filesystem::create_directories(file.parent_path());
    json j;
    j["text"] = r.text;
    j["finish_reason"] = r.finish_reason;
    j["provider"] = r.provider;
    // write to a temp name then rename so concurrent writers stay idempotent
    auto tmp = file;
    tmp += ".tmp." + std::to_string(
        std::hash<std::thread::id>{}(std::this_thread::get_id()) & 0xffff);
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write cache file " + tmp.string());
        out << j.dump();
    }
    std::error_code ec;
    std::filesystem::rename(tmp, file, ec);
    if (ec) std::filesystem::remove(tmp, ec);  // another writer won the race
}

}  // namespace

Gateway::Gateway(TemplateCatalog catalog, std::shared_ptr<Provider> provider,
                 GatewayOptions options)
    : catalog_(std::move(catalog)), provider_(std::move(provider)), options_(options) {
    for (const auto& [id, tmpl] : catalog_) {
        (void)id;
        tmpl.validate();
    }
}

const PromptTemplate& Gateway::template_of(const std::string& template_id) const {
    auto it = catalog_.find(template_id);
    if (it == catalog_.end()) throw PreconditionError("unknown template " + template_id);
    return it->second;
}

GatewayStats Gateway::stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
}

std::string Gateway::call_provider(const CompletionRequest& request, const PromptTemplate& tmpl,
                                   const std::string& rendered) {
    int backoff_ms = options_.backoff_initial_ms;
    for (int attempt = 0;; ++attempt) {
        {
            std::unique_lock lock(mutex_);
            slot_free_.wait(lock, [this] { return in_flight_ < options_.max_in_flight; });
            ++in_flight_;
            ++stats_.provider_calls;
        }
        try {
            std::string text = provider_->complete(request, tmpl, rendered);
            std::lock_guard lock(mutex_);
            --in_flight_;
            slot_free_.notify_one();
            return text;
        } catch (const TransportError&) {
            {
                std::lock_guard lock(mutex_);
                --in_flight_;
                slot_free_.notify_one();
            }
            if (attempt >= options_.max_transport_retries) throw;
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        } catch (...) {
            std::lock_guard lock(mutex_);
            --in_flight_;
            slot_free_.notify_one();
            throw;
        }
    }
}

std::string Gateway::call_with_contract(const CompletionRequest& request,
                                        const PromptTemplate& tmpl) {
    std::string rendered = render_prompt(tmpl, request.bindings);
    std::string last_text;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
        std::string prompt = rendered;
        if (attempt > 0)
            prompt += "\n\nYour previous answer did not follow the required format. "
                      "Answer again following the instructions exactly.";
        last_text = call_provider(request, tmpl, prompt);

        switch (tmpl.output_contract) {
            case OutputContract::free_text:
                return last_text;
            case OutputContract::single_label: {
                std::string label = normalize_label(last_text);
                for (const auto& allowed : tmpl.labels)
                    if (label == allowed) return allowed;
                break;
            }
            case OutputContract::json_fields: {
                json parsed = json::parse(last_text, nullptr, false);
                if (parsed.is_object()) return last_text;
                break;
            }
        }
    }
    throw ContractError("template " + request.template_id + ": output violated contract after " +
                            std::to_string(options_.max_retries) + " retries",
                        last_text);
}

CompletionResponse Gateway::complete(const CompletionRequest& request) {
    const PromptTemplate& tmpl = template_of(request.template_id);

    for (const auto& name : tmpl.placeholders)
        if (!request.bindings.count(name))
            throw PreconditionError("template " + request.template_id + ": missing binding {" +
                                    name + "}");
    if (tmpl.expects_image && !request.image)
        throw PreconditionError("template " + request.template_id + " expects an image");
    if (!tmpl.expects_image && request.image)
        throw PreconditionError("template " + request.template_id + " does not take an image");

    std::string image_digest;
    if (request.image) image_digest = digest_file(*request.image);
    std::string key = cache_key(request, image_digest);

    if (options_.cache_enabled) {
        // single-flight: one computation per key even under concurrent callers
        std::unique_lock lock(mutex_);
        for (;;) {
            auto it = memory_cache_.find(key);
            if (it != memory_cache_.end()) {
                ++stats_.cache_hits;
                ++stats_.completions;
                CompletionResponse r = it->second;
                r.cache_hit = true;
                return r;
            }
            if (options_.cache_dir) {
                lock.unlock();
                auto cached = read_cache_file(cache_path(*options_.cache_dir, key));
                lock.lock();
                if (cached && !memory_cache_.count(key)) {
                    memory_cache_[key] = *cached;
                    ++stats_.cache_hits;
                    ++stats_.completions;
                    CompletionResponse r = *cached;
                    r.cache_hit = true;
                    return r;
                }
                if (cached) continue;
            }
            if (!pending_.count(key)) break;
            pending_done_.wait(lock);
        }
        pending_.insert(key);
    }

    CompletionResponse response;
    try {
        response.text = call_with_contract(request, tmpl);
    } catch (...) {
        if (options_.cache_enabled) {
            std::lock_guard lock(mutex_);
            pending_.erase(key);
            pending_done_.notify_all();
        }
        throw;
    }
    response.finish_reason = "stop";
    response.provider = provider_->name();
    response.cache_hit = false;

    std::lock_guard lock(mutex_);
    ++stats_.completions;
    if (options_.cache_enabled) {
        memory_cache_[key] = response;
        ++stats_.distinct_keys;
        pending_.erase(key);
        pending_done_.notify_all();
        if (options_.cache_dir) write_cache_file(cache_path(*options_.cache_dir, key), response);
    }
    return response;
}

ImageMetadata Gateway::extract_image_metadata(const std::filesystem::path& image) {
    if (!std::filesystem::exists(image)) throw IoError("no such image: " + image.string());

    CompletionRequest request;
    request.template_id = "image_metadata";
    request.image = image;
    CompletionResponse r = complete(request);

    json j = json::parse(r.text, nullptr, false);
    if (!j.is_object()) throw ContractError("image_metadata: response is not a JSON object", r.text);
    ImageMetadata m;
    try {
        m.age_group = age_group_from_string(j.at("age_group").get<std::string>());
        m.gender = gender_from_string(j.at("gender").get<std::string>());
        m.formality = formality_from_string(j.at("formality").get<std::string>());
        m.emotion = emotion_from_string(j.at("emotion").get<std::string>());
        m.single_person = j.value("single_person", true);
        m.centered = j.value("centered", true);
        m.face_visible = j.value("face_visible", true);
        m.not_toddler = j.value("not_toddler", true);
    } catch (const json::exception& e) {
        throw ContractError(std::string("image_metadata: missing field: ") + e.what(), r.text);
    }
    return m;
}

}  // namespace ptod::gateway
