#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace persistlens {

struct TokenUsage {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
};

// One model call. Serializes with a fixed field order, so the cache key is a
// pure function of the request contents.
struct BackendRequest {
    std::string stage;  // "segmentation" or "classification"
    std::string model;
    double temperature = 0.0;
    std::string system_instructions;
    std::string user_payload;
    std::string response_schema;  // JSON Schema document, serialized

    std::string canonical_json() const;
    std::string cache_key() const;  // hex SHA-256 of canonical_json()
};

struct BackendResponse {
    std::string text;
    TokenUsage usage;
    std::chrono::milliseconds latency{0};
};

// Implementations must be safe to call from several threads at once.
class ModelBackend {
public:
    virtual ~ModelBackend() = default;

    virtual std::string backend_id() const = 0;
    virtual std::string model_id() const = 0;
    virtual BackendResponse complete(const BackendRequest& request) = 0;
};

std::string sha256_hex(std::string_view data);

// ---------------------------------------------------------------------------
// HTTP chat-completion backend

struct HttpResult {
    int status = 0;
    std::string body;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    // Throws TransportError when no HTTP response was received at all.
    virtual HttpResult post(const std::string& url,
                            const std::vector<std::pair<std::string, std::string>>& headers,
                            const std::string& body) = 0;
};

std::shared_ptr<HttpTransport> make_http_transport(std::chrono::seconds timeout = std::chrono::seconds{120});

struct ApiConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-4o";
    std::string api_key;
};

// Overlays LLM_BASE_URL, LLM_MODEL and LLM_API_KEY onto `defaults` when set.
ApiConfig api_config_from_env(ApiConfig defaults = {});

struct RetryPolicy {
    // One retry per element; the element is the wait before that retry.
    std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds{1000},
                                                   std::chrono::milliseconds{2000},
                                                   std::chrono::milliseconds{4000}};
    std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for
};

class ChatCompletionBackend final : public ModelBackend {
public:
    ChatCompletionBackend(ApiConfig config, std::shared_ptr<HttpTransport> transport,
                          RetryPolicy retry = {});

    std::string backend_id() const override { return "api"; }
    std::string model_id() const override { return config_.model; }
    BackendResponse complete(const BackendRequest& request) override;

    // Request body in the chat-completions wire format.
    static std::string wire_body(const BackendRequest& request);
    static BackendResponse parse_wire_response(const std::string& body);

private:
    ApiConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    RetryPolicy retry_;
};

// ---------------------------------------------------------------------------
// Response cache: one JSON file per request hash.

struct CacheEntry {
    std::string key;
    BackendRequest request;
    BackendResponse response;
};

class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<BackendResponse> get(const BackendRequest& request) const;
    // Atomic file replace; concurrent writers of one key leave one complete file.
    void put(const BackendRequest& request, const BackendResponse& response) const;

    std::filesystem::path path_for(const std::string& key) const;
    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path dir_;
};

// With an inner backend: read-through cache. Without one: replay only, and a
// miss raises CacheMissError.
class CachingBackend final : public ModelBackend {
public:
    CachingBackend(ResponseCache cache, std::shared_ptr<ModelBackend> inner);
    CachingBackend(ResponseCache cache, std::string replay_model);

    std::string backend_id() const override;
    std::string model_id() const override;
    BackendResponse complete(const BackendRequest& request) override;

private:
    ResponseCache cache_;
    std::shared_ptr<ModelBackend> inner_;
    std::string replay_model_;
};

}  // namespace persistlens
