#include "persistlens/backend.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include <openssl/evp.h>

#include "json.hpp"
#include "persistlens/error.hpp"
#include "persistlens/fileio.hpp"

namespace persistlens {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

namespace {

ojson request_json(const BackendRequest& r) {
    ojson j;
    j["stage"] = r.stage;
    j["model"] = r.model;
    j["temperature"] = r.temperature;
    j["system_instructions"] = r.system_instructions;
    j["user_payload"] = r.user_payload;
    j["response_schema"] = r.response_schema;
    return j;
}

BackendRequest request_from_json(const ojson& j) {
    BackendRequest r;
    r.stage = j.at("stage").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.temperature = j.at("temperature").get<double>();
    r.system_instructions = j.at("system_instructions").get<std::string>();
    r.user_payload = j.at("user_payload").get<std::string>();
    r.response_schema = j.at("response_schema").get<std::string>();
    return r;
}

}  // namespace

std::string BackendRequest::canonical_json() const { return request_json(*this).dump(); }

std::string BackendRequest::cache_key() const { return sha256_hex(canonical_json()); }

ApiConfig api_config_from_env(ApiConfig defaults) {
    if (const char* v = std::getenv("LLM_BASE_URL"); v && *v) defaults.base_url = v;
    if (const char* v = std::getenv("LLM_MODEL"); v && *v) defaults.model = v;
    if (const char* v = std::getenv("LLM_API_KEY"); v && *v) defaults.api_key = v;
    return defaults;
}

// --- chat completions -------------------------------------------------------

ChatCompletionBackend::ChatCompletionBackend(ApiConfig config, std::shared_ptr<HttpTransport> transport,
                                             RetryPolicy retry)
    : config_(std::move(config)), transport_(std::move(transport)), retry_(std::move(retry)) {
    if (!transport_) throw ArgumentError("chat-completion backend needs a transport");
    if (!retry_.sleep) {
        retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
    while (!config_.base_url.empty() && config_.base_url.back() == '/') config_.base_url.pop_back();
}

std::string ChatCompletionBackend::wire_body(const BackendRequest& request) {
    ojson body;
    body["model"] = request.model;
    body["temperature"] = request.temperature;
    body["messages"] = ojson::array({
        ojson{{"role", "system"}, {"content", request.system_instructions}},
        ojson{{"role", "user"}, {"content", request.user_payload}},
    });
    ojson format;
    format["type"] = "json_schema";
    format["json_schema"] = ojson{{"name", request.stage},
                                  {"strict", true},
                                  {"schema", ojson::parse(request.response_schema)}};
    body["response_format"] = std::move(format);
    return body.dump();
}

BackendResponse ChatCompletionBackend::parse_wire_response(const std::string& body) {
    BackendResponse out;
    try {
        const auto doc = ojson::parse(body);
        const auto& message = doc.at("choices").at(0).at("message");
        if (message.contains("refusal") && message.at("refusal").is_string()) {
            throw TransportError("model refused: " + message.at("refusal").get<std::string>());
        }
        out.text = message.at("content").get<std::string>();
        if (doc.contains("usage") && doc.at("usage").is_object()) {
            const auto& usage = doc.at("usage");
            out.usage.prompt_tokens = usage.value("prompt_tokens", 0LL);
            out.usage.completion_tokens = usage.value("completion_tokens", 0LL);
        }
    } catch (const ojson::exception& e) {
        throw TransportError(std::string("unexpected chat-completion response: ") + e.what());
    }
    return out;
}

BackendResponse ChatCompletionBackend::complete(const BackendRequest& request) {
    const std::string url = config_.base_url + "/chat/completions";
    std::vector<std::pair<std::string, std::string>> headers = {{"Content-Type", "application/json"}};
    if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);
    const std::string body = wire_body(request);

    std::string last_error;
    for (std::size_t attempt = 0; attempt <= retry_.backoff.size(); ++attempt) {
        if (attempt > 0) retry_.sleep(retry_.backoff[attempt - 1]);
        const auto started = std::chrono::steady_clock::now();
        HttpResult result;
        try {
            result = transport_->post(url, headers, body);
        } catch (const TransportError& e) {
            last_error = e.what();
            continue;
        }
        if (result.status == 429 || result.status >= 500) {
            last_error = "HTTP " + std::to_string(result.status);
            continue;
        }
        if (result.status != 200) {
            throw TransportError("chat-completion request rejected with HTTP " +
                                 std::to_string(result.status) + ": " + result.body.substr(0, 300));
        }
        auto response = parse_wire_response(result.body);
        response.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
        return response;
    }
    throw TransportError("chat-completion request failed after " +
                         std::to_string(retry_.backoff.size() + 1) + " attempts: " + last_error);
}

// --- cache -----------------------------------------------------------------

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {}

fs::path ResponseCache::path_for(const std::string& key) const { return dir_ / (key + ".json"); }

std::optional<BackendResponse> ResponseCache::get(const BackendRequest& request) const {
    const auto key = request.cache_key();
    const auto path = path_for(key);
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) return std::nullopt;
    try {
        const auto doc = ojson::parse(read_text_file(path));
        if (doc.at("key").get<std::string>() != key) return std::nullopt;
        // Guards against a hash collision or a hand-edited file.
        if (request_from_json(doc.at("request")).canonical_json() != request.canonical_json()) {
            return std::nullopt;
        }
        BackendResponse out;
        const auto& resp = doc.at("response");
        out.text = resp.at("text").get<std::string>();
        out.usage.prompt_tokens = resp.at("usage").value("prompt_tokens", 0LL);
        out.usage.completion_tokens = resp.at("usage").value("completion_tokens", 0LL);
        return out;
    } catch (const ojson::exception& e) {
        throw ParseError(path.string(), 0, 0, std::string("corrupt cache entry: ") + e.what());
    }
}

void ResponseCache::put(const BackendRequest& request, const BackendResponse& response) const {
    const auto key = request.cache_key();
    ojson doc;
    doc["key"] = key;
    doc["model"] = request.model;
    doc["stage"] = request.stage;
    doc["request"] = request_json(request);
    doc["response"] = ojson{{"text", response.text},
                            {"usage", ojson{{"prompt_tokens", response.usage.prompt_tokens},
                                            {"completion_tokens", response.usage.completion_tokens}}}};
    write_file_atomic(path_for(key), doc.dump(2) + "\n");
}

CachingBackend::CachingBackend(ResponseCache cache, std::shared_ptr<ModelBackend> inner)
    : cache_(std::move(cache)), inner_(std::move(inner)) {
    if (!inner_) throw ArgumentError("caching backend needs an inner backend; use the replay constructor");
}

CachingBackend::CachingBackend(ResponseCache cache, std::string replay_model)
    : cache_(std::move(cache)), replay_model_(std::move(replay_model)) {}

std::string CachingBackend::backend_id() const { return inner_ ? inner_->backend_id() : "replay"; }

std::string CachingBackend::model_id() const { return inner_ ? inner_->model_id() : replay_model_; }

BackendResponse CachingBackend::complete(const BackendRequest& request) {
    if (auto hit = cache_.get(request)) return *hit;
    if (!inner_) {
        const auto key = request.cache_key();
        throw CacheMissError(key, "replay cache miss for " + request.stage + " request " + key +
                                      " (model " + request.model + ")");
    }
    auto response = inner_->complete(request);
    cache_.put(request, response);
    return response;
}

}  // namespace persistlens
