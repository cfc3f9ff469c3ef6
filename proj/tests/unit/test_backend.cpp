#include <gtest/gtest.h>

#include <atomic>
#include <deque>
#include <fstream>
#include <mutex>

#include "json.hpp"
#include "paths.hpp"
#include "persistlens/backend.hpp"
#include "persistlens/error.hpp"
#include "persistlens/rules.hpp"

using namespace persistlens;
using std::chrono::milliseconds;

namespace {

BackendRequest sample_request() {
    BackendRequest r;
    r.stage = "classification";
    r.model = "gpt-4o";
    r.system_instructions = "classify";
    r.user_payload = "{\"action\":\"added a run key\"}";
    r.response_schema = R"({"type":"object","properties":{"x":{"type":"string"}},"required":["x"],"additionalProperties":false})";
    return r;
}

std::string chat_reply(const std::string& content) {
    nlohmann::json j;
    j["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}});
    j["usage"] = {{"prompt_tokens", 11}, {"completion_tokens", 7}};
    return j.dump();
}

// Replies from a script; an entry with status 0 simulates a dropped connection.
class ScriptedTransport : public HttpTransport {
public:
    explicit ScriptedTransport(std::deque<HttpResult> script) : script_(std::move(script)) {}

    HttpResult post(const std::string& url, const std::vector<std::pair<std::string, std::string>>& headers,
                    const std::string& body) override {
        std::lock_guard lock(mu_);
        ++calls;
        last_url = url;
        last_headers = headers;
        last_body = body;
        if (script_.empty()) throw TransportError("script exhausted");
        auto next = script_.front();
        script_.pop_front();
        if (next.status == 0) throw TransportError("connection reset");
        return next;
    }

    int calls = 0;
    std::string last_url;
    std::vector<std::pair<std::string, std::string>> last_headers;
    std::string last_body;

private:
    std::mutex mu_;
    std::deque<HttpResult> script_;
};

struct SleepLog {
    std::vector<milliseconds> waits;
    RetryPolicy policy() {
        RetryPolicy p;
        p.sleep = [this](milliseconds d) { waits.push_back(d); };
        return p;
    }
};

class CountingBackend : public ModelBackend {
public:
    std::string backend_id() const override { return "counting"; }
    std::string model_id() const override { return "m"; }
    BackendResponse complete(const BackendRequest& r) override {
        ++calls;
        return {"echo:" + r.user_payload, {3, 4}, milliseconds{0}};
    }
    std::atomic<int> calls{0};
};

}  // namespace

TEST(CacheKey, StableAndSensitive) {
    const auto a = sample_request();
    EXPECT_EQ(a.cache_key(), sample_request().cache_key());
    EXPECT_EQ(a.cache_key().size(), 64u);
    auto b = a;
    b.user_payload += " ";
    EXPECT_NE(a.cache_key(), b.cache_key());
    b = a;
    b.temperature = 0.5;
    EXPECT_NE(a.cache_key(), b.cache_key());
    EXPECT_EQ(a.canonical_json().find("\"stage\""), 1u);
}

TEST(Sha256, KnownDigest) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(WireFormat, StrictSchemaBody) {
    const auto body = nlohmann::json::parse(ChatCompletionBackend::wire_body(sample_request()));
    EXPECT_EQ(body.at("model"), "gpt-4o");
    EXPECT_EQ(body.at("temperature"), 0.0);
    EXPECT_EQ(body.at("messages").size(), 2u);
    EXPECT_EQ(body.at("messages")[0].at("role"), "system");
    EXPECT_EQ(body.at("messages")[1].at("content"), sample_request().user_payload);
    const auto& fmt = body.at("response_format");
    EXPECT_EQ(fmt.at("type"), "json_schema");
    EXPECT_EQ(fmt.at("json_schema").at("strict"), true);
    EXPECT_EQ(fmt.at("json_schema").at("schema").at("additionalProperties"), false);
}

TEST(WireFormat, ResponseParsing) {
    const auto r = ChatCompletionBackend::parse_wire_response(chat_reply("{\"x\":\"y\"}"));
    EXPECT_EQ(r.text, "{\"x\":\"y\"}");
    EXPECT_EQ(r.usage.prompt_tokens, 11);
    EXPECT_EQ(r.usage.completion_tokens, 7);
    EXPECT_THROW(ChatCompletionBackend::parse_wire_response(
                     R"({"choices":[{"message":{"content":null,"refusal":"no"}}]})"),
                 TransportError);
    EXPECT_THROW(ChatCompletionBackend::parse_wire_response("{}"), TransportError);
    EXPECT_THROW(ChatCompletionBackend::parse_wire_response("not json"), TransportError);
}

TEST(Retry, RateLimitThenSuccess) {
    auto t = std::make_shared<ScriptedTransport>(std::deque<HttpResult>{{429, ""}, {200, chat_reply("ok")}});
    SleepLog log;
    ChatCompletionBackend backend({"http://localhost:9/v1/", "m", "k"}, t, log.policy());
    EXPECT_EQ(backend.complete(sample_request()).text, "ok");
    EXPECT_EQ(t->calls, 2);
    EXPECT_EQ(log.waits, std::vector<milliseconds>{milliseconds{1000}});
    EXPECT_EQ(t->last_url, "http://localhost:9/v1/chat/completions");
    bool auth = false;
    for (const auto& [k, v] : t->last_headers) auth = auth || (k == "Authorization" && v == "Bearer k");
    EXPECT_TRUE(auth);
}

TEST(Retry, ExhaustionRaisesTransportError) {
    auto t = std::make_shared<ScriptedTransport>(
        std::deque<HttpResult>{{503, ""}, {0, ""}, {500, ""}, {429, ""}, {200, chat_reply("late")}});
    SleepLog log;
    ChatCompletionBackend backend({"http://x", "m", ""}, t, log.policy());
    EXPECT_THROW(backend.complete(sample_request()), TransportError);
    EXPECT_EQ(t->calls, 4);
    EXPECT_EQ(log.waits, (std::vector<milliseconds>{milliseconds{1000}, milliseconds{2000}, milliseconds{4000}}));
}

TEST(Retry, ClientErrorIsImmediate) {
    auto t = std::make_shared<ScriptedTransport>(std::deque<HttpResult>{{400, "bad schema"}, {200, chat_reply("x")}});
    SleepLog log;
    ChatCompletionBackend backend({"http://x", "m", ""}, t, log.policy());
    try {
        backend.complete(sample_request());
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_NE(std::string(e.what()).find("400"), std::string::npos);
    }
    EXPECT_EQ(t->calls, 1);
    EXPECT_TRUE(log.waits.empty());
}

TEST(Cache, PutGetAndMismatch) {
    ResponseCache cache(test_support::scratch_dir("backend_cache"));
    const auto req = sample_request();
    EXPECT_FALSE(cache.get(req));
    cache.put(req, {"stored", {1, 2}, milliseconds{5}});
    const auto hit = cache.get(req);
    ASSERT_TRUE(hit);
    EXPECT_EQ(hit->text, "stored");
    EXPECT_EQ(hit->usage.completion_tokens, 2);
    EXPECT_TRUE(std::filesystem::exists(cache.path_for(req.cache_key())));
    auto other = req;
    other.model = "other";
    EXPECT_FALSE(cache.get(other));
}

TEST(Cache, CorruptEntryIsParseError) {
    ResponseCache cache(test_support::scratch_dir("backend_corrupt"));
    const auto req = sample_request();
    std::filesystem::create_directories(cache.dir());
    std::ofstream(cache.path_for(req.cache_key())) << "{ truncated";
    EXPECT_THROW(cache.get(req), ParseError);
}

TEST(Cache, ReadThroughCallsInnerOnce) {
    auto inner = std::make_shared<CountingBackend>();
    CachingBackend backend(ResponseCache(test_support::scratch_dir("backend_through")), inner);
    const auto a = backend.complete(sample_request());
    const auto b = backend.complete(sample_request());
    EXPECT_EQ(a.text, b.text);
    EXPECT_EQ(inner->calls.load(), 1);
    EXPECT_EQ(backend.backend_id(), "counting");
}

TEST(Cache, ReplayMissNamesKey) {
    CachingBackend replay(ResponseCache(test_support::scratch_dir("backend_replay")), std::string("gpt-4o"));
    EXPECT_EQ(replay.backend_id(), "replay");
    EXPECT_EQ(replay.model_id(), "gpt-4o");
    try {
        replay.complete(sample_request());
        FAIL();
    } catch (const CacheMissError& e) {
        EXPECT_EQ(e.key(), sample_request().cache_key());
    }
}

TEST(RuleBackend, KeywordVerdicts) {
    const auto v = classify_text("Registered a scheduled task that relaunches the beacon");
    EXPECT_TRUE(v.is_persistence);
    EXPECT_EQ(v.label, "Scheduled Task/Job");
    EXPECT_FALSE(classify_text("ran an nmap sweep").is_persistence);
    EXPECT_EQ(rule_description("\n   first line  \nsecond"), "first line");
    for (const auto& rule : persistence_rules()) {
        for (const auto& ex : rule.examples) EXPECT_EQ(classify_text(ex).label, rule.label) << ex;
    }
    auto backend = make_rule_backend();
    EXPECT_EQ(backend->model_id(), kRuleModelId);
}

TEST(ApiConfig, EnvironmentOverlay) {
    ::setenv("LLM_MODEL", "local-model", 1);
    ::setenv("LLM_API_KEY", "", 1);
    ApiConfig defaults;
    defaults.api_key = "keep";
    const auto c = api_config_from_env(defaults);
    EXPECT_EQ(c.model, "local-model");
    EXPECT_EQ(c.api_key, "keep");
    ::unsetenv("LLM_MODEL");
    ::unsetenv("LLM_API_KEY");
}
