#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "persistlens/backend.hpp"
#include "persistlens/error.hpp"

namespace persistlens {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("base URL lacks a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
public:
    explicit HttplibTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

    HttpResult post(const std::string& url,
                    const std::vector<std::pair<std::string, std::string>>& headers,
                    const std::string& body) override {
        const auto [origin, path] = split_url(url);
        httplib::Client client(origin);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_write_timeout(timeout_);
        httplib::Headers h;
        std::string content_type = "application/json";
        for (const auto& [k, v] : headers) {
            if (k == "Content-Type") {
                content_type = v;
            } else {
                h.emplace(k, v);
            }
        }
        auto res = client.Post(path, h, body, content_type);
        if (!res) throw TransportError("HTTP transport error: " + httplib::to_string(res.error()));
        return {res->status, res->body};
    }

private:
    std::chrono::seconds timeout_;
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport(std::chrono::seconds timeout) {
    return std::make_shared<HttplibTransport>(timeout);
}

}  // namespace persistlens
