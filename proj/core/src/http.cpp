#include "http.hpp"

#include "uta/error.hpp"

#include <httplib.h>

namespace uta::detail {

HttpTarget parse_base_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos || scheme_end == 0) {
        throw ConfigError("base URL must look like http://host[:port][/prefix], got '" + url + "'");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    HttpTarget t;
    t.origin = url.substr(0, path_start);
    if (t.origin.size() <= scheme_end + 3) {
        throw ConfigError("base URL has no host: '" + url + "'");
    }
    if (path_start != std::string::npos) {
        t.prefix = url.substr(path_start);
        while (!t.prefix.empty() && t.prefix.back() == '/') t.prefix.pop_back();
    }
    return t;
}

nlohmann::json post_json(const HttpTarget& target, const std::string& path, const nlohmann::json& body,
                         const std::map<std::string, std::string>& headers, std::chrono::milliseconds timeout) {
    httplib::Client client(target.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);

    const std::string full = target.prefix + path;
    auto res = client.Post(full, h, body.dump(), "application/json");
    if (!res) {
        throw BackendError("POST " + full + ": " + httplib::to_string(res.error()), 1, true);
    }
    if (res->status == 429 || res->status >= 500) {
        throw BackendError("POST " + full + ": HTTP " + std::to_string(res->status), 1, true);
    }
    if (res->status < 200 || res->status >= 300) {
        throw BackendError("POST " + full + ": HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200), 1,
                           false);
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
        throw BackendError("POST " + full + ": response is not JSON", 1, false);
    }
}

}  // namespace uta::detail
