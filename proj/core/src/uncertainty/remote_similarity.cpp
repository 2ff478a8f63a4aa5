#include "uta/uncertainty/remote_similarity.hpp"

#include "http.hpp"
#include "uta/error.hpp"

#include <algorithm>

namespace uta::uq {

SimilarityFn remote_similarity(RemoteSimilarityOptions o) {
    const auto target_full = detail::parse_base_url(o.url);
    // The last path segment is the endpoint; the rest is the prefix.
    detail::HttpTarget target = target_full;
    std::string path = "/";
    if (const auto slash = target.prefix.rfind('/'); slash != std::string::npos) {
        path = target.prefix.substr(slash);
        target.prefix = target.prefix.substr(0, slash);
    }
    std::map<std::string, std::string> headers;
    if (!o.api_key.empty()) headers["Authorization"] = "Bearer " + o.api_key;
    return [target, path, headers, o](std::string_view a, std::string_view b) {
        if (a == b) return 1.0;
        const nlohmann::json body{{"a", std::string(a)}, {"b", std::string(b)}};
        const auto reply = detail::with_retries(o.max_attempts, std::chrono::milliseconds(100), [&] {
            return detail::post_json(target, path, body, headers, o.timeout);
        });
        if (!reply.contains("score") || !reply["score"].is_number()) {
            throw BackendError("similarity reply has no numeric score", 1, false);
        }
        return std::clamp(reply["score"].get<double>(), 0.0, 1.0);
    };
}

}  // namespace uta::uq
