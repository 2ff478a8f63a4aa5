#pragma once

#include <chrono>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace uta::detail {

struct HttpTarget {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path prefix without trailing slash, may be empty
};

/// Splits "http://host:8080/v1" into origin and prefix. ConfigError on a
/// URL without scheme or host.
HttpTarget parse_base_url(const std::string& url);

/// POSTs JSON and parses a JSON reply. Transport failures, 429 and 5xx raise
/// a retriable BackendError; other non-2xx statuses and unparseable bodies
/// a non-retriable one.
nlohmann::json post_json(const HttpTarget& target, const std::string& path, const nlohmann::json& body,
                         const std::map<std::string, std::string>& headers, std::chrono::milliseconds timeout);

/// Calls fn until it succeeds or max_attempts is reached. Retriable
/// BackendErrors are retried after a short doubling backoff; the error that
/// escapes carries the attempt count.
template <typename F>
auto with_retries(int max_attempts, std::chrono::milliseconds backoff, F&& fn) -> decltype(fn());

}  // namespace uta::detail

#include "http_retry.inl"
