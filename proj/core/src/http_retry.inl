#pragma once

#include "uta/error.hpp"

#include <thread>

namespace uta::detail {

template <typename F>
auto with_retries(int max_attempts, std::chrono::milliseconds backoff, F&& fn) -> decltype(fn()) {
    if (max_attempts < 1) max_attempts = 1;
    for (int attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch (const BackendError& e) {
            if (!e.retriable() || attempt >= max_attempts) {
                throw BackendError(e.what() + std::string(" (after ") + std::to_string(attempt) + " attempt" +
                                       (attempt == 1 ? "" : "s") + ")",
                                   attempt, e.retriable());
            }
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
}

}  // namespace uta::detail
