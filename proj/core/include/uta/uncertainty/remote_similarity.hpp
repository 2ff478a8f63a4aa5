#pragma once

#include "uta/uncertainty/uncertainty.hpp"

#include <chrono>
#include <string>

namespace uta::uq {

struct RemoteSimilarityOptions {
    std::string url;  // full scoring endpoint, e.g. http://localhost:8090/score
    std::string api_key;
    std::chrono::milliseconds timeout{30000};
    int max_attempts = 3;
};

/// Similarity from a scoring service: POST {"a": ..., "b": ...} returning
/// {"score": s}. Scores are clamped to [0, 1]. Suited to a cross-encoder.
SimilarityFn remote_similarity(RemoteSimilarityOptions options);

}  // namespace uta::uq
