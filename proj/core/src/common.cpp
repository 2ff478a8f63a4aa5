#include "uta/error.hpp"
#include "uta/rng.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace uta {

int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::config: return 2;
        case ErrorKind::backend: return 3;
        case ErrorKind::data: return 4;
        case ErrorKind::internal: return 1;
    }
    return 1;
}

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::config: return "config";
        case ErrorKind::backend: return "backend";
        case ErrorKind::data: return "data";
        case ErrorKind::internal: return "internal";
    }
    return "internal";
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    if (n <= 1) {
        return 0;
    }
    // Rejection sampling over the largest multiple of n.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) {
        x = engine_();
    }
    return x % n;
}

double Rng::normal(double mean, double stddev) {
    // Box-Muller; one draw per call keeps the stream position predictable.
    double u1 = uniform01();
    while (u1 <= 0.0) {
        u1 = uniform01();
    }
    const double u2 = uniform01();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    return mean + stddev * z;
}

std::size_t Rng::categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
        total += w;
    }
    const double target = uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (target < acc) {
            return i;
        }
    }
    // Rounding at the top end: fall back to the last positive weight.
    for (std::size_t i = weights.size(); i > 0; --i) {
        if (weights[i - 1] > 0.0) {
            return i - 1;
        }
    }
    return 0;
}

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (std::uint64_t p : parts) {
        std::uint64_t z = h ^ (p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        h = z ^ (z >> 31);
    }
    return h;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = fnv1a64(bytes);
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kDigits[h & 0xf];
        h >>= 4;
    }
    return out;
}

}  // namespace uta
