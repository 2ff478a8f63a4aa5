#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>

namespace uta {

/// Seeded generator with platform-independent derived draws.
///
/// std::mt19937_64 output is fully specified by the standard, but the
/// std::*_distribution adapters are not, so every derived draw below is
/// implemented here to keep logs byte-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);

    double normal(double mean = 0.0, double stddev = 1.0);

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Index drawn from unnormalized nonnegative weights.
    std::size_t categorical(std::span<const double> weights);

private:
    std::mt19937_64 engine_;
};

/// Mixes several integers into one seed (splitmix64 finalizer chain).
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) noexcept;

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// 64-bit FNV-1a of a byte string, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace uta
