#pragma once

#include <cstdint>
#include <cmath>

namespace rse {

/// SplitMix64 output function. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

/// Counter-based random stream: draw i of stream `key` is
/// mix64(key + i * golden). Streams with distinct keys are independent
/// for Monte Carlo purposes, and a stream never shares state with
/// another, so replicas can run on any worker in any order.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() {
        counter_ += 0x9e3779b97f4a7c15ULL;
        return mix64(key_ + counter_);
    }

    /// Uniform on [0,1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal, Marsaglia polar method with cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Domain-separation tags for stream derivation.
enum class StreamTag : std::uint64_t {
    Environment = 0x656e7669726f6e00ULL,
    Noise = 0x6e6f697365000000ULL,
    Analysis = 0x616e616c79736900ULL,
    Validation = 0x76616c6964617400ULL,
};

/// Splittable seed derivation: h(master, tag, a, b). Independent streams
/// for every (outer, inner) replica index without stream coordination.
constexpr std::uint64_t derive_key(std::uint64_t master, StreamTag tag,
                                   std::uint64_t a = 0, std::uint64_t b = 0) noexcept {
    std::uint64_t k = mix64(master ^ static_cast<std::uint64_t>(tag));
    k = mix64(k ^ (a + 0x9e3779b97f4a7c15ULL));
    k = mix64(k ^ (b + 0xd1b54a32d192ed03ULL));
    return k;
}

}  // namespace rse
