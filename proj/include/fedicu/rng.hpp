#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace fedicu {

// Counter-based splitmix64 generator. The draw sequence is a pure function
// of the seed, independent of platform and standard library, which is what
// makes every run of the pipeline reproducible bit for bit.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Unbiased integer in [0, n) via rejection sampling.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t rem = (UINT64_MAX % n + 1) % n;
        const std::uint64_t limit = UINT64_MAX - rem;
        std::uint64_t x = next_u64();
        while (x > limit) x = next_u64();
        return x % n;
    }

    // Standard normal via Box-Muller; the paired draw is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_double();  // (0, 1]
        const double u2 = next_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.141592653589793238462643 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        if (items.size() < 2) return;
        for (std::size_t i = items.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i + 1));
            std::swap(items[i], items[j]);
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Deterministic child-seed derivation. Streams for model init, epoch
// shuffles, fold assignment etc. are all derived from one experiment seed
// plus a fixed path of tags, so no stream ever depends on execution order.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = base;
    for (std::uint64_t part : path) {
        s ^= part + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
        Rng mixer(s);
        s = mixer.next_u64();
    }
    return s;
}

// Tags used in derive_seed paths.
namespace seed_tag {
constexpr std::uint64_t model_init = 0x01;
constexpr std::uint64_t shuffle = 0x02;
constexpr std::uint64_t folds = 0x03;
constexpr std::uint64_t clients = 0x04;
constexpr std::uint64_t synthetic = 0x05;
constexpr std::uint64_t participation = 0x06;
constexpr std::uint64_t unit = 0x07;
}  // namespace seed_tag

}  // namespace fedicu
