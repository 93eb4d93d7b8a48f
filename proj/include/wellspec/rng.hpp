#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace wellspec {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

// Splittable random stream: (master_seed, path) fully determines the draw
// sequence, independent of construction or evaluation order. Each consumer
// (split b, permutation k, row i, ...) derives its own child stream, so
// parallel schedules cannot change results.
//
// The engine is mt19937_64 (output pinned by the standard); all variate
// transforms are explicit so no draw depends on libstdc++ internals.
class RngStream {
  public:
    explicit RngStream(std::uint64_t master_seed) : master_(master_seed), state_(mix(master_seed, {})) {
        reseed();
    }

    RngStream(std::uint64_t master_seed, const std::vector<std::uint64_t>& path)
        : master_(master_seed), path_(path), state_(mix(master_seed, path)) {
        reseed();
    }

    // Derive an independent stream one path level down.
    RngStream child(std::uint64_t label) const {
        std::vector<std::uint64_t> p = path_;
        p.push_back(label);
        return RngStream(master_, p);
    }

    std::uint64_t master_seed() const { return master_; }
    const std::vector<std::uint64_t>& path() const { return path_; }

    std::uint64_t next_u64() { return eng_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log() argument.
    double uniform01_open() { return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // Unbiased integer on [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    // Box-Muller, one variate per call.
    double normal() {
        const double u1 = uniform01_open();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Laplace with scale b via inverse CDF.
    double laplace(double b) {
        const double u = uniform01() - 0.5;
        return -b * std::copysign(std::log(1.0 - 2.0 * std::fabs(u)), -u);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices out of n (partial Fisher-Yates), ascending order not
    // guaranteed.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(below(n - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        return pool;
    }

  private:
    static std::uint64_t mix(std::uint64_t master, const std::vector<std::uint64_t>& path) {
        std::uint64_t h = detail::splitmix64(master ^ 0x8c9f6f3b5a1e42d7ULL);
        for (std::uint64_t label : path) h = detail::splitmix64(h ^ detail::splitmix64(label ^ 0xd1b54a32d192ed03ULL));
        return h;
    }

    void reseed() { eng_.seed(state_); }

    std::uint64_t master_;
    std::vector<std::uint64_t> path_;
    std::uint64_t state_;
    std::mt19937_64 eng_;
};

}  // namespace wellspec
