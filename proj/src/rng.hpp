#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace sid {

// Deterministic random stream. The engine (mt19937_64) and every transform
// below are fully specified here, so sequences are reproducible across
// platforms and standard-library versions; std::uniform_*/normal_distribution
// are deliberately not used because their output is implementation-defined.
//
// Independent consumers (init, batch shuffling, dropout, clustering, ...)
// each hold their own stream derived from the run seed and a stream name.
// That keeps consumption in one subsystem from perturbing another, which the
// trainer relies on for its exact degeneracy guarantees.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    static std::uint64_t derive_seed(std::uint64_t base, std::string_view stream);
    static Rng stream(std::uint64_t base, std::string_view name) {
        return Rng(derive_seed(base, name));
    }

    std::uint64_t next_u64() { return eng_(); }

    // [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n). Modulo reduction; the bias is far below anything observable here.
    int uniform_int(int n) { return static_cast<int>(eng_() % static_cast<std::uint64_t>(n)); }

    // Standard normal via Box-Muller; two engine draws per sample.
    double normal();

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            int j = uniform_int(i + 1);
            std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
        }
    }

    std::vector<int> permutation(int n) {
        std::vector<int> p(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
        shuffle(p);
        return p;
    }

private:
    std::mt19937_64 eng_;
};

std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace sid
