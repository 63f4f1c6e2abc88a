#ifndef MTE_RNG_HPP
#define MTE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "mte/error.hpp"

namespace mte {

// One named randomness source. Every value is a pure function of
// (base_seed, purpose, call_index):
//
//   key    = mix(base_seed ^ mix(fnv1a(purpose)))
//   out(i) = mix(key + (i + 1) * GOLDEN)
//
// where mix is the splitmix64 finalizer and GOLDEN is its increment. Streams
// with distinct purposes are decorrelated by the keyed start; there is no
// shared state, so parallel consumers each own their stream.
enum class Purpose {
    head_init,
    shuffle,
    dropout,
    random_mask,
    bag_subset,
    data_gen,
};

std::string_view purpose_label(Purpose p);

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace detail

class SeedStream {
public:
    SeedStream(std::uint64_t base_seed, Purpose purpose)
        : key_(detail::mix64(base_seed ^ detail::mix64(detail::fnv1a(purpose_label(purpose))))) {}

    std::uint64_t base_key() const { return key_; }
    std::uint64_t call_index() const { return counter_; }

    std::uint64_t next_u64() {
        ++counter_;
        return detail::mix64(key_ + counter_ * detail::kGolden);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; consumes two uniforms per value.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        return r * std::cos(6.283185307179586 * u2);
    }

    int bernoulli(double p) {
        require(p >= 0.0 && p <= 1.0, ErrKind::contract, "bernoulli: p outside [0,1]");
        return uniform() < p ? 1 : 0;
    }

    // Unbiased integer in [0, m) by rejection.
    std::uint64_t below(std::uint64_t m) {
        require(m > 0, ErrKind::contract, "below: empty range");
        const std::uint64_t bound = ~std::uint64_t{0} - (~std::uint64_t{0} % m);
        std::uint64_t v = next_u64();
        while (v >= bound) v = next_u64();
        return v % m;
    }

    std::vector<double> uniform_vec(std::size_t n) {
        std::vector<double> out(n);
        for (auto& v : out) v = uniform();
        return out;
    }

    std::vector<double> normal_vec(std::size_t n) {
        std::vector<double> out(n);
        for (auto& v : out) v = normal();
        return out;
    }

    std::vector<std::uint8_t> bernoulli_vec(std::size_t n, double p) {
        require(p >= 0.0 && p <= 1.0, ErrKind::contract, "bernoulli: p outside [0,1]");
        std::vector<std::uint8_t> out(n);
        for (auto& v : out) v = static_cast<std::uint8_t>(uniform() < p ? 1 : 0);
        return out;
    }

    // In-place Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace mte

#endif
