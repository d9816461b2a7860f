#ifndef SAGE_RNG_HPP
#define SAGE_RNG_HPP

#include <cstdint>
#include <random>

namespace sage {

/// Seeded 64-bit Mersenne Twister. Streams for independent work items come from split().
class SeededRng {
public:
    using result_type = std::mt19937_64::result_type;

    explicit SeededRng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    std::uint64_t seed() const noexcept { return seed_; }

    /// Independent stream for work item `index`, a pure function of (seed, index).
    SeededRng split(std::uint64_t index) const { return SeededRng(mix_seed(seed_, index)); }

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    double normal(double mean, double stddev) { return std::normal_distribution<double>(mean, stddev)(engine_); }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

    std::mt19937_64& engine() noexcept { return engine_; }

    static std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
        std::uint32_t words[2];
        seq.generate(words, words + 2);
        return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace sage

#endif  // SAGE_RNG_HPP
