#ifndef STATEFUZZ_RANDOM_HPP
#define STATEFUZZ_RANDOM_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace statefuzz {

/// SplitMix64 finalizer. Used to derive per-test seeds from a master seed.
inline constexpr std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index)
{
    return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// FNV-1a, for salting seeds with stable names.
inline constexpr std::uint64_t hash_name(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seeded source with platform-independent derived distributions (the
/// standard distributions are implementation-defined, the engine is not).
class Rng
{
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) { }

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer on [lo, hi).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi)
    {
        const auto span = static_cast<std::uint64_t>(hi - lo);
        if (span == 0)
            return lo;
        // Lemire-style rejection keeps the result exactly uniform.
        const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % span);
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return lo + static_cast<std::int64_t>(r % span);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace statefuzz

#endif // STATEFUZZ_RANDOM_HPP
