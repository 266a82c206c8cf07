#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace repshift {

/// splitmix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Folds a master seed with a sequence of stream labels into one seed.
/// The result depends only on the values, never on call order elsewhere.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> labels) noexcept {
    std::uint64_t s = mix64(master);
    for (auto l : labels) s = mix64(s ^ mix64(l + 0x632be59bd9b4e019ULL));
    return s;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> labels) {
    return Rng(derive_seed(master, labels));
}

// Stream labels. Kept stable so datasets do not change between releases.
namespace stream {
inline constexpr std::uint64_t source = 1;
inline constexpr std::uint64_t target = 2;
inline constexpr std::uint64_t validation = 3;
inline constexpr std::uint64_t target_validation = 4;
inline constexpr std::uint64_t evaluation = 5;
inline constexpr std::uint64_t covariates = 10;
inline constexpr std::uint64_t random_effect = 11;
inline constexpr std::uint64_t noise = 12;
inline constexpr std::uint64_t split = 20;
inline constexpr std::uint64_t init = 21;
inline constexpr std::uint64_t shuffle = 22;
inline constexpr std::uint64_t replication = 30;
}  // namespace stream

}  // namespace repshift
