#ifndef SCMFUSE_RANDOM_HPP
#define SCMFUSE_RANDOM_HPP

#include <cstdint>
#include <random>

namespace scmfuse {

/// SplitMix64 finaliser; used to derive independent child seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of child `index` in stream `stream` under `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return splitmix64(splitmix64(seed ^ splitmix64(stream)) + index);
}

using Rng = std::mt19937_64;

}  // namespace scmfuse

#endif  // SCMFUSE_RANDOM_HPP
