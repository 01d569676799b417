#pragma once

#include <cstdint>
#include <random>

namespace dgp {

using Rng = std::mt19937_64;

// Stateless 64-bit mixer (splitmix64 finalizer). Used to derive
// independent seed streams: run seed -> replicate seed -> worker seed.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix64(base ^ mix64(stream + 0x51'7c'c1'b7'27'22'0a'95ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace dgp
