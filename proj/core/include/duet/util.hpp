#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "duet/autodiff.hpp"

namespace duet {

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v);

/// SplitMix64 step; used where values must not depend on the standard
/// library's distribution implementations.
constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Gaussian matrix with the given standard deviation.
Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng);

/// Glorot-style initialization for a fan_in x fan_out weight.
Matrix glorot(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng);

}  // namespace duet
