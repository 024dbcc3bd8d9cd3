#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace beampower {

// splitmix64: decorrelates derived seeds so parallel streams (one per
// environment / beam / timestep) never overlap for small tag deltas.
inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(uint64_t seed, uint64_t tag = 0) {
  return std::mt19937_64(mix_seed(seed, tag));
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(std::mt19937_64& rng, double mean = 0.0, double sigma = 1.0) {
  return std::normal_distribution<double>(mean, sigma)(rng);
}

// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);

std::string trim(const std::string& s);

// Splits on any of the characters in `delims`, dropping empty fields.
std::vector<std::string> split(const std::string& s, const char* delims);

// Strict full-field parse; throws std::invalid_argument with `what` context.
double parse_double(const std::string& field, const std::string& what);
long parse_long(const std::string& field, const std::string& what);

}  // namespace beampower
