#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string_view>

namespace ppa {

/// Keyed random stream. Two streams built from the same
/// (master_seed, tag, indices) produce the same draw sequence no matter
/// what any other stream has consumed, which is what makes parallel
/// episode simulation reproducible.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string_view tag,
            std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0,
            std::uint64_t d = 0)
      : seed_(mix_key(master_seed, tag, a, b, c, d)), engine_(seed_) {}

  /// Derived stream, independent of this one and of other fork ids.
  RngStream fork(std::uint64_t id) const {
    return RngStream(seed_, "fork", id);
  }

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return engine_; }

  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  /// Integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }
  bool bernoulli(double p) {
    return std::bernoulli_distribution(p)(engine_);
  }
  double normal(double mu, double sigma) {
    return std::normal_distribution<double>(mu, sigma)(engine_);
  }
  double lognormal(double mu, double sigma) {
    return std::lognormal_distribution<double>(mu, sigma)(engine_);
  }
  double gamma(double shape, double scale = 1.0) {
    return std::gamma_distribution<double>(shape, scale)(engine_);
  }
  double beta(double a, double b) {
    double x = gamma(a);
    double y = gamma(b);
    return x / (x + y);
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  static std::uint64_t mix_key(std::uint64_t master, std::string_view tag,
                               std::uint64_t a, std::uint64_t b,
                               std::uint64_t c, std::uint64_t d) {
    std::uint64_t h = splitmix(master ^ fnv1a(tag));
    h = splitmix(h ^ a);
    h = splitmix(h ^ b);
    h = splitmix(h ^ c);
    h = splitmix(h ^ d);
    return h;
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// FNV-1a over raw bytes; used for config and dataset fingerprints.
inline std::uint64_t fnv1a_bytes(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace ppa
