#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace mtle {

// Engine-owned PRNG (xoshiro256++). std::mt19937 engines are portable but the
// standard distributions are not; every draw here is fully specified so that
// results are bit-identical across platforms and compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Derives an independent generator for a named randomness stream
  // ("init", "schedule", "skipgram", "synth", ...) plus an optional salt
  // (epoch index, run index). Streams with different names or salts are
  // decorrelated even under the same master seed.
  static Rng stream(std::uint64_t seed, std::string_view name, std::uint64_t salt = 0);

  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Uniform integer on [0, n), n >= 1. Rejection sampling, unbiased.
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via Box-Muller. Consumes two uniforms per draw; no
  // cached spare, which keeps the generator state fully described by s_.
  double normal();

  // Zero-mean normal with the given stddev, redrawn until |z| <= clip sigmas.
  double truncated_normal(double stddev, double clip_sigmas = 2.0);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i + 1));
      std::swap(items[i], items[j]);
    }
  }

  std::array<std::uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

 private:
  std::array<std::uint64_t, 4> s_{};
};

// FNV-1a 64-bit over arbitrary bytes. Used for stream derivation and for
// input-file digests in run manifests.
std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text);

}  // namespace mtle
