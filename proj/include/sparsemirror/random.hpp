#pragma once

#include <cstdint>
#include <random>

namespace sparsemirror {

/// splitmix64 finalizer, used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed for trajectory `stream` of a run started from `master`.
constexpr std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t stream) {
  return mix_seed(mix_seed(master) ^ mix_seed(stream + 0x632BE59BD9B4E019ULL));
}

/// Source of uniform variates in [0,1) that counts how many it has handed out.
/// Every oracle consumes its randomness through this type so replays can be
/// audited variate by variate.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  UniformStream(std::uint64_t master, std::uint64_t stream)
      : engine_(derive_stream_seed(master, stream)) {}

  /// 53 random mantissa bits; never returns 1.0.
  double next() {
    ++consumed_;
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::uint64_t consumed() const { return consumed_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t consumed_ = 0;
};

}  // namespace sparsemirror
