#ifndef ODIP_CORE_RANDOM_H_
#define ODIP_CORE_RANDOM_H_

#include <cstdint>
#include <random>

namespace odip {

// Mixes a tag into a seed (splitmix64 finalizer). Used to give every
// stochastic step its own stream, so results never depend on call order.
std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t tag);

template <typename... Tags>
std::uint64_t DeriveSeed(std::uint64_t seed, Tags... tags) {
  ((seed = MixSeed(seed, static_cast<std::uint64_t>(tags))), ...);
  return seed;
}

// Seed namespaces. Evaluation data never shares a namespace with captures.
inline constexpr std::uint64_t kTrainNamespace = 0x7472'6169'6eULL;
inline constexpr std::uint64_t kEvalNamespace = 0x6576'616cULL;
inline constexpr std::uint64_t kPretrainNamespace = 0x7072'6574ULL;

// mt19937_64 is bit-specified by the standard; the distributions are not, so
// sampling is done here to keep runs reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }
  // Uniform in [0, 1).
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Uniform integer in [lo, hi].
  int UniformInt(int lo, int hi);
  double Normal();
  bool Bernoulli(double p) { return Uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace odip

#endif  // ODIP_CORE_RANDOM_H_
