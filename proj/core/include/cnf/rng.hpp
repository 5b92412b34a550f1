#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cnf {

// Reproducibility note: mt19937 output is pinned by the standard, but the
// standard *distributions* are not. Everything here derives values from raw
// engine output with fixed arithmetic so results are identical across
// standard libraries.

/// Standard-normal sampler (Box-Muller over mt19937).
class GaussianRng {
 public:
  explicit GaussianRng(uint32_t seed) : gen_(seed) {}

  /// Uniform draw in the open interval (0, 1).
  double uniform01() { return (double(gen_()) + 0.5) * (1.0 / 4294967296.0); }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Fisher-Yates with a fixed index formula (std::shuffle is not portable
/// across standard libraries).
template <class T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937& gen) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = size_t(gen() % uint32_t(i));
    std::swap(v[i - 1], v[j]);
  }
}

/// Derive a sub-stream seed from a base seed and a stream index.
inline uint32_t mix_seed(uint32_t seed, uint32_t stream) {
  uint32_t h = seed ^ (stream + 0x9e3779b9u + (seed << 6) + (seed >> 2));
  h ^= h >> 16;
  h *= 0x7feb352du;
  h ^= h >> 15;
  h *= 0x846ca68bu;
  h ^= h >> 16;
  return h;
}

}  // namespace cnf
