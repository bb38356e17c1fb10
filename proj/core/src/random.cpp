// SPDX-License-Identifier: Apache-2.0
#include "msgan/random.hpp"

namespace msgan {
namespace {

// splitmix64 finaliser
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6d756c74697374ULL;
  for (std::uint64_t p : parts) h = mix(h ^ mix(p));
  return h;
}

Eigen::VectorXd gaussian_vector(Rng& rng, Eigen::Index size) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v[i] = normal(rng);
  return v;
}

Eigen::VectorXd gaussian_vector(std::uint64_t seed, Eigen::Index size) {
  Rng rng(seed);
  return gaussian_vector(rng, size);
}

}  // namespace msgan
