// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Core>

namespace msgan {

using Rng = std::mt19937_64;

/// Folds a list of integers into one well-mixed 64-bit seed, so that
/// streams keyed by (seed, iteration, style) are independent.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

/// Standard normal vector of the given size.
Eigen::VectorXd gaussian_vector(Rng& rng, Eigen::Index size);
Eigen::VectorXd gaussian_vector(std::uint64_t seed, Eigen::Index size);

}  // namespace msgan
