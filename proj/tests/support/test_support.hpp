// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "msgan/nets.hpp"
#include "msgan/trainer.hpp"

namespace msgan::testing {

/// Freshly initialised 3-row, 8x8 model.
BaseModel micro_base(std::uint64_t seed = 1);

/// Committed pretrained toy prior (loaded once per process).
const BaseModel& toy_base();
std::filesystem::path toy_base_path();

/// Scratch directory unique to the calling test.
std::filesystem::path scratch_dir(const std::string& tag);

/// Random code with entries near the typical style magnitude.
SCode random_code(const RowSchedule& schedule, std::uint64_t seed, double offset = 1.0, double scale = 0.5);
Image random_image(int channels, int size, std::uint64_t seed, double amplitude = 0.8);

struct GradCheck {
  double rel_error = 0.0;
  double analytic_norm = 0.0;
  std::size_t checked = 0;
};

/// Central differences of `loss` with respect to the entries `indices` of
/// `values`, compared to `analytic` as ||a - n|| / max(||a||, ||n||).
GradCheck check_gradient(std::vector<double>& values, std::span<const double> analytic,
                         std::span<const std::size_t> indices, const std::function<double()>& loss, double h = 1e-5);

/// Up to `count` distinct indices in [0, size).
std::vector<std::size_t> sample_indices(std::size_t size, std::size_t count, std::uint64_t seed);

}  // namespace msgan::testing
