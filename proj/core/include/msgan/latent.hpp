// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace msgan {

class MappingNetwork;
class StyleMapper;

/// Ordered row widths of a style-space code. Widths are powers of two and
/// never increase along the list.
class RowSchedule {
 public:
  RowSchedule() = default;
  explicit RowSchedule(std::vector<int> widths);

  /// 10 rows: 64 x6, 32 x2, 16 x2.
  static RowSchedule toy();
  /// 26 rows: 512 x15, 256 x3, 128 x3, 64 x3, 32 x2. The per-width counts
  /// beyond the leading 15 are provisional.
  static RowSchedule full_scale();
  /// 3 rows: 8, 8, 4. Used for gradient checks.
  static RowSchedule micro();
  static RowSchedule uniform(std::size_t rows, int width);

  const std::vector<int>& widths() const { return widths_; }
  /// Distinct widths, largest first.
  std::vector<int> unique_widths() const;
  std::size_t rows() const { return widths_.size(); }
  int width(std::size_t row) const { return widths_.at(row); }
  Eigen::Index total_dimension() const;
  bool is_uniform() const;

  bool operator==(const RowSchedule&) const = default;

 private:
  std::vector<int> widths_;
};

struct StyleSpace {};
struct WPlusSpace {};

/// A latent code as an ordered list of rows whose widths follow a schedule.
/// `Code<StyleSpace>` is an S-code, `Code<WPlusSpace>` a W+ code (uniform width).
template <class Space>
class Code {
 public:
  Code() = default;
  Code(RowSchedule schedule, std::vector<Eigen::VectorXd> rows);

  static Code zeros(const RowSchedule& schedule);
  static Code from_flat(const RowSchedule& schedule, const Eigen::VectorXd& flat);

  const RowSchedule& schedule() const { return schedule_; }
  std::size_t rows() const { return rows_.size(); }
  const Eigen::VectorXd& row(std::size_t i) const { return rows_.at(i); }
  const std::vector<Eigen::VectorXd>& row_list() const { return rows_; }
  Eigen::VectorXd flatten() const;

  /// Replaces one row; the width must match the schedule.
  void set_row(std::size_t i, Eigen::VectorXd value);

  bool operator==(const Code& other) const;

  Code& operator+=(const Code& other);
  Code& operator-=(const Code& other);
  Code& operator*=(double factor);
  friend Code operator+(Code a, const Code& b) { return a += b; }
  friend Code operator-(Code a, const Code& b) { return a -= b; }
  friend Code operator*(double f, Code a) { return a *= f; }

 private:
  void require_same_schedule(const Code& other) const;

  RowSchedule schedule_;
  std::vector<Eigen::VectorXd> rows_;
};

using SCode = Code<StyleSpace>;
using WCode = Code<WPlusSpace>;

extern template class Code<StyleSpace>;
extern template class Code<WPlusSpace>;

/// Euclidean distance over all rows.
template <class Space>
double distance(const Code<Space>& a, const Code<Space>& b);

/// Per-row binary mask. Bit 1 keeps the reference row, bit 0 takes the row
/// from the random code.
class StyleMixMask {
 public:
  StyleMixMask() = default;
  explicit StyleMixMask(std::vector<std::uint8_t> bits);

  static StyleMixMask from_string(std::string_view bits);
  static StyleMixMask ones(std::size_t rows);
  static StyleMixMask zeros(std::size_t rows);

  std::string to_string() const;
  StyleMixMask complement() const;
  std::size_t size() const { return bits_.size(); }
  std::size_t count_ones() const;
  bool keeps_reference(std::size_t row) const { return bits_.at(row) != 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  bool operator==(const StyleMixMask&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// bits[i] = 0 for i < start_row, 1 otherwise.
StyleMixMask make_tail_mask(const RowSchedule& schedule, std::size_t start_row);

/// ceil(0.45 * rows), the toy-scale counterpart of 12 of 26 rows.
std::size_t default_mask_start(std::size_t rows);

/// Row i = mask[i] * reference[i] + (1 - mask[i]) * random[i].
template <class Space>
Code<Space> mix_rows(const Code<Space>& reference, const Code<Space>& random, const StyleMixMask& mask);

/// Masked style mixing with the random rows taken from S(P(z)).
SCode style_mix(const SCode& s_ref, const Eigen::VectorXd& z, const StyleMixMask& mask, const MappingNetwork& mapper,
                const StyleMapper& styler);

/// W+ counterpart: the random rows come from the broadcast P(z).
WCode style_mix(const WCode& w_ref, const Eigen::VectorXd& z, const StyleMixMask& mask, const MappingNetwork& mapper);

struct ReferenceSet {
  std::size_t style_index = 0;
  SCode reference_code;
  std::vector<SCode> mixed_codes;
  std::vector<std::uint64_t> seeds;
};

ReferenceSet build_reference_set(const SCode& s_ref, std::size_t count, const StyleMixMask& mask, std::uint64_t seed,
                                 const MappingNetwork& mapper, const StyleMapper& styler, std::size_t style_index = 0);

/// Seeded source of mixing noise: one z per (iteration, style), independent
/// of the order in which draws are requested.
class MixingStream {
 public:
  MixingStream() = default;
  MixingStream(std::uint64_t seed, int z_dim) : seed_(seed), z_dim_(z_dim) {}

  std::uint64_t seed_for(std::uint64_t iteration, std::size_t style) const;
  Eigen::VectorXd noise(std::uint64_t iteration, std::size_t style) const;
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  int z_dim_ = 0;
};

}  // namespace msgan
