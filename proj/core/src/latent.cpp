// SPDX-License-Identifier: Apache-2.0
#include "msgan/latent.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "msgan/errors.hpp"
#include "msgan/nets.hpp"
#include "msgan/random.hpp"

namespace msgan {

// --- RowSchedule ------------------------------------------------------------

RowSchedule::RowSchedule(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.empty()) throw ArgumentError("row schedule must not be empty");
  for (std::size_t i = 0; i < widths_.size(); ++i) {
    const int w = widths_[i];
    if (w <= 0 || (w & (w - 1)) != 0) throw ArgumentError("row width " + std::to_string(w) + " is not a power of two");
    if (i > 0 && w > widths_[i - 1]) throw ArgumentError("row widths must be non-increasing");
  }
}

RowSchedule RowSchedule::toy() { return RowSchedule({64, 64, 64, 64, 64, 64, 32, 32, 16, 16}); }

RowSchedule RowSchedule::full_scale() {
  std::vector<int> w;
  w.insert(w.end(), 15, 512);
  w.insert(w.end(), 3, 256);
  w.insert(w.end(), 3, 128);
  w.insert(w.end(), 3, 64);
  w.insert(w.end(), 2, 32);
  return RowSchedule(std::move(w));
}

RowSchedule RowSchedule::micro() { return RowSchedule({8, 8, 4}); }

RowSchedule RowSchedule::uniform(std::size_t rows, int width) { return RowSchedule(std::vector<int>(rows, width)); }

std::vector<int> RowSchedule::unique_widths() const {
  std::vector<int> out;
  for (int w : widths_)
    if (out.empty() || out.back() != w) out.push_back(w);
  return out;
}

Eigen::Index RowSchedule::total_dimension() const {
  Eigen::Index n = 0;
  for (int w : widths_) n += w;
  return n;
}

bool RowSchedule::is_uniform() const {
  return std::all_of(widths_.begin(), widths_.end(), [&](int w) { return w == widths_.front(); });
}

// --- Code -------------------------------------------------------------------

template <class Space>
Code<Space>::Code(RowSchedule schedule, std::vector<Eigen::VectorXd> rows)
    : schedule_(std::move(schedule)), rows_(std::move(rows)) {
  if (rows_.size() != schedule_.rows())
    throw ShapeError("code has " + std::to_string(rows_.size()) + " rows, schedule has " +
                     std::to_string(schedule_.rows()));
  if constexpr (std::is_same_v<Space, WPlusSpace>) {
    if (!schedule_.is_uniform()) throw ShapeError("W+ code rows must share one width");
  }
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].size() != schedule_.width(i))
      throw ShapeError("row " + std::to_string(i) + " has width " + std::to_string(rows_[i].size()) + ", expected " +
                       std::to_string(schedule_.width(i)));
    if (!rows_[i].allFinite()) throw NumericError("row " + std::to_string(i) + " has non-finite entries");
  }
}

template <class Space>
Code<Space> Code<Space>::zeros(const RowSchedule& schedule) {
  std::vector<Eigen::VectorXd> rows;
  for (int w : schedule.widths()) rows.push_back(Eigen::VectorXd::Zero(w));
  return Code(schedule, std::move(rows));
}

template <class Space>
Code<Space> Code<Space>::from_flat(const RowSchedule& schedule, const Eigen::VectorXd& flat) {
  if (flat.size() != schedule.total_dimension()) throw ShapeError("flat code length does not match schedule");
  std::vector<Eigen::VectorXd> rows;
  Eigen::Index off = 0;
  for (int w : schedule.widths()) {
    rows.emplace_back(flat.segment(off, w));
    off += w;
  }
  return Code(schedule, std::move(rows));
}

template <class Space>
Eigen::VectorXd Code<Space>::flatten() const {
  Eigen::VectorXd flat(schedule_.total_dimension());
  Eigen::Index off = 0;
  for (const auto& r : rows_) {
    flat.segment(off, r.size()) = r;
    off += r.size();
  }
  return flat;
}

template <class Space>
void Code<Space>::set_row(std::size_t i, Eigen::VectorXd value) {
  if (i >= rows_.size()) throw BoundsError("set_row: row index out of range");
  if (value.size() != schedule_.width(i)) throw ShapeError("set_row: width mismatch");
  if (!value.allFinite()) throw NumericError("set_row: non-finite entries");
  rows_[i] = std::move(value);
}

template <class Space>
bool Code<Space>::operator==(const Code& other) const {
  if (!(schedule_ == other.schedule_)) return false;
  for (std::size_t i = 0; i < rows_.size(); ++i)
    if (rows_[i] != other.rows_[i]) return false;
  return true;
}

template <class Space>
void Code<Space>::require_same_schedule(const Code& other) const {
  if (!(schedule_ == other.schedule_)) throw ShapeError("codes have different schedules");
}

template <class Space>
Code<Space>& Code<Space>::operator+=(const Code& other) {
  require_same_schedule(other);
  for (std::size_t i = 0; i < rows_.size(); ++i) rows_[i] += other.rows_[i];
  return *this;
}

template <class Space>
Code<Space>& Code<Space>::operator-=(const Code& other) {
  require_same_schedule(other);
  for (std::size_t i = 0; i < rows_.size(); ++i) rows_[i] -= other.rows_[i];
  return *this;
}

template <class Space>
Code<Space>& Code<Space>::operator*=(double factor) {
  for (auto& r : rows_) r *= factor;
  return *this;
}

template class Code<StyleSpace>;
template class Code<WPlusSpace>;

template <class Space>
double distance(const Code<Space>& a, const Code<Space>& b) {
  if (!(a.schedule() == b.schedule())) throw ShapeError("distance: schedules differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += (a.row(i) - b.row(i)).squaredNorm();
  return std::sqrt(s);
}

template double distance(const SCode&, const SCode&);
template double distance(const WCode&, const WCode&);

// --- StyleMixMask -----------------------------------------------------------

StyleMixMask::StyleMixMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (std::uint8_t b : bits_)
    if (b > 1) throw ArgumentError("mask bits must be 0 or 1");
}

StyleMixMask StyleMixMask::from_string(std::string_view bits) {
  std::vector<std::uint8_t> out;
  for (char c : bits) {
    if (c != '0' && c != '1') throw ArgumentError("mask string may only contain '0' and '1'");
    out.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  return StyleMixMask(std::move(out));
}

StyleMixMask StyleMixMask::ones(std::size_t rows) { return StyleMixMask(std::vector<std::uint8_t>(rows, 1)); }
StyleMixMask StyleMixMask::zeros(std::size_t rows) { return StyleMixMask(std::vector<std::uint8_t>(rows, 0)); }

std::string StyleMixMask::to_string() const {
  std::string s;
  for (std::uint8_t b : bits_) s.push_back(static_cast<char>('0' + b));
  return s;
}

StyleMixMask StyleMixMask::complement() const {
  std::vector<std::uint8_t> out(bits_.size());
  std::transform(bits_.begin(), bits_.end(), out.begin(), [](std::uint8_t b) { return static_cast<std::uint8_t>(1 - b); });
  return StyleMixMask(std::move(out));
}

std::size_t StyleMixMask::count_ones() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

StyleMixMask make_tail_mask(const RowSchedule& schedule, std::size_t start_row) {
  if (start_row > schedule.rows())
    throw BoundsError("mask start row " + std::to_string(start_row) + " exceeds row count " +
                      std::to_string(schedule.rows()));
  std::vector<std::uint8_t> bits(schedule.rows(), 0);
  std::fill(bits.begin() + static_cast<std::ptrdiff_t>(start_row), bits.end(), std::uint8_t{1});
  return StyleMixMask(std::move(bits));
}

std::size_t default_mask_start(std::size_t rows) {
  return static_cast<std::size_t>(std::ceil(0.45 * static_cast<double>(rows) - 1e-9));
}

// --- mixing -----------------------------------------------------------------

template <class Space>
Code<Space> mix_rows(const Code<Space>& reference, const Code<Space>& random, const StyleMixMask& mask) {
  if (!(reference.schedule() == random.schedule())) throw ShapeError("style_mix: reference and random codes differ in schedule");
  if (mask.size() != reference.rows())
    throw ShapeError("style_mix: mask has " + std::to_string(mask.size()) + " bits, code has " +
                     std::to_string(reference.rows()) + " rows");
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(reference.rows());
  for (std::size_t i = 0; i < reference.rows(); ++i)
    rows.push_back(mask.keeps_reference(i) ? reference.row(i) : random.row(i));
  return Code<Space>(reference.schedule(), std::move(rows));
}

template SCode mix_rows(const SCode&, const SCode&, const StyleMixMask&);
template WCode mix_rows(const WCode&, const WCode&, const StyleMixMask&);

SCode style_mix(const SCode& s_ref, const Eigen::VectorXd& z, const StyleMixMask& mask, const MappingNetwork& mapper,
                const StyleMapper& styler) {
  if (!(styler.schedule() == s_ref.schedule())) throw ShapeError("style_mix: style mapper schedule differs from code");
  const SCode random = styler.to_style(map_noise(mapper, z, s_ref.rows()));
  return mix_rows(s_ref, random, mask);
}

WCode style_mix(const WCode& w_ref, const Eigen::VectorXd& z, const StyleMixMask& mask, const MappingNetwork& mapper) {
  return mix_rows(w_ref, map_noise(mapper, z, w_ref.rows()), mask);
}

ReferenceSet build_reference_set(const SCode& s_ref, std::size_t count, const StyleMixMask& mask, std::uint64_t seed,
                                 const MappingNetwork& mapper, const StyleMapper& styler, std::size_t style_index) {
  if (count < 1) throw ArgumentError("build_reference_set: count must be at least 1");
  ReferenceSet set{style_index, s_ref, {}, {}};
  const MixingStream stream(seed, mapper.config().z_dim);
  for (std::size_t i = 0; i < count; ++i) {
    set.seeds.push_back(stream.seed_for(i, style_index));
    set.mixed_codes.push_back(style_mix(s_ref, stream.noise(i, style_index), mask, mapper, styler));
  }
  return set;
}

std::uint64_t MixingStream::seed_for(std::uint64_t iteration, std::size_t style) const {
  return derive_seed({seed_, iteration, static_cast<std::uint64_t>(style)});
}

Eigen::VectorXd MixingStream::noise(std::uint64_t iteration, std::size_t style) const {
  return gaussian_vector(seed_for(iteration, style), z_dim_);
}

}  // namespace msgan
