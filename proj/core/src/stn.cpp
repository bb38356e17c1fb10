// SPDX-License-Identifier: Apache-2.0
#include "msgan/stn.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "msgan/errors.hpp"
#include "msgan/random.hpp"

namespace msgan {

STN::STN(RowSchedule schedule, std::vector<Eigen::MatrixXd> matrices)
    : schedule_(std::move(schedule)), widths_(schedule_.unique_widths()), matrices_(std::move(matrices)) {
  if (matrices_.size() != widths_.size())
    throw ShapeError("STN needs " + std::to_string(widths_.size()) + " matrices, got " + std::to_string(matrices_.size()));
  for (std::size_t i = 0; i < widths_.size(); ++i) {
    if (matrices_[i].rows() != widths_[i] || matrices_[i].cols() != widths_[i])
      throw ShapeError("STN matrix " + std::to_string(i) + " must be " + std::to_string(widths_[i]) + "x" +
                       std::to_string(widths_[i]));
    if (!matrices_[i].allFinite()) throw NumericError("STN matrix has non-finite entries");
  }
}

STN STN::identity(const RowSchedule& schedule) {
  std::vector<Eigen::MatrixXd> m;
  for (int w : schedule.unique_widths()) m.push_back(Eigen::MatrixXd::Identity(w, w));
  return STN(schedule, std::move(m));
}

STN STN::random(const RowSchedule& schedule, std::uint64_t seed, double stddev) {
  Rng rng(derive_seed({seed, 0x57}));
  std::vector<Eigen::MatrixXd> m;
  for (int w : schedule.unique_widths()) {
    const double sd = stddev > 0.0 ? stddev : 1.0 / std::sqrt(static_cast<double>(w));
    std::normal_distribution<double> normal(0.0, sd);
    Eigen::MatrixXd mat(w, w);
    for (Eigen::Index r = 0; r < w; ++r)
      for (Eigen::Index c = 0; c < w; ++c) mat(r, c) = normal(rng);
    m.push_back(std::move(mat));
  }
  return STN(schedule, std::move(m));
}

std::size_t STN::index_of(int width) const {
  const auto it = std::find(widths_.begin(), widths_.end(), width);
  if (it == widths_.end()) throw ShapeError("STN has no matrix for width " + std::to_string(width));
  return static_cast<std::size_t>(it - widths_.begin());
}

std::size_t STN::param_count() const {
  std::size_t n = 0;
  for (const auto& m : matrices_) n += static_cast<std::size_t>(m.size());
  return n;
}

template <class Space>
Code<Space> STN::apply(const Code<Space>& code) const {
  if (!(code.schedule() == schedule_)) throw ShapeError("apply_stn: code schedule differs from STN schedule");
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(code.rows());
  for (std::size_t i = 0; i < code.rows(); ++i) rows.emplace_back(matrix(schedule_.width(i)) * code.row(i));
  return Code<Space>(schedule_, std::move(rows));
}

template <class Space>
void STN::accumulate_grad(const Code<Space>& input, const Code<Space>& grad_out,
                          std::vector<Eigen::MatrixXd>& grads) const {
  if (!(input.schedule() == schedule_) || !(grad_out.schedule() == schedule_))
    throw ShapeError("STN gradient: schedule mismatch");
  if (grads.size() != matrices_.size()) throw ShapeError("STN gradient: wrong number of gradient matrices");
  for (std::size_t i = 0; i < input.rows(); ++i)
    grads[index_of(schedule_.width(i))].noalias() += grad_out.row(i) * input.row(i).transpose();
}

template SCode STN::apply(const SCode&) const;
template WCode STN::apply(const WCode&) const;
template void STN::accumulate_grad(const SCode&, const SCode&, std::vector<Eigen::MatrixXd>&) const;
template void STN::accumulate_grad(const WCode&, const WCode&, std::vector<Eigen::MatrixXd>&) const;

std::vector<Eigen::MatrixXd> STN::zero_grads() const {
  std::vector<Eigen::MatrixXd> g;
  for (int w : widths_) g.push_back(Eigen::MatrixXd::Zero(w, w));
  return g;
}

bool STN::operator==(const STN& other) const {
  if (!(schedule_ == other.schedule_)) return false;
  for (std::size_t i = 0; i < matrices_.size(); ++i)
    if (matrices_[i] != other.matrices_[i]) return false;
  return true;
}

STN init_stn(const RowSchedule& schedule, StnInit mode, std::uint64_t seed) {
  return mode == StnInit::Identity ? STN::identity(schedule) : STN::random(schedule, seed);
}

STNBank::STNBank(std::vector<STN> stns, std::vector<std::string> names)
    : stns_(std::move(stns)), names_(std::move(names)) {
  if (stns_.empty()) throw ArgumentError("STN bank needs at least one style");
  if (stns_.size() != names_.size()) throw ArgumentError("STN bank: one name per STN required");
  std::set<std::string> seen;
  for (const auto& n : names_)
    if (!seen.insert(n).second) throw ArgumentError("duplicate style name: " + n);
  for (const auto& s : stns_)
    if (!(s.schedule() == stns_.front().schedule())) throw ShapeError("STN bank: STNs disagree on schedule");
}

STNBank STNBank::create(const RowSchedule& schedule, std::vector<std::string> names, StnInit mode,
                        std::uint64_t seed) {
  std::vector<STN> stns;
  for (std::size_t k = 0; k < names.size(); ++k) stns.push_back(init_stn(schedule, mode, derive_seed({seed, k})));
  return STNBank(std::move(stns), std::move(names));
}

std::size_t STNBank::find(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw LookupError("unknown style: " + name);
  return static_cast<std::size_t>(it - names_.begin());
}

template <class Space>
std::vector<Code<Space>> STNBank::apply(const Code<Space>& code) const {
  std::vector<Code<Space>> out;
  out.reserve(stns_.size());
  for (const auto& s : stns_) out.push_back(s.apply(code));
  return out;
}

template std::vector<SCode> STNBank::apply(const SCode&) const;
template std::vector<WCode> STNBank::apply(const WCode&) const;

std::vector<SCode> apply_bank(const STNBank& bank, const SCode& code) { return bank.apply(code); }

std::size_t stn_param_count(const RowSchedule& schedule) {
  std::size_t n = 0;
  for (int w : schedule.unique_widths()) n += static_cast<std::size_t>(w) * static_cast<std::size_t>(w);
  return n;
}

}  // namespace msgan
