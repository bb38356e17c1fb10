// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "msgan/latent.hpp"

namespace msgan {

enum class StnInit { Identity, Random };

/// Style transformation network: one bias-free square matrix per distinct
/// row width. Row i of a code is multiplied by the matrix of its width.
class STN {
 public:
  STN() = default;
  /// `matrices` are ordered like `schedule.unique_widths()`.
  STN(RowSchedule schedule, std::vector<Eigen::MatrixXd> matrices);

  static STN identity(const RowSchedule& schedule);
  /// Entries drawn from N(0, stddev^2); stddev <= 0 picks 1/sqrt(width).
  static STN random(const RowSchedule& schedule, std::uint64_t seed, double stddev = 0.0);

  const RowSchedule& schedule() const { return schedule_; }
  const std::vector<int>& widths() const { return widths_; }
  std::size_t index_of(int width) const;
  const Eigen::MatrixXd& matrix(int width) const { return matrices_[index_of(width)]; }
  Eigen::MatrixXd& matrix(int width) { return matrices_[index_of(width)]; }
  const std::vector<Eigen::MatrixXd>& matrices() const { return matrices_; }
  std::vector<Eigen::MatrixXd>& matrices() { return matrices_; }
  std::size_t param_count() const;

  template <class Space>
  Code<Space> apply(const Code<Space>& code) const;

  /// grads[w] += sum over rows r of width w: grad_out[r] * input[r]^T
  template <class Space>
  void accumulate_grad(const Code<Space>& input, const Code<Space>& grad_out, std::vector<Eigen::MatrixXd>& grads) const;

  std::vector<Eigen::MatrixXd> zero_grads() const;

  bool operator==(const STN& other) const;

 private:
  RowSchedule schedule_;
  std::vector<int> widths_;
  std::vector<Eigen::MatrixXd> matrices_;
};

STN init_stn(const RowSchedule& schedule, StnInit mode, std::uint64_t seed = 0);

template <class Space>
Code<Space> apply_stn(const STN& stn, const Code<Space>& code) {
  return stn.apply(code);
}

/// N independent STNs, one per named style.
class STNBank {
 public:
  STNBank() = default;
  STNBank(std::vector<STN> stns, std::vector<std::string> names);

  static STNBank create(const RowSchedule& schedule, std::vector<std::string> names, StnInit mode,
                        std::uint64_t seed = 0);

  std::size_t size() const { return stns_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const STN& stn(std::size_t k) const { return stns_.at(k); }
  STN& stn(std::size_t k) { return stns_.at(k); }
  const RowSchedule& schedule() const { return stns_.front().schedule(); }
  /// Throws LookupError for unknown names.
  std::size_t find(const std::string& name) const;

  template <class Space>
  std::vector<Code<Space>> apply(const Code<Space>& code) const;

 private:
  std::vector<STN> stns_;
  std::vector<std::string> names_;
};

std::vector<SCode> apply_bank(const STNBank& bank, const SCode& code);

/// Sum of width^2 over the distinct widths of the schedule.
std::size_t stn_param_count(const RowSchedule& schedule);

}  // namespace msgan
