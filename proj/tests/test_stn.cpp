// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "msgan/errors.hpp"
#include "msgan/stn.hpp"
#include "support/test_support.hpp"

using namespace msgan;
using msgan::testing::random_code;

TEST(StnParamCount, ArithmeticOracles) {
  EXPECT_EQ(stn_param_count(RowSchedule::full_scale()), 512u * 512 + 256 * 256 + 128 * 128 + 64 * 64 + 32 * 32);
  EXPECT_EQ(stn_param_count(RowSchedule::full_scale()), 349184u);
  EXPECT_EQ(stn_param_count(RowSchedule::toy()), 5376u);
  EXPECT_EQ(stn_param_count(RowSchedule::uniform(7, 128)), 128u * 128);
  EXPECT_EQ(STN::identity(RowSchedule::toy()).param_count(), 5376u);
}

TEST(Stn, IdentityInit) {
  const auto schedule = RowSchedule::toy();
  const STN t = init_stn(schedule, StnInit::Identity);
  EXPECT_EQ(t.matrix(64), Eigen::MatrixXd::Identity(64, 64));
  EXPECT_EQ(t.widths(), (std::vector<int>{64, 32, 16}));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SCode s = random_code(schedule, seed);
    EXPECT_EQ(apply_stn(t, s), s);
  }
}

TEST(Stn, RandomInitReproducible) {
  const auto schedule = RowSchedule::toy();
  EXPECT_EQ(init_stn(schedule, StnInit::Random, 4), init_stn(schedule, StnInit::Random, 4));
  EXPECT_FALSE(init_stn(schedule, StnInit::Random, 4) == init_stn(schedule, StnInit::Random, 5));
}

TEST(Stn, LinearityAndHomogeneity) {
  const auto schedule = RowSchedule::toy();
  const STN t = STN::random(schedule, 3);
  for (int c = 0; c < 10; ++c) {
    const SCode s1 = random_code(schedule, 10 + c);
    const SCode s2 = random_code(schedule, 50 + c);
    const double a = 0.3 * c - 1.1;
    const double b = 2.0 - 0.25 * c;
    const SCode lhs = t.apply(a * s1 + b * s2);
    const SCode rhs = a * t.apply(s1) + b * t.apply(s2);
    for (std::size_t r = 0; r < schedule.rows(); ++r)
      EXPECT_LT((lhs.row(r) - rhs.row(r)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(t.apply(SCode::zeros(schedule)), SCode::zeros(schedule));
  }
}

TEST(Stn, WidthRoutingDoublingProbe) {
  const auto schedule = RowSchedule::toy();
  for (int w : schedule.unique_widths()) {
    STN t = STN::identity(schedule);
    t.matrix(w) = 2.0 * Eigen::MatrixXd::Identity(w, w);
    const SCode s = random_code(schedule, static_cast<std::uint64_t>(w));
    const SCode out = t.apply(s);
    for (std::size_t r = 0; r < schedule.rows(); ++r) {
      if (schedule.width(r) == w) EXPECT_EQ(out.row(r), 2.0 * s.row(r));
      else EXPECT_EQ(out.row(r), s.row(r));
    }
  }
}

TEST(Stn, RowIsMatrixTimesRow) {
  const auto schedule = RowSchedule::toy();
  const STN t = STN::random(schedule, 8);
  const SCode s = random_code(schedule, 1);
  const SCode out = t.apply(s);
  for (std::size_t r = 0; r < schedule.rows(); ++r) {
    const Eigen::VectorXd expect = t.matrix(schedule.width(r)) * s.row(r);
    EXPECT_LT((out.row(r) - expect).norm(), 1e-12);
  }
}

TEST(Stn, WPlusSingleMatrix) {
  const auto schedule = RowSchedule::uniform(10, 64);
  const STN t = STN::random(schedule, 2);
  EXPECT_EQ(t.widths().size(), 1u);
  EXPECT_EQ(t.param_count(), 4096u);
  std::vector<Eigen::VectorXd> rows;
  for (int i = 0; i < 10; ++i) rows.push_back(Eigen::VectorXd::Constant(64, 0.1 * i));
  const WCode w(schedule, rows);
  const WCode out = t.apply(w);
  for (std::size_t r = 0; r < 10; ++r) EXPECT_LT((out.row(r) - t.matrix(64) * rows[r]).norm(), 1e-12);
  EXPECT_EQ(STN::identity(schedule).apply(w), w);
}

TEST(Stn, ScheduleMismatch) {
  const STN t = STN::identity(RowSchedule::toy());
  EXPECT_THROW(t.apply(random_code(RowSchedule::micro(), 1)), ShapeError);
  EXPECT_THROW(STN(RowSchedule::micro(), {Eigen::MatrixXd::Identity(8, 8)}), ShapeError);
}

TEST(Stn, AccumulateGradIsOuterProductSum) {
  const auto schedule = RowSchedule::micro();
  const STN t = STN::identity(schedule);
  const SCode in = random_code(schedule, 1);
  const SCode g = random_code(schedule, 2);
  auto grads = t.zero_grads();
  t.accumulate_grad(in, g, grads);
  const Eigen::MatrixXd e8 = g.row(0) * in.row(0).transpose() + g.row(1) * in.row(1).transpose();
  const Eigen::MatrixXd e4 = g.row(2) * in.row(2).transpose();
  EXPECT_LT((grads[t.index_of(8)] - e8).norm(), 1e-12);
  EXPECT_LT((grads[t.index_of(4)] - e4).norm(), 1e-12);
}

TEST(Bank, ApplyOrderAndIdentityCopies) {
  const auto schedule = RowSchedule::toy();
  const SCode s = random_code(schedule, 3);
  const auto one = STNBank::create(schedule, {"a"}, StnInit::Identity);
  EXPECT_EQ(apply_bank(one, s), std::vector<SCode>{s});
  const auto three = STNBank::create(schedule, {"a", "b", "c"}, StnInit::Identity);
  const auto out = apply_bank(three, s);
  ASSERT_EQ(out.size(), 3u);
  for (const auto& o : out) EXPECT_EQ(o, s);
  EXPECT_EQ(three.find("c"), 2u);
  EXPECT_THROW(three.find("zzz"), LookupError);
}

TEST(Bank, DistinctStnsGiveDistinctOutputs) {
  const auto schedule = RowSchedule::toy();
  const auto bank = STNBank::create(schedule, {"a", "b", "c", "d"}, StnInit::Random, 11);
  const SCode s = random_code(schedule, 3);
  const auto out = apply_bank(bank, s);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i], bank.stn(i).apply(s));
    for (std::size_t j = i + 1; j < out.size(); ++j) EXPECT_GT(distance(out[i], out[j]), 0.0);
  }
}

TEST(Bank, RejectsDuplicateNames) {
  EXPECT_THROW(STNBank::create(RowSchedule::toy(), {"a", "a"}, StnInit::Identity), ArgumentError);
}
