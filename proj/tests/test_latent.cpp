// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "msgan/errors.hpp"
#include "msgan/latent.hpp"
#include "msgan/nets.hpp"
#include "msgan/random.hpp"
#include "support/test_support.hpp"

using namespace msgan;
using msgan::testing::random_code;

namespace {

struct MixFixture : ::testing::Test {
  RowSchedule schedule = RowSchedule::toy();
  MappingNetwork mapper{MappingConfig{}, 3};
  StyleMapper styler{RowSchedule::toy(), 64, 4};

  SCode random_s(std::uint64_t seed) const { return to_style(styler, map_noise(mapper, gaussian_vector(seed, 64), 10)); }
};

}  // namespace

TEST(TailMask, FullScaleStartTwelveSelectsFourteenRows) {
  const auto m = make_tail_mask(RowSchedule::full_scale(), 12);
  EXPECT_EQ(m.size(), 26u);
  EXPECT_EQ(m.count_ones(), 14u);
  for (std::size_t i = 0; i < 26; ++i) EXPECT_EQ(m.keeps_reference(i), i >= 12);
}

TEST(TailMask, DegenerateBounds) {
  const auto s = RowSchedule::toy();
  EXPECT_EQ(make_tail_mask(s, 0), StyleMixMask::ones(10));
  EXPECT_EQ(make_tail_mask(s, 10), StyleMixMask::zeros(10));
  EXPECT_THROW(make_tail_mask(s, 11), BoundsError);
}

TEST(TailMask, DefaultStartMirrorsTwelveOfTwentySix) {
  EXPECT_EQ(default_mask_start(10), 5u);
  EXPECT_EQ(default_mask_start(26), 12u);
  EXPECT_EQ(default_mask_start(3), 2u);
}

TEST(Mask, StringRoundTripAndComplement) {
  const auto m = StyleMixMask::from_string("0011010");
  EXPECT_EQ(m.to_string(), "0011010");
  EXPECT_EQ(m.complement().to_string(), "1100101");
  EXPECT_EQ(m.complement().complement(), m);
  EXPECT_THROW(StyleMixMask::from_string("01x"), ArgumentError);
}

TEST(Schedule, Presets) {
  EXPECT_EQ(RowSchedule::toy().widths(), (std::vector<int>{64, 64, 64, 64, 64, 64, 32, 32, 16, 16}));
  EXPECT_EQ(RowSchedule::full_scale().rows(), 26u);
  EXPECT_EQ(RowSchedule::full_scale().unique_widths(), (std::vector<int>{512, 256, 128, 64, 32}));
  EXPECT_EQ(RowSchedule::micro().widths(), (std::vector<int>{8, 8, 4}));
}

TEST_F(MixFixture, AllOnesKeepsReferenceForAnyNoise) {
  const SCode s = random_code(schedule, 1);
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    EXPECT_EQ(style_mix(s, gaussian_vector(seed, 64), StyleMixMask::ones(10), mapper, styler), s);
}

TEST_F(MixFixture, AllZerosYieldsMappedNoise) {
  const SCode s = random_code(schedule, 1);
  const auto z = gaussian_vector(17, 64);
  EXPECT_EQ(style_mix(s, z, StyleMixMask::zeros(10), mapper, styler), random_s(17));
}

TEST_F(MixFixture, RowByRowAgainstIndependentStyleCode) {
  const SCode s = random_code(schedule, 2);
  const auto m = StyleMixMask::from_string("1010011100");
  const SCode mixed = style_mix(s, gaussian_vector(5, 64), m, mapper, styler);
  const SCode r = random_s(5);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(mixed.row(i), m.keeps_reference(i) ? s.row(i) : r.row(i)) << i;
}

// The mask algebra over 100 seeded cases: fixity, degenerate masks and the
// complement identity, all exact.
TEST_F(MixFixture, MaskAlgebraHundredSeededCases) {
  Rng rng(99);
  for (int c = 0; c < 100; ++c) {
    const SCode s = random_code(schedule, 1000 + c);
    const auto z = gaussian_vector(2000 + c, 64);
    std::vector<std::uint8_t> bits(10);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
    const StyleMixMask m(bits);
    const SCode r = random_s(2000 + c);

    const SCode a = style_mix(s, z, m, mapper, styler);
    for (std::size_t i = 0; i < 10; ++i)
      if (m.keeps_reference(i)) ASSERT_EQ(a.row(i), s.row(i));
    ASSERT_EQ(style_mix(s, z, StyleMixMask::ones(10), mapper, styler), s);
    ASSERT_EQ(style_mix(s, z, StyleMixMask::zeros(10), mapper, styler), r);
    const SCode b = style_mix(s, z, m.complement(), mapper, styler);
    // Each row of a and b is a copy of s or r, so the complement identity
    // holds as a pairing of exact copies. The floating sum is checked too.
    for (std::size_t i = 0; i < 10; ++i) {
      const bool direct = a.row(i) == s.row(i) && b.row(i) == r.row(i);
      const bool swapped = a.row(i) == r.row(i) && b.row(i) == s.row(i);
      ASSERT_TRUE(direct || swapped) << "case " << c << " row " << i;
    }
    ASSERT_LT(distance(a + b - r, s), 1e-12) << "case " << c;
  }
}

TEST_F(MixFixture, DeterministicAndScheduleChecked) {
  const SCode s = random_code(schedule, 4);
  const auto z = gaussian_vector(8, 64);
  const auto m = make_tail_mask(schedule, 5);
  EXPECT_EQ(style_mix(s, z, m, mapper, styler), style_mix(s, z, m, mapper, styler));
  EXPECT_THROW(style_mix(s, z, StyleMixMask::ones(3), mapper, styler), ShapeError);
  EXPECT_THROW(style_mix(random_code(RowSchedule::micro(), 1), z, StyleMixMask::ones(3), mapper, styler),
               ShapeError);
}

TEST_F(MixFixture, WPlusVariantMatchesBroadcast) {
  const auto z = gaussian_vector(6, 64);
  const WCode w = map_noise(mapper, gaussian_vector(7, 64), 10);
  const WCode mixed = style_mix(w, z, make_tail_mask(schedule, 4), mapper);
  const Eigen::VectorXd p = mapper.forward(z);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(mixed.row(i), i < 4 ? p : w.row(i));
}

TEST_F(MixFixture, ReferenceSetProperties) {
  const SCode s = random_code(schedule, 3);
  const auto one = build_reference_set(s, 1, StyleMixMask::ones(10), 5, mapper, styler);
  ASSERT_EQ(one.mixed_codes.size(), 1u);
  EXPECT_EQ(one.mixed_codes[0], s);

  const auto m = make_tail_mask(schedule, 5);
  const auto a = build_reference_set(s, 8, m, 42, mapper, styler);
  const auto b = build_reference_set(s, 8, m, 42, mapper, styler);
  EXPECT_EQ(a.mixed_codes, b.mixed_codes);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t r = 5; r < 10; ++r) EXPECT_EQ(a.mixed_codes[i].row(r), s.row(r));
    for (std::size_t j = i + 1; j < 8; ++j) {
      double d = 0.0;
      for (std::size_t r = 0; r < 5; ++r) d += (a.mixed_codes[i].row(r) - a.mixed_codes[j].row(r)).norm();
      EXPECT_GT(d, 0.0);
    }
  }
  EXPECT_THROW(build_reference_set(s, 0, m, 1, mapper, styler), ArgumentError);
}

TEST(MixingStream, OrderIndependentDraws) {
  const MixingStream st(derive_seed({5, 0x5eed}), 16);
  const auto a = st.noise(3, 1);
  (void)st.noise(0, 0);
  EXPECT_EQ(st.noise(3, 1), a);
  EXPECT_NE(st.noise(3, 2), a);
  EXPECT_NE(st.noise(4, 1), a);
  EXPECT_EQ(a.size(), 16);
}

TEST(Code, FlatRoundTripAndArithmetic) {
  const auto s = RowSchedule::toy();
  const SCode a = random_code(s, 1);
  EXPECT_EQ(SCode::from_flat(s, a.flatten()), a);
  EXPECT_EQ(a.flatten().size(), s.total_dimension());
  EXPECT_EQ(2.0 * a - a, a);
  EXPECT_DOUBLE_EQ(distance(a, a), 0.0);
  SCode b = a;
  EXPECT_THROW(b.set_row(0, Eigen::VectorXd::Zero(3)), ShapeError);
}
