// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <numeric>

#include <gtest/gtest.h>

#include "msgan/errors.hpp"
#include "msgan/losses.hpp"
#include "msgan/random.hpp"
#include "msgan/synthetic.hpp"
#include "msgan/trainer.hpp"
#include "support/test_support.hpp"

using namespace msgan;
using msgan::testing::micro_base;
using msgan::testing::random_code;
using msgan::testing::random_image;

namespace {

std::vector<NamedImage> micro_refs(int n) {
  std::vector<NamedImage> refs;
  for (int k = 0; k < n; ++k) refs.push_back({"s" + std::to_string(k), random_image(3, 8, 100 + k)});
  return refs;
}

TrainConfig quick_config(int iterations) {
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.inversion.steps = 10;
  cfg.inversion.mean_samples = 16;
  cfg.snapshot_every = 0;
  return cfg;
}

std::vector<double> moving_average(const std::vector<StepRecord>& log, std::size_t window) {
  std::vector<double> out;
  for (std::size_t i = 0; i + window <= log.size(); i += window) {
    double s = 0.0;
    for (std::size_t j = i; j < i + window; ++j) s += log[j].terms.total;
    out.push_back(s / static_cast<double>(window));
  }
  return out;
}

}  // namespace

TEST(TrainConfig, ValidationJsonAndHash) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.stn_lr = 0.0;
  EXPECT_NO_THROW(c.validate());
  TrainConfig bad;
  bad.iterations = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.generator_lr = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.style_chunk = 0;
  EXPECT_THROW(bad.validate(), ConfigError);

  TrainConfig d;
  d.mask_start = 3;
  d.seed = 44;
  d.loss.contextual_weight = 0.1;
  const nlohmann::json j = d;
  const TrainConfig e = j.get<TrainConfig>();
  EXPECT_EQ(config_hash(e), config_hash(d));
  EXPECT_NE(config_hash(e), config_hash(TrainConfig{}));
}

TEST(TrainConfig, MaskResolution) {
  const auto sch = RowSchedule::toy();
  TrainConfig c;
  EXPECT_EQ(c.resolve_mask(sch), make_tail_mask(sch, 5));
  c.mask_start = 2;
  EXPECT_EQ(c.resolve_mask(sch), make_tail_mask(sch, 2));
  c.mask_bits = "0101010101";
  EXPECT_EQ(c.resolve_mask(sch).to_string(), "0101010101");
  c.mask_bits = "01";
  EXPECT_THROW(c.resolve_mask(sch), ConfigError);
}

TEST(Prepare, IdentityBankAndDeterministicHash) {
  const auto base = micro_base(5);
  const auto refs = micro_refs(4);
  const auto cfg = quick_config(5);
  const TrainingState a = prepare(refs, cfg, base);
  const TrainingState b = prepare(refs, cfg, base);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.step, 0);
  ASSERT_EQ(a.styles(), 4u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(a.bank.stn(k), STN::identity(base.schedule()));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) EXPECT_GT(distance(a.reference_codes[i], a.reference_codes[j]), 0.0);
}

TEST(Prepare, SingleStyleAndErrors) {
  const auto base = micro_base(5);
  const auto refs = micro_refs(1);
  const TrainingState st = prepare(refs, quick_config(5), base);
  EXPECT_EQ(st.styles(), 1u);
  auto dup = micro_refs(2);
  dup[1].name = dup[0].name;
  EXPECT_THROW(prepare(dup, quick_config(5), base), ArgumentError);
  EXPECT_THROW(prepare(std::vector<NamedImage>{}, quick_config(5), base), ArgumentError);
}

// At step 0 the state's loss must equal the loss of the base generator on the
// mixed codes, computed here without the trainer.
TEST(TrainStep, StepZeroIdentityTransparency) {
  const auto base = micro_base(5);
  const auto refs = micro_refs(3);
  const auto cfg = quick_config(5);
  const TrainingState st = prepare(refs, cfg, base);
  std::vector<Eigen::VectorXd> noise;
  for (int k = 0; k < 3; ++k) noise.push_back(gaussian_vector(900 + k, base.z_dim()));
  const StepGradients g = compute_gradients(st, noise);

  std::vector<Image> outs, targets;
  for (std::size_t k = 0; k < 3; ++k) {
    outs.push_back(base.generator.synthesize(style_mix(st.reference_codes[k], noise[k], st.mask, base.mapping, base.styler)));
    targets.push_back(refs[k].image);
  }
  EXPECT_NEAR(g.terms.total, total_loss(base.discriminator, outs, targets, cfg.loss), 1e-10);
}

TEST(TrainStep, ChunkSizeDoesNotChangeGradients) {
  const auto base = micro_base(5);
  const auto refs = micro_refs(5);
  auto cfg = quick_config(5);
  cfg.style_chunk = 1;
  TrainingState a = prepare(refs, cfg, base);
  TrainingState b = a;
  b.config.style_chunk = 3;
  const auto ga = compute_gradients(a);
  const auto gb = compute_gradients(b);
  EXPECT_NEAR(ga.terms.total, gb.terms.total, 1e-10);
  double diff = 0.0, norm = 0.0;
  for (std::size_t p = 0; p < ga.generator.size(); ++p)
    for (std::size_t i = 0; i < ga.generator[p].size(); ++i) {
      diff = std::max(diff, std::abs(ga.generator[p][i] - gb.generator[p][i]));
      norm = std::max(norm, std::abs(ga.generator[p][i]));
    }
  EXPECT_LE(diff, 1e-10 * std::max(1.0, norm));
}

TEST(TrainStep, FrozenStnWhenLearningRateZero) {
  const auto base = micro_base(5);
  auto cfg = quick_config(20);
  cfg.stn_lr = 0.0;
  TrainingState st = prepare(micro_refs(2), cfg, base);
  const STNBank before = st.bank;
  const Generator g0 = st.generator;
  for (int i = 0; i < 20; ++i) train_step(st);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(st.bank.stn(k), before.stn(k));
  EXPECT_NE(st.generator.params()[0].value, g0.params()[0].value);
  EXPECT_THROW(train_step(st), BoundsError);
}

TEST(TrainStep, StnMovesWhenLearningRatePositive) {
  const auto base = micro_base(5);
  auto cfg = quick_config(3);
  cfg.stn_lr = 1e-3;
  TrainingState st = prepare(micro_refs(2), cfg, base);
  train_step(st);
  EXPECT_FALSE(st.bank.stn(0) == STN::identity(base.schedule()));
}

TEST(TrainStep, NonFiniteLossAbortsWithDiagnostic) {
  const auto base = micro_base(5);
  auto refs = micro_refs(1);
  const std::vector<SCode> codes{random_code(base.schedule(), 1)};
  refs[0].image.at(0, 0, 0) = std::numeric_limits<double>::quiet_NaN();
  const auto dir = msgan::testing::scratch_dir("diag");
  FinetuneOptions opts;
  opts.snapshot_dir = dir;
  EXPECT_THROW(finetune_from_state(prepare_from_codes(refs, codes, quick_config(3), base), opts), NumericError);
  EXPECT_TRUE(std::filesystem::exists(dir / "diagnostic.msgan"));
}

TEST(Finetune, ZeroIterationsIsBaseGenerator) {
  const auto base = micro_base(5);
  const auto model = finetune(micro_refs(2), quick_config(0), base);
  for (std::uint64_t s = 0; s < 3; ++s) {
    const SCode c = random_code(base.schedule(), s);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(model.render(c, k), base.generator.synthesize(c));
  }
}

TEST(Finetune, DeterministicReplayAndFrozenPrior) {
  const auto base = micro_base(5);
  const std::string h0 = base_model_hash(base);
  auto cfg = quick_config(6);
  cfg.stn_lr = 1e-3;
  const auto a = finetune(micro_refs(3), cfg, base);
  const auto b = finetune(micro_refs(3), cfg, base);
  EXPECT_EQ(model_to_archive(a).serialize(), model_to_archive(b).serialize());
  EXPECT_EQ(base_model_hash(base), h0);
  EXPECT_EQ(a.base_hash, h0);
}

TEST(Finetune, MetricsLogAndSnapshots) {
  const auto base = micro_base(5);
  auto cfg = quick_config(7);
  cfg.snapshot_every = 3;
  const auto dir = msgan::testing::scratch_dir("logs");
  FinetuneOptions opts;
  opts.metrics_log = dir / "m.tsv";
  opts.snapshot_dir = dir / "snap";
  int seen = 0;
  opts.on_step = [&](const StepRecord&) { ++seen; };
  const auto r = finetune_detailed(micro_refs(2), cfg, base, opts);
  EXPECT_EQ(seen, 7);
  const auto log = read_metrics_log(opts.metrics_log);
  ASSERT_EQ(log.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(log[i].step, static_cast<int>(i));
    EXPECT_NEAR(log[i].terms.total, r.log[i].terms.total, 1e-9 * std::abs(r.log[i].terms.total));
  }
  EXPECT_TRUE(std::filesystem::exists(opts.snapshot_dir / "step_000003.msgan"));
  EXPECT_TRUE(std::filesystem::exists(opts.snapshot_dir / "step_000006.msgan"));
  EXPECT_FALSE(std::filesystem::exists(opts.snapshot_dir / "step_000007.msgan"));
  EXPECT_NO_THROW(load_model(opts.snapshot_dir / "step_000003.msgan"));
  EXPECT_THROW(read_metrics_log(dir / "missing.tsv"), IoError);
}

// Two synthetic styles on the pretrained prior, 200 steps: the 10-step moving
// average of the loss must end below where it started.
TEST(Finetune, LossDecreasesOnToyTwoStyles) {
  const BaseModel& base = msgan::testing::toy_base();
  const auto refs = synthetic_references(base, 2, 31);
  TrainConfig cfg;
  cfg.iterations = 200;
  cfg.snapshot_every = 0;
  const auto r = finetune_detailed(refs, cfg, base);
  const auto avg = moving_average(r.log, 10);
  ASSERT_EQ(avg.size(), 20u);
  std::cout << "moving average: " << avg.front() << " -> " << avg.back() << '\n';
  EXPECT_LT(avg.back(), avg.front());
  EXPECT_LT(r.log.back().terms.total, r.log.front().terms.total);

  // Transformed reference codes spread at least as far apart as at identity.
  auto spread = [&](const STNBank& bank) {
    return distance(bank.stn(0).apply(r.reference_codes[0]), bank.stn(1).apply(r.reference_codes[1]));
  };
  EXPECT_GE(spread(r.model.bank), spread(STNBank::create(base.schedule(), r.model.names(), StnInit::Identity)));
}
