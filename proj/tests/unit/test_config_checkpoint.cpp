#include <sstream>

#include <gtest/gtest.h>

#include "barfiq/checkpoint.hpp"
#include "barfiq/config.hpp"
#include "barfiq/errors.hpp"
#include "barfiq/experiment.hpp"
#include "barfiq/verify/checks.hpp"

using namespace barfiq;

TEST(Config, ParseCommentsAndValues) {
  ExperimentConfig c;
  std::istringstream in(
      "# benchmark\n"
      "gen.n_shots = 1200\n"
      "\n"
      "model.d_model=16   # trailing comment\n"
      "fusion.variant = sa\n"
      "fusion.kernel_sizes = 3,5\n"
      "qfm.norm_eval = token\n"
      "sweep.windows = 8, 16\n");
  parse_config(c, in);
  EXPECT_EQ(c.gen.n_shots, 1200u);
  EXPECT_EQ(c.network.model.d_model, 16u);
  EXPECT_EQ(c.network.fusion.variant(), "sa");
  EXPECT_EQ(c.network.fusion.kernel_sizes, (std::vector<std::size_t>{3, 5}));
  EXPECT_EQ(c.network.qfm.norm_eval, qfm::NormEval::token);
  EXPECT_EQ(c.sweep.windows, (std::vector<std::size_t>{8, 16}));
}

TEST(Config, ErrorsNameTheLine) {
  ExperimentConfig c;
  std::istringstream unknown("gen.n_shots = 10\nmodel.width = 3\n");
  try {
    parse_config(c, unknown);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  std::istringstream bad_value("train.lr = fast\n");
  EXPECT_THROW(parse_config(c, bad_value), ConfigError);
  std::istringstream no_eq("train.lr 0.1\n");
  EXPECT_THROW(parse_config(c, no_eq), ConfigError);
  std::istringstream negative("train.batch_size = -3\n");
  EXPECT_THROW(parse_config(c, negative), ConfigError);
}

TEST(Config, Overrides) {
  ExperimentConfig c;
  apply_override(c, "train.lr=0.5");
  apply_override(c, "loss.lambda = 0.2");
  EXPECT_EQ(c.train.lr, 0.5);
  EXPECT_EQ(c.loss.lambda, 0.2);
  EXPECT_THROW(apply_override(c, "train.lr"), ConfigError);
  EXPECT_THROW(apply_override(c, "nope=1"), ConfigError);
}

TEST(Config, DumpRoundTrip) {
  ExperimentConfig c;
  apply_override(c, "gen.noise_sigma=0.0123456789012345");
  apply_override(c, "fusion.variant=ca");
  apply_override(c, "sweep.variants=none,sa");
  const std::string text = dump_config(c);
  ExperimentConfig d;
  std::istringstream in(text);
  parse_config(d, in);
  EXPECT_EQ(dump_config(d), text);
  EXPECT_EQ(d.gen.noise_sigma, 0.0123456789012345);
  // every key appears exactly once
  for (const auto& k : config_keys()) EXPECT_NE(text.find(k + " = "), std::string::npos) << k;
}

TEST(Config, ValidationCatchesInconsistentModel) {
  ExperimentConfig c;
  apply_override(c, "model.top_k=9");
  EXPECT_THROW(c.validate(), ConfigError);
  ExperimentConfig d;
  apply_override(d, "data.window_len=2");
  apply_override(d, "model.patch_len=4");
  EXPECT_THROW(d.validate(), ConfigError);
}

namespace {

std::unique_ptr<BarfiqNetwork> tiny(std::uint64_t seed) {
  return std::make_unique<BarfiqNetwork>(verify::tiny_network_config(), 8, data::kNumChannels, seed);
}

}  // namespace

TEST(Checkpoint, RoundTripIsExact) {
  auto a = tiny(1);
  a->parameters().buffers().begin()->second(0, 0) = 0.123;
  std::stringstream ss;
  checkpoint::save(a->parameters(), ss);
  auto b = tiny(2);
  checkpoint::load(b->parameters(), ss);
  for (const auto& [name, p] : a->parameters().params())
    EXPECT_EQ(max_abs_diff(p.value(), b->parameters().get(name).value()), 0.0) << name;
  for (const auto& [name, t] : a->parameters().buffers())
    EXPECT_EQ(max_abs_diff(t, b->parameters().buffers().at(name)), 0.0) << name;
  std::stringstream again;
  checkpoint::save(b->parameters(), again);
  ss.clear();
  ss.seekg(0);
  EXPECT_EQ(again.str(), ss.str());
  EXPECT_EQ(ss.str().substr(0, 4), "BARQ");
}

TEST(Checkpoint, RejectsCorruptOrMismatched) {
  auto a = tiny(1);
  std::stringstream ss;
  checkpoint::save(a->parameters(), ss);
  const std::string good = ss.str();

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  std::istringstream m(bad_magic);
  EXPECT_THROW(checkpoint::load(a->parameters(), m), DataError);

  std::istringstream truncated(good.substr(0, good.size() / 2));
  const Tensor before = a->parameters().params().begin()->second.value();
  EXPECT_THROW(checkpoint::load(a->parameters(), truncated), DataError);
  EXPECT_EQ(max_abs_diff(a->parameters().params().begin()->second.value(), before), 0.0);

  NetworkConfig other = verify::tiny_network_config();
  other.fusion.set_variant("none");
  BarfiqNetwork different(other, 8, data::kNumChannels, 1);
  std::istringstream in(good);
  EXPECT_THROW(checkpoint::load(different.parameters(), in), DataError);
}

TEST(SweepCsv, RoundTrip) {
  std::vector<experiment::SweepRow> rows(2);
  rows[0].window_len = 8;
  rows[0].variant = "ca_sa";
  rows[0].ok = true;
  rows[0].test = {0.1, 0.2, std::sqrt(0.1), 40};
  rows[0].val_mae = 0.3;
  rows[0].best_epoch = 4;
  rows[0].epochs_run = 9;
  rows[0].persistence_mae = 0.25;
  rows[1].window_len = 128;
  rows[1].variant = "none";
  rows[1].ok = false;
  rows[1].error = "split empty, after windowing";
  std::stringstream ss;
  experiment::write_sweep_csv(ss, rows);
  const auto back = experiment::read_sweep_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].test.mae, 0.2);
  EXPECT_EQ(back[0].best_epoch, 4u);
  EXPECT_TRUE(back[0].ok);
  EXPECT_FALSE(back[1].ok);
  EXPECT_EQ(back[1].variant, "none");
  EXPECT_FALSE(back[1].error.empty());
}

TEST(Experiment, PreparedDataManifest) {
  ExperimentConfig c;
  c.gen.n_shots = 200;
  const auto p = experiment::prepare_dataset(c);
  EXPECT_EQ(p.split.train.size() + p.split.val.size() + p.split.test.size(), p.n_windows);
  const std::string m = experiment::dataset_manifest_json(c, p);
  EXPECT_NE(m.find("delta_phi"), std::string::npos);
  EXPECT_NE(m.find("train"), std::string::npos);
  c.gen.n_shots = 10;
  EXPECT_THROW(experiment::prepare_dataset(c), DataError);
}
