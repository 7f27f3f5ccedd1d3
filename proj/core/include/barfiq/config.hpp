#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "barfiq/dataio.hpp"
#include "barfiq/fringe.hpp"
#include "barfiq/head.hpp"
#include "barfiq/network.hpp"
#include "barfiq/training.hpp"

namespace barfiq {

struct DataConfig {
  std::size_t window_len = 8;
  double train_frac = 0.7;
  double val_frac = 0.15;

  void validate() const;
};

struct SweepConfig {
  std::vector<std::size_t> windows{8, 16, 32, 64, 128};
  std::vector<std::string> variants{"ca_sa", "sa", "ca", "none"};
  std::size_t jobs = 1;

  void validate() const;
};

struct ExperimentConfig {
  data::GeneratorConfig gen;
  fringe::ReconstructOptions fringe;
  DataConfig data;
  NetworkConfig network;
  head::LossConfig loss;
  training::TrainConfig train;
  SweepConfig sweep;

  void validate() const;
};

/// Flat `key = value` documents with `#` comments and dotted keys
/// (gen.*, fringe.*, data.*, model.*, fusion.*, qfm.*, head.*, loss.*,
/// train.*, sweep.*). Lists are comma separated. Unknown keys and
/// malformed values throw ConfigError.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// "key=value" form used by --set.
void apply_override(ExperimentConfig& cfg, std::string_view assignment);

void parse_config(ExperimentConfig& cfg, std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key with its current value, one per line, in a fixed order.
/// Parsing the output reproduces the configuration.
std::string dump_config(const ExperimentConfig& cfg);

std::vector<std::string> config_keys();

}  // namespace barfiq
