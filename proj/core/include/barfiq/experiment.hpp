#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "barfiq/config.hpp"

namespace barfiq::experiment {

struct PreparedData {
  data::GeneratedStream stream;
  std::vector<fringe::PhaseResult> phases;
  std::size_t n_windows = 0;
  data::DatasetSplit split;  // normalized
};

/// Generate -> reconstruct -> window -> split -> normalize.
PreparedData prepare_dataset(const ExperimentConfig& cfg);

std::string dataset_manifest_json(const ExperimentConfig& cfg, const PreparedData& prepared);

struct Baselines {
  head::WrappedMetrics persistence;
  head::WrappedMetrics constant_mean;
};

Baselines compute_baselines(const data::DatasetSplit& split);

struct RunOutcome {
  training::RunReport report;
  Baselines baselines;
};

/// Trains once and, if `out_dir` is non-empty, writes checkpoint.bin,
/// metrics.json, summary.json, epochs.csv, run_log.csv and config.txt there.
RunOutcome run_training(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                        const training::EpochCallback& on_epoch = {});

struct SweepRow {
  std::size_t window_len = 0;
  std::string variant;
  bool ok = false;
  std::string error;
  head::WrappedMetrics test;
  double val_mae = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  double persistence_mae = 0.0;
};

/// One training run per (window, variant) cell. Failed cells are recorded
/// and the sweep continues. Cells run on up to cfg.sweep.jobs threads; rows
/// are returned in grid order regardless.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const std::vector<std::size_t>& windows,
                                const std::vector<std::string>& variants);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(std::istream& in);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace barfiq::experiment
