#include "barfiq/experiment.hpp"

#include <future>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "barfiq/checkpoint.hpp"
#include "barfiq/csv.hpp"
#include "barfiq/errors.hpp"

namespace barfiq::experiment {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PreparedData prepare_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  PreparedData p;
  p.stream = data::generate_stream(cfg.gen);
  p.phases = fringe::reconstruct_stream(p.stream.shots, cfg.fringe);
  auto samples = data::build_windows(p.stream.shots, p.phases, cfg.data.window_len);
  p.n_windows = samples.size();
  auto split = data::split_time_ordered(std::move(samples), cfg.data.train_frac, cfg.data.val_frac);
  if (split.train.empty() || split.val.empty() || split.test.empty()) {
    throw DataError("window length " + std::to_string(cfg.data.window_len) + " leaves an empty split (" +
                    std::to_string(p.n_windows) + " windows)");
  }
  p.split = data::normalize(split);
  return p;
}

std::string dataset_manifest_json(const ExperimentConfig& cfg, const PreparedData& prepared) {
  ordered_json j;
  j["n_shots"] = prepared.stream.shots.size();
  std::size_t ok = 0, insufficient = 0, degenerate = 0;
  for (const auto& r : prepared.phases) {
    if (r.status == fringe::PhaseStatus::ok) ++ok;
    else if (r.status == fringe::PhaseStatus::missing_insufficient_window) ++insufficient;
    else ++degenerate;
  }
  j["phase_status"] = {{"ok", ok}, {"missing_insufficient_window", insufficient}, {"missing_degenerate_amplitude", degenerate}};
  j["window_len"] = cfg.data.window_len;
  j["n_windows"] = prepared.n_windows;
  j["splits"] = {{"train", prepared.split.train.size()}, {"val", prepared.split.val.size()}, {"test", prepared.split.test.size()}};
  const auto& names = data::channel_names();
  j["channels"] = std::vector<std::string>(names.begin(), names.end());
  if (prepared.split.norm_stats) {
    const auto& ns = *prepared.split.norm_stats;
    ordered_json norm;
    for (std::size_t c = 0; c < names.size(); ++c)
      norm[names[c]] = {{"mean", ns.mean[c]}, {"scale", ns.scale[c]}, {"std", ns.std_dev[c]}};
    j["normalization"] = norm;
  }
  j["generator_seed"] = cfg.gen.seed;
  return j.dump(2) + "\n";
}

Baselines compute_baselines(const data::DatasetSplit& split) {
  return {training::persistence_baseline(split, split.test).metrics,
          training::constant_mean_baseline(split, split.test).metrics};
}

namespace {

ordered_json metrics_json(const head::WrappedMetrics& m) {
  return {{"mse", m.mse}, {"mae", m.mae}, {"rmse", m.rmse}, {"n_samples", m.n_samples}};
}

std::string epochs_csv(const training::RunReport& r) {
  std::ostringstream out;
  out << "epoch,train_loss,val_mae,val_mse,max_grad_norm,max_clipped_norm\n";
  for (const auto& e : r.epochs) {
    out << e.epoch << ',' << csv::format_double(e.train_loss) << ',' << csv::format_double(e.val_mae) << ','
        << csv::format_double(e.val_mse) << ',' << csv::format_double(e.max_grad_norm) << ','
        << csv::format_double(e.max_clipped_norm) << '\n';
  }
  return out.str();
}

}  // namespace

RunOutcome run_training(const ExperimentConfig& cfg, const fs::path& out_dir, const training::EpochCallback& on_epoch) {
  const PreparedData prepared = prepare_dataset(cfg);
  RunOutcome outcome;
  outcome.baselines = compute_baselines(prepared.split);
  auto result = training::train(prepared.split, cfg.network, cfg.train, cfg.loss, on_epoch);
  outcome.report = result.report;
  if (out_dir.empty()) return outcome;

  fs::create_directories(out_dir);
  checkpoint::save(result.network->parameters(), out_dir / "checkpoint.bin");
  write_text_file(out_dir / "metrics.json", head::metrics_to_json(outcome.report.test_metrics));
  write_text_file(out_dir / "epochs.csv", epochs_csv(outcome.report));
  write_text_file(out_dir / "config.txt", dump_config(cfg));
  write_text_file(out_dir / "manifest.json", dataset_manifest_json(cfg, prepared));

  const auto& r = outcome.report;
  ordered_json s;
  s["window_len"] = cfg.data.window_len;
  s["fusion_variant"] = cfg.network.fusion.variant();
  s["epochs_run"] = r.epochs.size();
  s["best_epoch"] = r.best_epoch;
  s["stopped_early"] = r.stopped_early;
  s["val"] = metrics_json(r.val_metrics);
  s["test"] = metrics_json(r.test_metrics);
  s["persistence"] = metrics_json(outcome.baselines.persistence);
  s["constant_mean"] = metrics_json(outcome.baselines.constant_mean);
  write_text_file(out_dir / "summary.json", s.dump(2) + "\n");

  std::ostringstream log;
  log << "window_len,variant,best_epoch,epochs_run,test_mse,test_mae,test_rmse,persistence_mae,constant_mean_mae\n"
      << cfg.data.window_len << ',' << cfg.network.fusion.variant() << ',' << r.best_epoch << ',' << r.epochs.size()
      << ',' << csv::format_double(r.test_metrics.mse) << ',' << csv::format_double(r.test_metrics.mae) << ','
      << csv::format_double(r.test_metrics.rmse) << ',' << csv::format_double(outcome.baselines.persistence.mae)
      << ',' << csv::format_double(outcome.baselines.constant_mean.mae) << '\n';
  write_text_file(out_dir / "run_log.csv", log.str());
  return outcome;
}

namespace {

SweepRow run_cell(ExperimentConfig cfg, std::size_t window, const std::string& variant) {
  SweepRow row;
  row.window_len = window;
  row.variant = variant;
  try {
    cfg.data.window_len = window;
    cfg.network.fusion.set_variant(variant);
    const RunOutcome o = run_training(cfg, {});
    row.test = o.report.test_metrics;
    row.val_mae = o.report.val_metrics.mae;
    row.best_epoch = o.report.best_epoch;
    row.epochs_run = o.report.epochs.size();
    row.persistence_mae = o.baselines.persistence.mae;
    row.ok = true;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

const std::vector<std::string> kSweepHeader = {"window_len", "variant",   "status",     "test_mse",        "test_mae",
                                               "test_rmse",  "n_samples", "val_mae",    "best_epoch",      "epochs_run",
                                               "persistence_mae", "error"};

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const std::vector<std::size_t>& windows,
                                const std::vector<std::string>& variants) {
  struct Cell {
    std::size_t window;
    std::string variant;
  };
  std::vector<Cell> cells;
  for (std::size_t w : windows)
    for (const auto& v : variants) cells.push_back({w, v});

  std::vector<SweepRow> rows(cells.size());
  const std::size_t jobs = std::max<std::size_t>(1, cfg.sweep.jobs);
  for (std::size_t start = 0; start < cells.size(); start += jobs) {
    const std::size_t stop = std::min(cells.size(), start + jobs);
    std::vector<std::future<SweepRow>> pending;
    for (std::size_t i = start; i < stop; ++i)
      pending.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, run_cell, cfg,
                                   cells[i].window, cells[i].variant));
    for (std::size_t i = start; i < stop; ++i) rows[i] = pending[i - start].get();
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  for (std::size_t i = 0; i < kSweepHeader.size(); ++i) out << (i ? "," : "") << kSweepHeader[i];
  out << '\n';
  for (const auto& r : rows) {
    out << r.window_len << ',' << r.variant << ',' << (r.ok ? "ok" : "failed") << ',';
    if (r.ok) {
      out << csv::format_double(r.test.mse) << ',' << csv::format_double(r.test.mae) << ','
          << csv::format_double(r.test.rmse) << ',' << r.test.n_samples << ',' << csv::format_double(r.val_mae) << ','
          << r.best_epoch << ',' << r.epochs_run << ',' << csv::format_double(r.persistence_mae) << ",\n";
    } else {
      out << ",,,,,,,," << sanitize(r.error) << '\n';
    }
  }
}

std::vector<SweepRow> read_sweep_csv(std::istream& in) {
  csv::Reader reader(in, kSweepHeader);
  std::vector<std::string> f;
  std::vector<SweepRow> rows;
  while (reader.next(f)) {
    const std::size_t ln = reader.line();
    SweepRow r;
    r.window_len = static_cast<std::size_t>(csv::parse_int(f[0], ln));
    r.variant = f[1];
    if (f[2] != "ok" && f[2] != "failed") throw DataError("sweep.csv line " + std::to_string(ln) + ": bad status");
    r.ok = f[2] == "ok";
    if (r.ok) {
      r.test.mse = csv::parse_double(f[3], ln);
      r.test.mae = csv::parse_double(f[4], ln);
      r.test.rmse = csv::parse_double(f[5], ln);
      r.test.n_samples = static_cast<std::size_t>(csv::parse_int(f[6], ln));
      r.val_mae = csv::parse_double(f[7], ln);
      r.best_epoch = static_cast<std::size_t>(csv::parse_int(f[8], ln));
      r.epochs_run = static_cast<std::size_t>(csv::parse_int(f[9], ln));
      r.persistence_mae = csv::parse_double(f[10], ln);
    }
    r.error = f[11];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace barfiq::experiment
