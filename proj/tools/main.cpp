#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "barfiq/checkpoint.hpp"
#include "barfiq/config.hpp"
#include "barfiq/csv.hpp"
#include "barfiq/errors.hpp"
#include "barfiq/experiment.hpp"
#include "barfiq/verify/checks.hpp"

namespace fs = std::filesystem;
using namespace barfiq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct GlobalOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

// File values first, then --seed, then --set (last one wins).
ExperimentConfig resolve_config(const GlobalOptions& g) {
  ExperimentConfig cfg = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (g.seed) {
    cfg.gen.seed = *g.seed;
    cfg.train.seed = *g.seed;
  }
  for (const auto& o : g.overrides) apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

fs::path out_dir(const GlobalOptions& g) {
  fs::path p(g.out_dir);
  fs::create_directories(p);
  return p;
}

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

int cmd_gen_data(const GlobalOptions& g) {
  const auto cfg = resolve_config(g);
  const auto dir = out_dir(g);
  const auto prepared = experiment::prepare_dataset(cfg);
  {
    std::ofstream out(dir / "shots.csv");
    fringe::write_shots_csv(out, prepared.stream.shots);
  }
  std::ostringstream truth;
  truth << "iter,delta_phi,phi_ai\n";
  for (std::size_t i = 0; i < prepared.stream.shots.size(); ++i) {
    truth << prepared.stream.shots[i].iter << ',' << csv::format_double(prepared.stream.true_delta_phi[i]) << ','
          << csv::format_double(prepared.stream.true_phi_ai[i]) << '\n';
  }
  experiment::write_text_file(dir / "truth.csv", truth.str());
  experiment::write_text_file(dir / "manifest.json", experiment::dataset_manifest_json(cfg, prepared));
  std::cout << "wrote " << prepared.stream.shots.size() << " shots, " << prepared.n_windows << " windows to "
            << dir.string() << "\n";
  return kExitOk;
}

int cmd_fit_fringe(const GlobalOptions& g, const std::string& input) {
  const auto cfg = resolve_config(g);
  const auto dir = out_dir(g);
  std::vector<fringe::ShotRecord> shots;
  if (input.empty()) {
    shots = data::generate_stream(cfg.gen).shots;
  } else {
    std::ifstream in(input);
    if (!in) throw DataError("cannot open " + input);
    shots = fringe::read_shots_csv(in);
  }
  const auto phases = fringe::reconstruct_stream(shots, cfg.fringe);
  std::ofstream out(dir / "phases.csv");
  fringe::write_phases_csv(out, phases);
  std::size_t ok = 0;
  for (const auto& p : phases) ok += p.ok();
  std::cout << ok << " of " << phases.size() << " shots reconstructed; wrote " << (dir / "phases.csv").string()
            << "\n";
  return kExitOk;
}

int cmd_train(const GlobalOptions& g, bool quiet) {
  const auto cfg = resolve_config(g);
  const auto dir = out_dir(g);
  const auto outcome = experiment::run_training(cfg, dir, [quiet](const training::EpochRecord& e) {
    if (!quiet)
      std::cout << "epoch " << e.epoch << "  train_loss " << fmt(e.train_loss) << "  val_mae " << fmt(e.val_mae)
                << std::endl;
  });
  const auto& r = outcome.report;
  std::cout << "best epoch " << r.best_epoch << " of " << r.epochs.size() << (r.stopped_early ? " (early stop)" : "")
            << "\n"
            << "test   mse " << fmt(r.test_metrics.mse) << "  mae " << fmt(r.test_metrics.mae) << "  rmse "
            << fmt(r.test_metrics.rmse) << "\n"
            << "persistence mae " << fmt(outcome.baselines.persistence.mae) << "  constant-mean mae "
            << fmt(outcome.baselines.constant_mean.mae) << "\n";
  return kExitOk;
}

int cmd_eval(const GlobalOptions& g, const std::string& ckpt) {
  const auto cfg = resolve_config(g);
  const auto dir = out_dir(g);
  const auto prepared = experiment::prepare_dataset(cfg);
  const auto& split = prepared.split;
  BarfiqNetwork net(cfg.network, cfg.data.window_len, data::kNumChannels, cfg.train.seed);
  checkpoint::load(net.parameters(), ckpt.empty() ? dir / "checkpoint.bin" : fs::path(ckpt));
  const auto ev = training::evaluate(net, split.test);
  experiment::write_text_file(dir / "eval_metrics.json", head::metrics_to_json(ev.metrics));
  std::ostringstream preds;
  preds << "target_index,phi_hat,phi_true\n";
  for (std::size_t i = 0; i < ev.phi_hat.size(); ++i)
    preds << split.test[i].target_index << ',' << csv::format_double(ev.phi_hat[i]) << ','
          << csv::format_double(ev.phi_true[i]) << '\n';
  experiment::write_text_file(dir / "predictions.csv", preds.str());
  std::cout << "test mse " << fmt(ev.metrics.mse) << "  mae " << fmt(ev.metrics.mae) << "  rmse "
            << fmt(ev.metrics.rmse) << "  n " << ev.metrics.n_samples << "\n";
  return kExitOk;
}

void print_sweep(const std::vector<experiment::SweepRow>& rows) {
  std::cout << "  L  variant  status      test_mse    test_mae   persist_mae  epochs\n";
  for (const auto& r : rows) {
    char line[160];
    if (r.ok)
      std::snprintf(line, sizeof line, "%3zu  %-7s  %-6s  %10.6f  %10.6f  %11.6f  %6zu", r.window_len,
                    r.variant.c_str(), "ok", r.test.mse, r.test.mae, r.persistence_mae, r.epochs_run);
    else
      std::snprintf(line, sizeof line, "%3zu  %-7s  failed: %s", r.window_len, r.variant.c_str(), r.error.c_str());
    std::cout << line << "\n";
  }
}

int run_grid(const GlobalOptions& g, const std::vector<std::size_t>& windows, const std::vector<std::string>& variants,
             const std::string& file) {
  const auto cfg = resolve_config(g);
  const auto dir = out_dir(g);
  const auto rows = experiment::run_sweep(cfg, windows, variants);
  std::ofstream out(dir / file);
  experiment::write_sweep_csv(out, rows);
  experiment::write_text_file(dir / "config.txt", dump_config(cfg));
  print_sweep(rows);
  return kExitOk;
}

int cmd_sweep(const GlobalOptions& g) {
  const auto cfg = resolve_config(g);
  return run_grid(g, cfg.sweep.windows, cfg.sweep.variants, "sweep.csv");
}

int cmd_ablate(const GlobalOptions& g) {
  const auto cfg = resolve_config(g);
  return run_grid(g, {cfg.data.window_len}, {"ca_sa", "sa", "ca", "none"}, "sweep.csv");
}

void write_correlation(const fs::path& path, const qfm::Correlation& c) {
  std::ostringstream out;
  for (std::size_t i = 0; i < c.n; ++i) out << "q" << i + 1 << (i + 1 < c.n ? "," : "\n");
  for (std::size_t i = 0; i < c.n; ++i)
    for (std::size_t j = 0; j < c.n; ++j) {
      const auto& e = c.at(i, j);
      out << (e ? csv::format_double(*e) : "NA") << (j + 1 < c.n ? ',' : '\n');
    }
  experiment::write_text_file(path, out.str());
}

int cmd_diagnose(const GlobalOptions& g, const std::string& ckpt) {
  const auto cfg = resolve_config(g);
  const auto dir = out_dir(g);
  const auto prepared = experiment::prepare_dataset(cfg);
  BarfiqNetwork net(cfg.network, cfg.data.window_len, data::kNumChannels, cfg.train.seed);
  if (!ckpt.empty()) checkpoint::load(net.parameters(), fs::path(ckpt));

  // Token rows from every test window are pooled per head.
  const std::size_t heads = cfg.network.qfm.n_heads, nq = cfg.network.qfm.n_qubits;
  std::vector<std::vector<double>> pre(heads), post(heads);
  std::size_t rows = 0;
  for (const auto& s : prepared.split.test) {
    NetworkTrace trace;
    net.forward(s.x.values, ForwardContext{}, &trace);
    for (std::size_t k = 0; k < heads; ++k) {
      pre[k].insert(pre[k].end(), trace.qfm.angles[k].data().begin(), trace.qfm.angles[k].data().end());
      post[k].insert(post[k].end(), trace.qfm.maps[k].data().begin(), trace.qfm.maps[k].data().end());
    }
    rows += trace.qfm.maps.front().rows();
  }
  std::vector<Tensor> pre_t, post_t;
  for (std::size_t k = 0; k < heads; ++k) {
    pre_t.emplace_back(rows, nq, std::move(pre[k]));
    post_t.emplace_back(rows, nq, std::move(post[k]));
  }
  const auto report = qfm::correlation_maps(pre_t, post_t);
  for (std::size_t k = 0; k < heads; ++k) {
    write_correlation(dir / ("corr_pre_head" + std::to_string(k) + ".csv"), report.pre[k]);
    write_correlation(dir / ("corr_post_head" + std::to_string(k) + ".csv"), report.post[k]);
  }
  std::cout << "wrote " << 2 * heads << " correlation matrices over " << rows << " token rows to " << dir.string()
            << "\n";
  return kExitOk;
}

int cmd_selftest(const GlobalOptions& g) {
  const auto seed = g.seed.value_or(42);
  const auto results = verify::run_selftest(seed);
  bool all = true;
  std::cout << "status  worst        tol       cases  time(s)  check\n";
  for (const auto& r : results) {
    char line[256];
    std::snprintf(line, sizeof line, "%-6s  %-11.3e  %-8.0e  %5zu  %7.2f  %s (%s)", r.passed ? "PASS" : "FAIL",
                  r.worst, r.tolerance, r.cases, r.seconds, r.name.c_str(), r.detail.c_str());
    std::cout << line << "\n";
    all = all && r.passed;
  }
  return all ? kExitOk : kExitNumerical;
}

int cmd_report(const std::string& run_dir) {
  const fs::path dir(run_dir);
  if (fs::exists(dir / "sweep.csv")) {
    std::ifstream in(dir / "sweep.csv");
    const auto rows = experiment::read_sweep_csv(in);
    if (rows.empty()) throw DataError("sweep.csv in " + run_dir + " has no rows");
    print_sweep(rows);
    std::ofstream out(dir / "report.csv");
    out << "window_len,variant,status,test_mae,persistence_mae,beats_persistence\n";
    for (const auto& r : rows)
      out << r.window_len << ',' << r.variant << ',' << (r.ok ? "ok" : "failed") << ','
          << (r.ok ? csv::format_double(r.test.mae) : "") << ',' << (r.ok ? csv::format_double(r.persistence_mae) : "")
          << ',' << (r.ok ? (r.test.mae < r.persistence_mae ? "yes" : "no") : "") << '\n';
    return kExitOk;
  }
  if (!fs::exists(dir / "run_log.csv") || !fs::exists(dir / "metrics.json"))
    throw DataError("no run artifacts (metrics.json, run_log.csv or sweep.csv) in " + run_dir);
  const auto m = head::metrics_from_json(experiment::read_text_file(dir / "metrics.json"));
  std::ifstream log(dir / "run_log.csv");
  csv::Reader reader(log, {"window_len", "variant", "best_epoch", "epochs_run", "test_mse", "test_mae", "test_rmse",
                           "persistence_mae", "constant_mean_mae"});
  std::vector<std::string> f;
  if (!reader.next(f)) throw DataError("run_log.csv is empty");
  const double persist = csv::parse_double(f[7], reader.line());
  const double cmean = csv::parse_double(f[8], reader.line());
  std::cout << "model           mse         mae        rmse\n"
            << "barfiq   " << fmt(m.mse) << "  " << fmt(m.mae) << "  " << fmt(m.rmse) << "\n"
            << "persistence mae " << fmt(persist) << "\n"
            << "constant-mean mae " << fmt(cmean) << "\n"
            << "window " << f[0] << ", variant " << f[1] << ", best epoch " << f[2] << " of " << f[3] << "\n";
  std::ofstream out(dir / "report.csv");
  out << "model,mae\nbarfiq," << csv::format_double(m.mae) << "\npersistence," << csv::format_double(persist)
      << "\nconstant_mean," << csv::format_double(cmean) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"barfiq: fringe reconstruction and residual-phase forecasting"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "Configuration file (key = value lines)")->check(CLI::ExistingFile);
  app.add_option("--out", g.out_dir, "Output directory (created if missing)");
  app.add_option("--set", g.overrides, "Override a configuration key, e.g. --set train.max_epochs=20 (repeatable)");
  app.add_option("--seed", g.seed, "Sets both gen.seed and train.seed");

  std::string input, ckpt, run_dir;
  bool quiet = false;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic shot stream, ground truth and dataset manifest");
  auto* fit = app.add_subcommand("fit-fringe", "Reconstruct residual phases from a shot CSV");
  fit->add_option("--input", input, "Shot CSV (default: generate from the config)")->check(CLI::ExistingFile);
  auto* tr = app.add_subcommand("train", "Train a model and write checkpoint and metrics");
  tr->add_flag("--quiet", quiet, "Do not print per-epoch progress");
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  ev->add_option("--checkpoint", ckpt, "Checkpoint file (default: OUT/checkpoint.bin)");
  auto* sw = app.add_subcommand("sweep", "Train every (sweep.windows x sweep.variants) cell");
  auto* ab = app.add_subcommand("ablate", "Train the four fusion variants at data.window_len");
  auto* dc = app.add_subcommand("diagnose-correlation", "Write per-head pre/post QFM correlation matrices");
  dc->add_option("--checkpoint", ckpt, "Checkpoint file (default: freshly initialized model)");
  auto* st = app.add_subcommand("selftest", "Run the property and oracle suites");
  auto* rp = app.add_subcommand("report", "Summarize a run or sweep directory");
  rp->add_option("run_dir", run_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(g);
    if (*fit) return cmd_fit_fringe(g, input);
    if (*tr) return cmd_train(g, quiet);
    if (*ev) return cmd_eval(g, ckpt);
    if (*sw) return cmd_sweep(g);
    if (*ab) return cmd_ablate(g);
    if (*dc) return cmd_diagnose(g, ckpt);
    if (*st) return cmd_selftest(g);
    if (*rp) return cmd_report(run_dir);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
