// drd: command-line driver for dataset generation, training, inference and
// the evaluation experiments. Exit codes: 0 ok, 1 usage or I/O, 2 numerical.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drd/checks.hpp"
#include "drd/classic.hpp"
#include "drd/config.hpp"
#include "drd/drd_net.hpp"
#include "drd/eval.hpp"
#include "drd/io.hpp"
#include "drd/nn/kernels.hpp"
#include "drd/signal_sim.hpp"
#include "drd/train.hpp"

namespace fs = std::filesystem;
using namespace drd;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 1;
};

struct Context {
  config::RunConfig cfg;
  std::string echo;
  fs::path out;
};

Context make_context(const Globals& g, const std::string& default_out) {
  Context c;
  c.cfg = g.config.empty() ? config::RunConfig{} : config::load(g.config);
  if (g.seed) c.cfg.seed = *g.seed;
  c.cfg.finalize();
  c.echo = c.cfg.echo();
  c.out = g.out.empty() ? fs::path(default_out) : fs::path(g.out);
  nn::set_compute_threads(g.threads);
  return c;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

fs::path manifest_path(const Context& c, const std::string& flag) {
  return flag.empty() ? fs::path(c.cfg.dataset_dir) / "manifest.csv" : fs::path(flag);
}

fs::path checkpoint_path(const Context& c, const std::string& flag) {
  return flag.empty() ? fs::path(c.cfg.checkpoint) : fs::path(flag);
}

train::TrainState load_state(const Context& c, const fs::path& path) {
  const auto ckpt = io::read_checkpoint(path);
  const auto saved = config::parse(ckpt.config_echo);
  const auto diff = config::architecture_mismatches(saved, c.cfg);
  if (!diff.empty()) {
    std::string msg = path.string() + ": checkpoint does not match the current config:";
    for (const auto& d : diff) msg += " " + d;
    throw IoError(msg);
  }
  return train::from_checkpoint(ckpt, c.cfg.rdnet, c.cfg.angnet, c.cfg.schedule);
}

void save_state(const Context& c, const train::TrainState& s, const fs::path& path) {
  io::write_checkpoint(path, train::to_checkpoint(s, c.echo));
}

eval::MethodSet method_set(const Context& c, const sim::DatasetManifest& m, const model::DrdModel<float>* drd) {
  eval::MethodSet ms;
  ms.drd = drd;
  ms.infer = c.cfg.infer;
  ms.classic1 = c.cfg.cfar1;
  ms.classic2 = c.cfg.cfar2;
  ms.grid = c.cfg.grid;
  const auto perts = io::read_perturbations(m.root / "perturbations.csv");
  ms.calibration = eval::averaged_calibration(perts, m.radars_of_split(sim::Split::kTrain), c.cfg.radar, c.cfg.grid);
  return ms;
}

std::string report_line(const std::string& name, const eval::AccuracyReport& r) {
  return name + ": rd " + io::format_metric(r.rd_accuracy) + " az " + io::format_metric(r.az_accuracy) + " el " +
         io::format_metric(r.el_accuracy) + " (n_det " + std::to_string(r.n_det) + ", n_gt " + std::to_string(r.n_gt) +
         ", misses " + std::to_string(r.misses) + ", false alarms " + std::to_string(r.false_alarms) + ")";
}

std::string log_csv(const Context& c, const std::vector<train::LogRow>& rows) {
  std::string out = io::comment_block(c.echo) + train::kLogHeader + "\n";
  for (const auto& r : rows) out += train::format_log_row(r) + "\n";
  return out;
}

train::EpochCallback progress(const Context& c, const fs::path& ckpt, std::vector<train::LogRow>& rows,
                              const fs::path& log) {
  return [&c, ckpt, &rows, log](const train::LogRow& row, const train::TrainState& s) {
    rows.push_back(row);
    save_state(c, s, ckpt);
    io::write_text(log, log_csv(c, rows));
    std::cerr << "epoch " << row.epoch << " step " << row.step << " loss rd " << io::format_metric(row.l_rd)
              << " az " << io::format_metric(row.l_azi) << " el " << io::format_metric(row.l_ele) << " | val rd "
              << io::format_metric(row.val_rd_acc) << " az " << io::format_metric(row.val_az_acc) << " el "
              << io::format_metric(row.val_el_acc) << "\n";
  };
}

// ---- commands

int cmd_simulate(const Globals& g) {
  auto c = make_context(g, "");
  if (g.out.empty()) c.out = c.cfg.dataset_dir;
  ensure_dir(c.out);
  const auto ds = sim::generate_calibration_dataset(c.cfg.dataset, c.cfg.radar, c.cfg.grid, c.out, c.echo);
  std::cout << "frames " << ds.manifest.entries.size() << " radars " << c.cfg.dataset.n_radars;
  for (const auto s : {sim::Split::kTrain, sim::Split::kVal, sim::Split::kTest}) {
    std::cout << " " << sim::to_string(s) << " " << ds.manifest.of_split(s).size() << "/"
              << ds.manifest.radars_of_split(s).size();
  }
  std::cout << " (frames/radars)\n";
  return 0;
}

struct TrainArgs {
  std::string manifest, resume, checkpoint;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  const auto c = make_context(g, ".");
  ensure_dir(c.out);
  const auto m = io::read_manifest(manifest_path(c, a.manifest));
  const train::FrameSet tr(m, sim::Split::kTrain, c.cfg.radar);
  const train::FrameSet va(m, sim::Split::kVal, c.cfg.radar);
  auto state = a.resume.empty() ? train::initial_state(c.cfg.rdnet, c.cfg.angnet, c.cfg.schedule, c.cfg.seed)
                                : load_state(c, a.resume);
  const fs::path ckpt = c.out / c.cfg.checkpoint;
  std::vector<train::LogRow> rows;
  train::train_drd(state, tr, va.size() ? &va : nullptr, c.cfg.schedule, c.cfg.seed,
                   progress(c, ckpt, rows, c.out / "train_log.csv"));
  save_state(c, state, ckpt);
  io::write_text(c.out / "train_log.csv", log_csv(c, rows));
  std::cout << "trained to epoch " << state.epoch << " step " << state.step << " -> " << ckpt.string() << "\n";
  return 0;
}

int cmd_finetune(const Globals& g, const TrainArgs& a) {
  const auto c = make_context(g, ".");
  ensure_dir(c.out);
  const auto m = io::read_manifest(manifest_path(c, a.manifest));
  const train::FrameSet tr(m, sim::Split::kTrain, c.cfg.radar);
  const train::FrameSet va(m, sim::Split::kVal, c.cfg.radar);
  auto state = load_state(c, checkpoint_path(c, a.checkpoint));
  const fs::path ckpt = c.out / ("noise_" + fs::path(c.cfg.checkpoint).filename().string());
  std::vector<train::LogRow> rows;
  train::finetune_noise(state, tr, va.size() ? &va : nullptr, c.cfg.finetune_schedule(), c.cfg.finetune_epochs,
                        c.cfg.seed, progress(c, ckpt, rows, c.out / "finetune_log.csv"));
  save_state(c, state, ckpt);
  io::write_text(c.out / "finetune_log.csv", log_csv(c, rows));
  std::cout << "fine-tuned to epoch " << state.epoch << " step " << state.step << " -> " << ckpt.string() << "\n";
  return 0;
}

int cmd_infer(const Globals& g, const std::string& checkpoint, const std::string& frame_path) {
  const auto c = make_context(g, "");
  const auto state = load_state(c, checkpoint_path(c, checkpoint));
  const auto frame = io::read_frame(frame_path, c.cfg.radar);
  const auto dets = model::infer(state.model, frame, c.cfg.infer);
  std::string out = "r_bin,d_bin,az_bin,el_bin,class,score\n";
  for (const auto& d : dets) {
    char score[32];
    std::snprintf(score, sizeof score, "%.6f", d.score);
    out += std::to_string(d.r_bin) + "," + std::to_string(d.d_bin) + "," +
           (d.az_bin ? std::to_string(*d.az_bin) : "") + "," + (d.el_bin ? std::to_string(*d.el_bin) : "") + "," +
           std::to_string(d.class_label) + "," + score + "\n";
  }
  std::cout << out;
  if (!g.out.empty()) io::write_text(c.out, io::comment_block(c.echo) + out);
  return 0;
}

struct EvalArgs {
  std::string manifest, checkpoint, method = "drd", split = "test";
  double snr_db = sim::kNoNoise;
};

int cmd_eval(const Globals& g, const EvalArgs& a) {
  const auto c = make_context(g, ".");
  ensure_dir(c.out);
  const auto m = io::read_manifest(manifest_path(c, a.manifest));
  std::optional<train::TrainState> state;
  if (a.method == "drd") state = load_state(c, checkpoint_path(c, a.checkpoint));
  const auto ms = method_set(c, m, state ? &state->model : nullptr);
  const train::FrameSet frames(m, sim::split_from_string(a.split), c.cfg.radar);
  const auto r = eval::evaluate(frames, ms.detector(a.method), a.snr_db, sim::derive_seed(c.cfg.seed, 0xE7A1));
  std::string csv = io::comment_block(c.echo) + "metric,value\n";
  csv += "rd_acc," + io::format_metric(r.rd_accuracy) + "\naz_acc," + io::format_metric(r.az_accuracy) +
         "\nel_acc," + io::format_metric(r.el_accuracy) + "\nn_det," + std::to_string(r.n_det) + "\nn_gt," +
         std::to_string(r.n_gt) + "\nmisses," + std::to_string(r.misses) + "\nfalse_alarms," +
         std::to_string(r.false_alarms) + "\n";
  io::write_text(c.out / ("eval_" + a.method + ".csv"), csv);
  std::cout << report_line(a.method, r) << "\n";
  return 0;
}

int cmd_compare(const Globals& g, const EvalArgs& a) {
  const auto c = make_context(g, ".");
  ensure_dir(c.out);
  const auto m = io::read_manifest(manifest_path(c, a.manifest));
  const auto state = load_state(c, checkpoint_path(c, a.checkpoint));
  const auto ms = method_set(c, m, &state.model);
  const train::FrameSet test(m, sim::Split::kTest, c.cfg.radar);
  const auto cmp = eval::compare_methods(test, ms);
  io::write_text(c.out / "comparison.csv", eval::comparison_csv(cmp, c.echo));
  std::cout << report_line("drd", cmp.drd) << "\n"
            << report_line("classic1", cmp.classic1) << "\n"
            << report_line("classic2", cmp.classic2) << "\n";
  return 0;
}

int cmd_sweep(const Globals& g, const EvalArgs& a) {
  const auto c = make_context(g, ".");
  ensure_dir(c.out);
  const auto m = io::read_manifest(manifest_path(c, a.manifest));
  const auto state = load_state(c, checkpoint_path(c, a.checkpoint));
  const auto ms = method_set(c, m, &state.model);
  const train::FrameSet test(m, sim::Split::kTest, c.cfg.radar);
  const auto rows = eval::snr_sweep(test, ms, c.cfg.sweep_snrs, c.cfg.sweep_trials, sim::derive_seed(c.cfg.seed, 0x5EE9));
  io::write_text(c.out / "snr_sweep.csv", eval::sweep_csv(rows, c.echo));
  for (const auto& r : rows) std::cout << report_line(io::format_double(r.snr_db) + " dB " + r.method, r.report) << "\n";
  return 0;
}

int cmd_ablation(const Globals& g, const EvalArgs& a) {
  const auto c = make_context(g, ".");
  ensure_dir(c.out);
  const auto m = io::read_manifest(manifest_path(c, a.manifest));
  const auto state = load_state(c, checkpoint_path(c, a.checkpoint));
  const train::FrameSet tr(m, sim::Split::kTrain, c.cfg.radar);
  const train::FrameSet test(m, sim::Split::kTest, c.cfg.radar);
  const auto r = eval::ablation_separate_angnet(tr, test, state.model, c.cfg.ablation, sim::derive_seed(c.cfg.seed, 0xAB1A));
  io::write_text(c.out / "ablation.csv", eval::ablation_csv(r, c.echo));
  std::cout << "joint az " << io::format_metric(r.joint_az) << " el " << io::format_metric(r.joint_el)
            << " | separate az " << io::format_metric(r.separate_az) << " el " << io::format_metric(r.separate_el)
            << " (" << r.n_crops << " crops)\n";
  return 0;
}

int cmd_gradcheck(const Globals& g) {
  const auto c = make_context(g, ".");
  ensure_dir(c.out);
  const auto reports = checks::gradcheck_suite(c.cfg.seed);
  io::write_text(c.out / "gradcheck.csv", checks::gradcheck_csv(reports, c.echo));
  bool ok = true;
  for (const auto& r : reports) {
    ok = ok && r.report.passed();
    std::printf("%-30s max_rel %.3e checked %zu kinks %zu %s\n", r.name.c_str(), r.report.max_rel_error,
                r.report.checked, r.report.kinks_excluded, r.report.passed() ? "ok" : "FAIL");
  }
  return ok ? 0 : 2;
}

struct LatencyStats {
  double mean = 0, median = 0, p99 = 0;
};

LatencyStats latency_stats(std::vector<double> ms) {
  std::sort(ms.begin(), ms.end());
  LatencyStats s;
  for (double v : ms) s.mean += v;
  s.mean /= static_cast<double>(ms.size());
  const std::size_t n = ms.size();
  s.median = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  // Nearest-rank percentile.
  s.p99 = ms[static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n))) - 1];
  return s;
}

int cmd_bench(const Globals& g, const std::string& checkpoint, bool untrained) {
  const auto c = make_context(g, ".");
  ensure_dir(c.out);
  const auto model = untrained ? model::DrdModel<float>::create(c.cfg.rdnet, c.cfg.angnet, c.cfg.seed)
                               : load_state(c, checkpoint_path(c, checkpoint)).model;

  // Synthetic frames: one random target each, random radar perturbation, 30 dB.
  const int n = std::max(c.cfg.bench_frames, 100);
  std::mt19937_64 rng(sim::derive_seed(c.cfg.seed, 0xBE4C));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto pert = sim::ChannelPerturbation::random(0, c.cfg.radar.n_antennas, rng());
  std::vector<RawFrame> frames;
  for (int i = 0; i < n; ++i) {
    sim::TargetSpec t;
    t.range_m = range_of_bin(4 + static_cast<std::uint32_t>(u(rng) * (c.cfg.radar.n_samples - 8)), c.cfg.radar);
    t.azimuth_deg = c.cfg.grid.az_min_deg + u(rng) * (c.cfg.grid.az_max_deg - c.cfg.grid.az_min_deg);
    t.elevation_deg = c.cfg.grid.el_min_deg + u(rng) * (c.cfg.grid.el_max_deg - c.cfg.grid.el_min_deg);
    frames.push_back(sim::synthesize_frame({t}, c.cfg.radar, c.cfg.grid, &pert, 30.0, rng()).frame);
  }
  const auto cal = classic::CalibrationMatrix::measure(c.cfg.grid, c.cfg.radar.geometry, nullptr, 0);

  using clock = std::chrono::steady_clock;
  auto time_it = [&](const auto& fn) {
    fn(frames[0]);  // warm-up: FFT plans, allocations
    std::vector<double> ms;
    for (const auto& f : frames) {
      const auto t0 = clock::now();
      fn(f);
      ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
    }
    return latency_stats(ms);
  };
  const std::vector<std::pair<std::string, LatencyStats>> results{
      {"drd", time_it([&](const RawFrame& f) { return model::infer(model, f, c.cfg.infer); })},
      {"classic1", time_it([&](const RawFrame& f) { return classic::classic_detect(f, c.cfg.cfar1, cal, c.cfg.grid); })},
      {"classic2", time_it([&](const RawFrame& f) { return classic::classic_detect(f, c.cfg.cfar2, cal, c.cfg.grid); })},
  };
  std::string csv = io::comment_block(c.echo) + "method,frames,mean_ms,median_ms,p99_ms\n";
  for (const auto& [name, s] : results) {
    char line[160];
    std::snprintf(line, sizeof line, "%s,%d,%.3f,%.3f,%.3f\n", name.c_str(), n, s.mean, s.median, s.p99);
    csv += line;
    std::printf("%-9s mean %8.3f ms  median %8.3f ms  p99 %8.3f ms  (%.1f FPS; reference ~20 ms / 50 FPS)\n",
                name.c_str(), s.mean, s.median, s.p99, 1000.0 / s.mean);
  }
  io::write_text(c.out / "bench.csv", csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep Radar Detector: simulation, training and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out", g.out, "output directory (infer: output file)");
  app.add_option("--threads", g.threads, "BLAS threads")->check(CLI::PositiveNumber);

  TrainArgs ta;
  EvalArgs ea;
  std::string frame_path;
  bool untrained = false;

  auto* sim_cmd = app.add_subcommand("simulate", "generate the calibration-style dataset");
  auto* train_cmd = app.add_subcommand("train", "train DRD (RD-only warm-up, then joint)");
  train_cmd->add_option("--manifest", ta.manifest, "dataset manifest");
  train_cmd->add_option("--resume", ta.resume, "checkpoint to resume from");
  auto* ft_cmd = app.add_subcommand("finetune-noise", "fine-tune a checkpoint on noisy frames");
  ft_cmd->add_option("--manifest", ta.manifest, "dataset manifest");
  ft_cmd->add_option("--checkpoint", ta.checkpoint, "checkpoint to start from");
  auto* infer_cmd = app.add_subcommand("infer", "detect targets in one frame file");
  infer_cmd->add_option("--checkpoint", ta.checkpoint, "trained checkpoint");
  infer_cmd->add_option("frame", frame_path, "frame file")->required();

  auto add_eval_opts = [&](CLI::App* cmd) {
    cmd->add_option("--manifest", ea.manifest, "dataset manifest");
    cmd->add_option("--checkpoint", ea.checkpoint, "trained checkpoint");
  };
  auto* eval_cmd = app.add_subcommand("eval", "accuracy of one method on one split");
  add_eval_opts(eval_cmd);
  eval_cmd->add_option("--method", ea.method, "drd, classic1 or classic2")
      ->check(CLI::IsMember({"drd", "classic1", "classic2"}));
  eval_cmd->add_option("--split", ea.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_option("--snr", ea.snr_db, "add noise at this SNR (dB) before detection");
  auto* cmp_cmd = app.add_subcommand("compare", "DRD vs both classical chains on the test split");
  add_eval_opts(cmp_cmd);
  auto* sweep_cmd = app.add_subcommand("snr-sweep", "accuracy vs SNR for all methods");
  add_eval_opts(sweep_cmd);
  auto* abl_cmd = app.add_subcommand("ablation", "joint vs separately trained Ang-Net");
  add_eval_opts(abl_cmd);
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  auto* bench_cmd = app.add_subcommand("bench", "per-frame inference latency");
  bench_cmd->add_option("--checkpoint", ta.checkpoint, "trained checkpoint");
  bench_cmd->add_flag("--untrained", untrained, "time a freshly initialized model instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sim_cmd->parsed()) return cmd_simulate(g);
    if (train_cmd->parsed()) return cmd_train(g, ta);
    if (ft_cmd->parsed()) return cmd_finetune(g, ta);
    if (infer_cmd->parsed()) return cmd_infer(g, ta.checkpoint, frame_path);
    if (eval_cmd->parsed()) return cmd_eval(g, ea);
    if (cmp_cmd->parsed()) return cmd_compare(g, ea);
    if (sweep_cmd->parsed()) return cmd_sweep(g, ea);
    if (abl_cmd->parsed()) return cmd_ablation(g, ea);
    if (gc_cmd->parsed()) return cmd_gradcheck(g);
    if (bench_cmd->parsed()) return cmd_bench(g, ta.checkpoint, untrained);
  } catch (const NumericalError& e) {
    std::cerr << "drd: numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "drd: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
