#include "drd/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>

#include "drd/io.hpp"

namespace drd::eval {

namespace {

double percent(std::size_t ok, std::size_t n) {
  return n == 0 ? kUndefined : 100.0 * static_cast<double>(ok) / static_cast<double>(n);
}

std::vector<std::size_t> frame_indices(std::size_t n, std::size_t max_frames) {
  std::vector<std::size_t> idx;
  if (max_frames == 0 || max_frames >= n) {
    for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
  } else {
    for (std::size_t k = 0; k < max_frames; ++k) idx.push_back(k * n / max_frames);
  }
  return idx;
}

std::uint64_t snr_key(double snr_db) { return std::bit_cast<std::uint64_t>(snr_db); }

bool within(int err, int tol) { return err >= 0 && err <= tol; }

}  // namespace

MatchResult match_detections(std::span<const Detection4D> dets, std::span<const GroundTruthLabel> gts) {
  struct Candidate {
    int cost;
    std::size_t det, gt;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (std::size_t j = 0; j < gts.size(); ++j) {
      const int dr = std::abs(static_cast<int>(dets[i].r_bin) - static_cast<int>(gts[j].r_bin));
      const int dd = std::abs(static_cast<int>(dets[i].d_bin) - static_cast<int>(gts[j].d_bin));
      if (std::max(dr, dd) <= kRdTolerance) cands.push_back({dr + dd, i, j});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.cost, a.det, a.gt) < std::tie(b.cost, b.det, b.gt);
  });
  std::vector<bool> det_used(dets.size(), false), gt_used(gts.size(), false);
  MatchResult out;
  for (const auto& c : cands) {
    if (det_used[c.det] || gt_used[c.gt]) continue;
    det_used[c.det] = gt_used[c.gt] = true;
    const auto& d = dets[c.det];
    const auto& g = gts[c.gt];
    MatchPair p;
    p.det = c.det;
    p.gt = c.gt;
    p.r_err = std::abs(static_cast<int>(d.r_bin) - static_cast<int>(g.r_bin));
    p.d_err = std::abs(static_cast<int>(d.d_bin) - static_cast<int>(g.d_bin));
    if (d.az_bin) p.az_err = std::abs(static_cast<int>(*d.az_bin) - static_cast<int>(g.az_bin));
    if (d.el_bin) p.el_err = std::abs(static_cast<int>(*d.el_bin) - static_cast<int>(g.el_bin));
    out.pairs.push_back(p);
  }
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (!det_used[i]) out.unmatched_dets.push_back(i);
  }
  for (std::size_t j = 0; j < gts.size(); ++j) {
    if (!gt_used[j]) out.unmatched_gts.push_back(j);
  }
  return out;
}

void AccuracyCounts::add(const MatchResult& m, std::size_t n_dets, std::size_t n_gts) {
  n_det += n_dets;
  n_gt += n_gts;
  for (const auto& p : m.pairs) {
    if (p.r_err <= kRdTolerance && p.d_err <= kRdTolerance) ++rd_ok;
    if (within(p.az_err, kAngleTolerance)) ++az_ok;
    if (within(p.el_err, kAngleTolerance)) ++el_ok;
  }
  misses += m.unmatched_gts.size();
  false_alarms += m.unmatched_dets.size();
}

AccuracyReport AccuracyCounts::report() const {
  AccuracyReport r;
  r.rd_accuracy = percent(rd_ok, n_det);
  r.az_accuracy = percent(az_ok, n_det);
  r.el_accuracy = percent(el_ok, n_det);
  r.n_det = n_det;
  r.n_gt = n_gt;
  r.misses = misses;
  r.false_alarms = false_alarms;
  return r;
}

AccuracyReport accuracy(const MatchResult& m, std::size_t n_dets, std::size_t n_gts) {
  AccuracyCounts c;
  c.add(m, n_dets, n_gts);
  return c.report();
}

double ordering_value(double accuracy) { return std::isnan(accuracy) ? 0.0 : accuracy; }

AccuracyReport evaluate(const train::FrameSet& frames, const Detector& detector, double snr_db,
                        std::uint64_t noise_seed, std::size_t max_frames) {
  AccuracyCounts counts;
  for (const std::size_t i : frame_indices(frames.size(), max_frames)) {
    auto sample = frames.load(i);
    if (std::isfinite(snr_db)) sample.frame = sim::add_noise(sample.frame, snr_db, sim::derive_seed(noise_seed, i));
    const auto dets = detector(sample.frame);
    counts.add(match_detections(dets, sample.labels), dets.size(), sample.labels.size());
  }
  return counts.report();
}

classic::CalibrationMatrix averaged_calibration(const std::vector<sim::ChannelPerturbation>& perturbations,
                                                const std::vector<std::uint32_t>& radar_ids,
                                                const RadarParams& params, const AngleGrid& grid) {
  if (radar_ids.empty()) throw InvalidArgument("averaged_calibration: no radars given");
  std::vector<classic::CalibrationMatrix> mats;
  for (const auto id : radar_ids) {
    const auto it = std::find_if(perturbations.begin(), perturbations.end(),
                                 [id](const sim::ChannelPerturbation& p) { return p.radar_id == id; });
    if (it == perturbations.end()) throw InvalidArgument("averaged_calibration: no perturbation for radar " + std::to_string(id));
    mats.push_back(classic::CalibrationMatrix::measure(grid, params.geometry, &*it, id));
  }
  return classic::average_calibration(mats);
}

Detector MethodSet::detector(const std::string& method) const {
  if (method == "drd") {
    if (drd == nullptr) throw InvalidArgument("method 'drd' needs a trained model");
    return [this](const RawFrame& f) { return model::infer(*drd, f, infer); };
  }
  if (method == "classic1" || method == "classic2") {
    const auto params = method == "classic1" ? classic1 : classic2;
    return [this, params](const RawFrame& f) { return classic::classic_detect(f, params, calibration, grid); };
  }
  throw InvalidArgument("unknown method '" + method + "' (expected drd, classic1 or classic2)");
}

Comparison compare_methods(const train::FrameSet& test, const MethodSet& methods) {
  return {evaluate(test, methods.detector("drd")), evaluate(test, methods.detector("classic1")),
          evaluate(test, methods.detector("classic2"))};
}

std::string comparison_csv(const Comparison& c, const std::string& config_echo) {
  std::string out = io::comment_block(config_echo) + kComparisonHeader + "\n";
  auto row = [&](const char* name, double AccuracyReport::*field) {
    out += std::string(name) + "," + io::format_metric(c.drd.*field) + "," + io::format_metric(c.classic1.*field) +
           "," + io::format_metric(c.classic2.*field) + "\n";
  };
  row("rd_acc", &AccuracyReport::rd_accuracy);
  row("az_acc", &AccuracyReport::az_accuracy);
  row("el_acc", &AccuracyReport::el_accuracy);
  return out;
}

std::vector<SweepRow> snr_sweep(const train::FrameSet& test, const MethodSet& methods, std::vector<double> snrs,
                                int trials, std::uint64_t seed) {
  if (snrs.empty()) throw InvalidArgument("snr_sweep: empty snr list");
  if (trials < 1) throw InvalidArgument("snr_sweep: trials must be >= 1");
  std::sort(snrs.begin(), snrs.end());
  std::vector<Detector> detectors;
  for (const auto& m : kMethods) detectors.push_back(methods.detector(m));

  std::vector<SweepRow> rows;
  for (const double snr : snrs) {
    std::vector<AccuracyCounts> counts(kMethods.size());
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t trial_seed = sim::derive_seed(seed, snr_key(snr), static_cast<std::uint64_t>(t));
      for (std::size_t i = 0; i < test.size(); ++i) {
        auto sample = test.load(i);
        if (std::isfinite(snr)) sample.frame = sim::add_noise(sample.frame, snr, sim::derive_seed(trial_seed, i));
        for (std::size_t m = 0; m < detectors.size(); ++m) {
          const auto dets = detectors[m](sample.frame);
          counts[m].add(match_detections(dets, sample.labels), dets.size(), sample.labels.size());
        }
      }
    }
    for (std::size_t m = 0; m < kMethods.size(); ++m) rows.push_back({snr, kMethods[m], counts[m].report()});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& config_echo) {
  std::string out = io::comment_block(config_echo) + kSweepHeader + "\n";
  for (const auto& r : rows) {
    out += io::format_double(r.snr_db) + "," + r.method + "," + io::format_metric(r.report.rd_accuracy) + "," +
           io::format_metric(r.report.az_accuracy) + "," + io::format_metric(r.report.el_accuracy) + "\n";
  }
  return out;
}

AblationResult ablation_separate_angnet(const train::FrameSet& train, const train::FrameSet& test,
                                        const model::DrdModel<float>& joint, const train::AblationSchedule& schedule,
                                        std::uint64_t seed) {
  const auto train_crops = train::gather_gt_crops(train);
  const auto separate = train::train_separate_angnet(train_crops, joint.ang_config, joint.rd_config, schedule, seed);

  std::size_t n = 0, joint_az = 0, joint_el = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto sample = test.load(i);
    const auto rd = classic::rd_transform(sample.frame, classic::WindowKind::kHamming);
    const auto pred = model::predict_angles(joint, rd, sample.labels);
    for (std::size_t k = 0; k < pred.size(); ++k) {
      joint_az += std::abs(pred[k].first - static_cast<int>(sample.labels[k].az_bin)) <= kAngleTolerance;
      joint_el += std::abs(pred[k].second - static_cast<int>(sample.labels[k].el_bin)) <= kAngleTolerance;
      ++n;
    }
  }

  const auto test_crops = train::gather_gt_crops(test);
  std::size_t sep_az = 0, sep_el = 0;
  if (!test_crops.az.empty()) {
    const auto out = separate.evaluate({{"crop", test_crops.crops}}, {"az", "el"});
    const int n_az = joint.ang_config.n_az, n_el = joint.ang_config.n_el;
    for (std::size_t k = 0; k < test_crops.az.size(); ++k) {
      const float* az = out.at("az").data() + k * static_cast<std::size_t>(n_az);
      const float* el = out.at("el").data() + k * static_cast<std::size_t>(n_el);
      const int az_hat = static_cast<int>(std::max_element(az, az + n_az) - az);
      const int el_hat = static_cast<int>(std::max_element(el, el + n_el) - el);
      sep_az += std::abs(az_hat - test_crops.az[k]) <= kAngleTolerance;
      sep_el += std::abs(el_hat - test_crops.el[k]) <= kAngleTolerance;
    }
  }
  return {percent(joint_az, n), percent(joint_el, n), percent(sep_az, test_crops.az.size()),
          percent(sep_el, test_crops.el.size()), n};
}

std::string ablation_csv(const AblationResult& r, const std::string& config_echo) {
  return io::comment_block(config_echo) + kAblationHeader + "\n" + "az_acc," + io::format_metric(r.joint_az) + "," +
         io::format_metric(r.separate_az) + "\n" + "el_acc," + io::format_metric(r.joint_el) + "," +
         io::format_metric(r.separate_el) + "\n";
}

}  // namespace drd::eval
