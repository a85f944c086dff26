#include "drd/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "drd/classic.hpp"
#include "drd/eval.hpp"
#include "drd/nn/kernels.hpp"

namespace drd::train {

namespace {

constexpr double kMaxExactCounter = 16777216.0;  // 2^24, exact in f32

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

model::Batch<float> make_batch(const std::vector<augment::Sample>& samples, const model::RDNetConfig& cfg,
                               bool with_crops) {
  const int b = static_cast<int>(samples.size());
  model::Batch<float> batch;
  batch.input = nn::TensorF({b, cfg.in_channels(), cfg.n_range, cfg.n_doppler});
  const std::size_t per = static_cast<std::size_t>(cfg.in_channels()) * cfg.n_range * cfg.n_doppler;
  for (int i = 0; i < b; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    const auto rd = classic::rd_transform(s.frame, classic::WindowKind::kHamming);
    if (static_cast<int>(rd.n_range()) != cfg.n_range || static_cast<int>(rd.n_doppler()) != cfg.n_doppler ||
        static_cast<int>(rd.n_antennas()) != cfg.n_antennas) {
      throw InvalidArgument("training frame dimensions do not match the model configuration");
    }
    const auto planes = model::network_input(rd);
    std::copy(planes.values().begin(), planes.values().end(), batch.input.data() + static_cast<std::size_t>(i) * per);
    const auto seg = model::segmentation_targets(s.labels, cfg.n_range, cfg.n_doppler);
    batch.seg_targets.insert(batch.seg_targets.end(), seg.begin(), seg.end());
    if (with_crops) {
      const auto crops = model::teacher_crops(i, s.labels);
      batch.crops.insert(batch.crops.end(), crops.begin(), crops.end());
    }
  }
  return batch;
}

struct RunSpec {
  int first_epoch = 1;
  int last_epoch = 0;
  int rd_only_through = 0;     // epochs <= this skip Ang-Net
  std::uint64_t step_origin = 0;  // lr milestones count from here
};

std::vector<LogRow> run_epochs(TrainState& state, const FrameSet& train, const FrameSet* val,
                               const TrainSchedule& schedule, const RunSpec& spec, std::uint64_t seed,
                               const EpochCallback& on_epoch) {
  if (train.size() == 0) throw InvalidArgument("training set is empty");
  const nn::DenormalsAreZero daz;
  const bool noisy = std::isfinite(schedule.snr_min_db) || std::isfinite(schedule.snr_max_db);
  std::vector<LogRow> rows;
  for (int epoch = spec.first_epoch; epoch <= spec.last_epoch; ++epoch) {
    const bool joint = epoch > spec.rd_only_through;
    const auto order = shuffled(train.size(), sim::derive_seed(seed, static_cast<std::uint64_t>(epoch), 0xE0C));
    double sum_rd = 0.0, sum_az = 0.0, sum_el = 0.0;
    std::size_t n_batches = 0;
    double last_lr = schedule.lr_at(state.step - spec.step_origin);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(schedule.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(schedule.batch));
      std::vector<augment::Sample> samples;
      for (std::size_t k = start; k < end; ++k) samples.push_back(train.load(order[k]));
      augment::random_augment(samples, schedule.shifts, sim::derive_seed(seed, state.step, 0xA6));
      if (noisy) {
        std::mt19937_64 rng(sim::derive_seed(seed, state.step, 0x5A));
        std::uniform_real_distribution<double> snr(schedule.snr_min_db, schedule.snr_max_db);
        for (std::size_t i = 0; i < samples.size(); ++i) {
          samples[i].frame = sim::add_noise(samples[i].frame, snr(rng), sim::derive_seed(seed, state.step, 0x400 + i));
        }
      }
      const auto batch = make_batch(samples, state.model.rd_config, joint);
      const double lr = schedule.lr_at(state.step - spec.step_origin);
      const auto loss = model::total_loss(state.model, batch, schedule.lambda1, schedule.lambda2, joint, true,
                                          nn::Mode::kTrain, sim::derive_seed(seed, state.step, 0xD0));
      if (!std::isfinite(loss.total)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(state.step) + " (l_rd=" + std::to_string(loss.rd) +
                             ", l_azi=" + std::to_string(loss.az) + ", l_ele=" + std::to_string(loss.el) + ")");
      }
      nn::adam_step(state.model.rdnet.params(), state.rd_adam, lr);
      if (joint) nn::adam_step(state.model.angnet.params(), state.ang_adam, lr);
      state.step += 1;
      last_lr = lr;
      sum_rd += loss.rd;
      sum_az += loss.az;
      sum_el += loss.el;
      ++n_batches;
    }
    LogRow row;
    row.epoch = epoch;
    row.step = state.step;
    row.lr = last_lr;
    row.l_rd = sum_rd / static_cast<double>(n_batches);
    row.l_azi = joint ? sum_az / static_cast<double>(n_batches) : eval::kUndefined;
    row.l_ele = joint ? sum_el / static_cast<double>(n_batches) : eval::kUndefined;
    row.val_rd_acc = row.val_az_acc = row.val_el_acc = eval::kUndefined;
    if (val != nullptr && val->size() > 0 && schedule.val_frames >= 0) {
      const auto& m = state.model;
      const auto report = eval::evaluate(
          *val, [&m](const RawFrame& f) { return model::infer(m, f); }, sim::kNoNoise, 0,
          static_cast<std::size_t>(schedule.val_frames));
      row.val_rd_acc = report.rd_accuracy;
      row.val_az_acc = report.az_accuracy;
      row.val_el_acc = report.el_accuracy;
    }
    state.epoch = epoch;
    rows.push_back(row);
    if (on_epoch) on_epoch(row, state);
  }
  return rows;
}

nn::TensorF scalar(double v) {
  if (v < 0 || v > kMaxExactCounter) throw InvalidArgument("checkpoint: counter exceeds exact f32 range");
  return nn::TensorF({1}, std::vector<float>{static_cast<float>(v)});
}

template <typename Map>
const nn::TensorF& require(const Map& by_name, const std::string& name) {
  const auto it = by_name.find(name);
  if (it == by_name.end()) throw IoError("checkpoint: missing tensor '" + name + "'");
  return *it->second;
}

}  // namespace

void TrainSchedule::validate() const {
  if (!(lr0 > 0.0)) throw InvalidArgument("schedule: lr0 must be positive");
  if (batch < 1) throw InvalidArgument("schedule: batch must be >= 1");
  if (rd_only_epochs < 0 || total_epochs < 0) throw InvalidArgument("schedule: epoch counts must be >= 0");
  if (!(gamma > 0.0)) throw InvalidArgument("schedule: gamma must be positive");
  for (std::size_t i = 1; i < decay_steps.size(); ++i) {
    if (decay_steps[i] <= decay_steps[i - 1]) throw InvalidArgument("schedule: decay steps must be increasing");
  }
  if (lambda1 < 0 || lambda2 < 0) throw InvalidArgument("schedule: loss weights must be >= 0");
  if (shifts.dr_min > shifts.dr_max || shifts.dd_min > shifts.dd_max) {
    throw InvalidArgument("schedule: empty shift range");
  }
  const bool a = std::isfinite(snr_min_db), b = std::isfinite(snr_max_db);
  if (a != b || (a && snr_min_db > snr_max_db)) {
    throw InvalidArgument("schedule: snr range must be finite with min <= max, or both +inf");
  }
  if (val_frames < -1) throw InvalidArgument("schedule: val_frames must be >= -1");
}

double TrainSchedule::lr_at(std::uint64_t step) const {
  double lr = lr0;
  for (auto s : decay_steps) {
    if (step >= s) lr *= gamma;
  }
  return lr;
}

FrameSet::FrameSet(const sim::DatasetManifest& manifest, sim::Split split, const RadarParams& params)
    : root_(manifest.root), params_(params) {
  for (const auto* e : manifest.of_split(split)) owned_.push_back(*e);
  count_ = owned_.size();
}

FrameSet::FrameSet(std::vector<augment::Sample> samples)
    : preloaded_(std::move(samples)), count_(preloaded_.size()) {}

augment::Sample FrameSet::load(std::size_t i) const {
  if (i >= count_) throw InvalidArgument("frame index out of range");
  if (!preloaded_.empty()) return preloaded_[i];
  const auto& e = owned_[i];
  return {io::read_frame(root_ / e.frame_path, params_), io::read_labels(root_ / e.label_path)};
}

std::uint32_t FrameSet::radar_id(std::size_t i) const {
  if (i >= count_) throw InvalidArgument("frame index out of range");
  if (!preloaded_.empty()) return preloaded_[i].labels.empty() ? 0 : preloaded_[i].labels.front().radar_id;
  return owned_[i].radar_id;
}

std::string format_log_row(const LogRow& r) {
  return std::to_string(r.epoch) + "," + std::to_string(r.step) + "," + io::format_double(r.lr) + "," +
         io::format_metric(r.l_rd) + "," + io::format_metric(r.l_azi) + "," + io::format_metric(r.l_ele) + "," +
         io::format_metric(r.val_rd_acc) + "," + io::format_metric(r.val_az_acc) + "," +
         io::format_metric(r.val_el_acc);
}

TrainState initial_state(const model::RDNetConfig& rd, const model::AngNetConfig& ang, const TrainSchedule& schedule,
                         std::uint64_t seed) {
  TrainState s{model::DrdModel<float>::create(rd, ang, sim::derive_seed(seed, 0x1417)), {}, {}, 0, 0};
  s.rd_adam.config = schedule.adam;
  s.ang_adam.config = schedule.adam;
  return s;
}

std::vector<LogRow> train_drd(TrainState& state, const FrameSet& train, const FrameSet* val,
                              const TrainSchedule& schedule, std::uint64_t seed, const EpochCallback& on_epoch) {
  schedule.validate();
  RunSpec spec{state.epoch + 1, schedule.total_epochs, schedule.rd_only_epochs, 0};
  return run_epochs(state, train, val, schedule, spec, seed, on_epoch);
}

std::vector<LogRow> finetune_noise(TrainState& state, const FrameSet& train, const FrameSet* val,
                                   const TrainSchedule& schedule, int extra_epochs, std::uint64_t seed,
                                   const EpochCallback& on_epoch) {
  schedule.validate();
  if (extra_epochs < 0) throw InvalidArgument("finetune: extra epochs must be >= 0");
  RunSpec spec{state.epoch + 1, state.epoch + extra_epochs, 0, state.step};
  return run_epochs(state, train, val, schedule, spec, sim::derive_seed(seed, 0xF1E), on_epoch);
}

io::CheckpointFile to_checkpoint(const TrainState& state, const std::string& config_echo) {
  io::CheckpointFile ckpt;
  ckpt.config_echo = config_echo;
  auto add_net = [&](const std::string& prefix, const nn::NetGraph<float>& net, const nn::AdamState& adam) {
    for (const auto& p : net.params()) ckpt.tensors.push_back({prefix + "/" + p.name, p.value});
    ckpt.optimizer.push_back({prefix + "/step", scalar(static_cast<double>(adam.step))});
    for (const auto& [name, m] : adam.m) ckpt.optimizer.push_back({prefix + "/m/" + name, m});
    for (const auto& [name, v] : adam.v) ckpt.optimizer.push_back({prefix + "/v/" + name, v});
  };
  add_net("rdnet", state.model.rdnet, state.rd_adam);
  add_net("angnet", state.model.angnet, state.ang_adam);
  ckpt.tensors.push_back({"state/epoch", scalar(state.epoch)});
  ckpt.tensors.push_back({"state/step", scalar(static_cast<double>(state.step))});
  return ckpt;
}

TrainState from_checkpoint(const io::CheckpointFile& ckpt, const model::RDNetConfig& rd,
                           const model::AngNetConfig& ang, const TrainSchedule& schedule) {
  TrainState s = initial_state(rd, ang, schedule, 0);
  std::map<std::string, const nn::TensorF*> tensors, opt;
  for (const auto& t : ckpt.tensors) {
    if (!tensors.emplace(t.name, &t.value).second) throw IoError("checkpoint: duplicate tensor '" + t.name + "'");
  }
  for (const auto& t : ckpt.optimizer) {
    if (!opt.emplace(t.name, &t.value).second) throw IoError("checkpoint: duplicate optimizer record '" + t.name + "'");
  }
  std::size_t used = 0, used_opt = 0;
  auto load_net = [&](const std::string& prefix, nn::NetGraph<float>& net, nn::AdamState& adam) {
    for (auto& p : net.params()) {
      const auto& t = require(tensors, prefix + "/" + p.name);
      if (t.shape() != p.value.shape()) {
        throw IoError("checkpoint: shape of '" + prefix + "/" + p.name + "' is " + nn::shape_string(t.shape()) +
                      ", model expects " + nn::shape_string(p.value.shape()));
      }
      p.value = t;
      ++used;
    }
    adam.step = static_cast<std::uint64_t>(require(opt, prefix + "/step")[0]);
    ++used_opt;
    for (const auto& [name, t] : opt) {
      for (const char* kind : {"/m/", "/v/"}) {
        const std::string head = prefix + kind;
        if (name.rfind(head, 0) != 0) continue;
        const std::string pname = name.substr(head.size());
        const auto& p = net.param(pname);
        if (t->shape() != p.value.shape()) throw IoError("checkpoint: moment shape mismatch for '" + name + "'");
        (kind[1] == 'm' ? adam.m : adam.v)[pname] = *t;
        ++used_opt;
      }
    }
  };
  try {
    load_net("rdnet", s.model.rdnet, s.rd_adam);
    load_net("angnet", s.model.angnet, s.ang_adam);
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
  s.epoch = static_cast<int>(require(tensors, "state/epoch")[0]);
  s.step = static_cast<std::uint64_t>(require(tensors, "state/step")[0]);
  used += 2;
  if (used != tensors.size() || used_opt != opt.size()) {
    throw IoError("checkpoint: contains tensors the configured architecture does not have");
  }
  return s;
}

CropSet gather_gt_crops(const FrameSet& frames) {
  std::vector<float> values;
  CropSet out;
  int channels = 0, k = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto sample = frames.load(i);
    const auto input = model::network_input(classic::rd_transform(sample.frame, classic::WindowKind::kHamming));
    channels = input.dim(1);
    for (const auto& l : sample.labels) {
      const auto crop = model::crop3x3(input, 0, static_cast<int>(l.r_bin), static_cast<int>(l.d_bin));
      values.insert(values.end(), crop.values().begin(), crop.values().end());
      out.az.push_back(static_cast<int>(l.az_bin));
      out.el.push_back(static_cast<int>(l.el_bin));
      ++k;
    }
  }
  out.crops = nn::TensorF({k, channels, 3, 3}, std::move(values));
  return out;
}

nn::NetGraph<float> train_separate_angnet(const CropSet& crops, const model::AngNetConfig& ang,
                                          const model::RDNetConfig& rd, const AblationSchedule& schedule,
                                          std::uint64_t seed) {
  const nn::DenormalsAreZero daz;
  if (schedule.batch < 1 || schedule.epochs < 0 || !(schedule.lr > 0)) {
    throw InvalidArgument("ablation: invalid schedule");
  }
  auto cfg = ang;
  cfg.use_context = false;
  auto net = model::build_angnet<float>(cfg, rd);
  net.init_weights(sim::derive_seed(seed, 0xAB1));
  nn::AdamState adam;
  adam.config = schedule.adam;
  const int k = crops.crops.dim(0);
  if (k == 0) return net;
  const std::size_t per = crops.crops.size() / static_cast<std::size_t>(k);
  const int channels = crops.crops.dim(1);
  std::uint64_t step = 0;
  for (int epoch = 1; epoch <= schedule.epochs; ++epoch) {
    const auto order = shuffled(static_cast<std::size_t>(k), sim::derive_seed(seed, static_cast<std::uint64_t>(epoch), 0xAB2));
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(schedule.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(schedule.batch));
      const int b = static_cast<int>(end - start);
      nn::TensorF x({b, channels, 3, 3});
      std::vector<int> az, el;
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t src = order[j];
        std::copy_n(crops.crops.data() + src * per, per, x.data() + (j - start) * per);
        az.push_back(crops.az[src]);
        el.push_back(crops.el[src]);
      }
      const auto loss = model::angnet_only_loss(net, x, az, el, true, nn::Mode::kTrain, sim::derive_seed(seed, step, 0xAB3));
      if (!std::isfinite(loss.total)) throw NumericalError("ablation: non-finite loss at step " + std::to_string(step));
      nn::adam_step(net.params(), adam, schedule.lr);
      ++step;
    }
  }
  return net;
}

}  // namespace drd::train
