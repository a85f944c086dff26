#include "drd/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "drd/io.hpp"

namespace drd::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& expected) {
  throw InvalidArgument("config: " + key + " = '" + value + "': expected " + expected);
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v, "an integer");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  if (v == "-inf") return -std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || std::isnan(out)) bad(key, v, "a number");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad(key, v, "true or false");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + fmt(xs[i]);
  return out;
}

struct Key {
  std::string name;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

template <typename Int>
Key int_key(const std::string& name, Int& ref) {
  return {name, [&ref] { return std::to_string(ref); }, [&ref, name](const std::string& v) { ref = to_int<Int>(name, v); }};
}

Key double_key(const std::string& name, double& ref) {
  return {name, [&ref] { return io::format_double(ref); }, [&ref, name](const std::string& v) { ref = to_double(name, v); }};
}

Key bool_key(const std::string& name, bool& ref) {
  return {name, [&ref] { return std::string(ref ? "true" : "false"); },
          [&ref, name](const std::string& v) { ref = to_bool(name, v); }};
}

Key string_key(const std::string& name, std::string& ref) {
  return {name, [&ref] { return ref; }, [&ref](const std::string& v) { ref = v; }};
}

template <typename Int>
Key int_list_key(const std::string& name, std::vector<Int>& ref) {
  return {name, [&ref] { return join(ref, [](Int x) { return std::to_string(x); }); },
          [&ref, name](const std::string& v) {
            ref.clear();
            for (const auto& item : split_list(v)) ref.push_back(to_int<Int>(name, item));
          }};
}

// "train" reuses train.decay_steps
Key optional_steps_key(const std::string& name, std::optional<std::vector<std::uint64_t>>& ref) {
  return {name, [&ref] { return ref ? join(*ref, [](std::uint64_t x) { return std::to_string(x); }) : "train"; },
          [&ref, name](const std::string& v) {
            if (trim(v) == "train") {
              ref.reset();
              return;
            }
            ref.emplace();
            for (const auto& item : split_list(v)) ref->push_back(to_int<std::uint64_t>(name, item));
          }};
}

Key double_list_key(const std::string& name, std::vector<double>& ref) {
  return {name, [&ref] { return join(ref, [](double x) { return io::format_double(x); }); },
          [&ref, name](const std::string& v) {
            ref.clear();
            for (const auto& item : split_list(v)) ref.push_back(to_double(name, item));
          }};
}

std::vector<Key> key_table(RunConfig& c) {
  return {
      int_key("seed", c.seed),

      int_key("radar.n_samples", c.radar.n_samples),
      int_key("radar.n_chirps", c.radar.n_chirps),
      int_key("radar.array_az", c.array_az),
      int_key("radar.array_el", c.array_el),
      double_key("radar.array_spacing", c.array_spacing),
      double_key("radar.bandwidth_hz", c.radar.bandwidth_hz),
      double_key("radar.chirp_duration_s", c.radar.chirp_duration_s),
      double_key("radar.carrier_hz", c.radar.carrier_hz),
      double_key("radar.sample_rate_hz", c.sample_rate_hz),

      int_key("grid.n_az", c.grid.n_az),
      int_key("grid.n_el", c.grid.n_el),
      double_key("grid.az_min_deg", c.grid.az_min_deg),
      double_key("grid.az_max_deg", c.grid.az_max_deg),
      double_key("grid.el_min_deg", c.grid.el_min_deg),
      double_key("grid.el_max_deg", c.grid.el_max_deg),

      int_key("dataset.n_radars", c.dataset.n_radars),
      int_key("dataset.frames_per_radar", c.dataset.frames_per_radar),
      int_key("dataset.range_bin", c.dataset.range_bin),
      double_key("dataset.snr_min_db", c.dataset.snr_min_db),
      double_key("dataset.snr_max_db", c.dataset.snr_max_db),
      double_key("dataset.gain_sigma_db", c.dataset.gain_sigma_db),
      double_key("dataset.phase_sigma_deg", c.dataset.phase_sigma_deg),
      double_key("dataset.train_ratio", c.dataset.train_ratio),
      double_key("dataset.val_ratio", c.dataset.val_ratio),
      double_key("dataset.test_ratio", c.dataset.test_ratio),
      bool_key("dataset.fractional_offsets", c.dataset.fractional_offsets),

      int_list_key("model.widths", c.rdnet.widths),
      int_key("model.bottleneck", c.rdnet.bottleneck),
      int_key("model.n_classes", c.rdnet.n_classes),
      int_key("model.crop_channels", c.angnet.crop_channels),
      int_list_key("model.fc", c.angnet.fc),
      double_key("model.dropout", c.angnet.dropout),

      double_key("infer.threshold", c.infer.threshold),
      int_key("infer.nms_radius", c.infer.nms_radius),

      double_key("train.lr", c.schedule.lr0),
      double_key("train.beta1", c.schedule.adam.beta1),
      double_key("train.beta2", c.schedule.adam.beta2),
      double_key("train.eps", c.schedule.adam.eps),
      double_key("train.weight_decay", c.schedule.adam.weight_decay),
      int_key("train.batch", c.schedule.batch),
      int_key("train.rd_only_epochs", c.schedule.rd_only_epochs),
      int_key("train.epochs", c.schedule.total_epochs),
      double_key("train.gamma", c.schedule.gamma),
      int_list_key("train.decay_steps", c.schedule.decay_steps),
      double_key("train.lambda1", c.schedule.lambda1),
      double_key("train.lambda2", c.schedule.lambda2),
      int_key("train.shift_dr_min", c.schedule.shifts.dr_min),
      int_key("train.shift_dr_max", c.schedule.shifts.dr_max),
      int_key("train.shift_dd_min", c.schedule.shifts.dd_min),
      int_key("train.shift_dd_max", c.schedule.shifts.dd_max),
      double_key("train.snr_min_db", c.schedule.snr_min_db),
      double_key("train.snr_max_db", c.schedule.snr_max_db),
      int_key("train.val_frames", c.schedule.val_frames),

      double_key("finetune.lr", c.finetune_lr),
      int_key("finetune.epochs", c.finetune_epochs),
      optional_steps_key("finetune.decay_steps", c.finetune_decay_steps),
      double_key("finetune.snr_min_db", c.finetune_snr_min_db),
      double_key("finetune.snr_max_db", c.finetune_snr_max_db),

      double_key("ablation.lr", c.ablation.lr),
      int_key("ablation.batch", c.ablation.batch),
      int_key("ablation.epochs", c.ablation.epochs),

      int_key("cfar1.window", c.cfar1.window_size),
      int_key("cfar1.guard", c.cfar1.guard_size),
      double_key("cfar1.alpha_db", c.cfar1.alpha_db),
      double_key("cfar1.pregate_db", c.cfar1.pregate_margin_db),
      int_key("cfar2.window", c.cfar2.window_size),
      int_key("cfar2.guard", c.cfar2.guard_size),
      double_key("cfar2.alpha_db", c.cfar2.alpha_db),
      double_key("cfar2.pregate_db", c.cfar2.pregate_margin_db),

      double_list_key("sweep.snrs", c.sweep_snrs),
      int_key("sweep.trials", c.sweep_trials),
      int_key("bench.frames", c.bench_frames),

      string_key("paths.dataset", c.dataset_dir),
      string_key("paths.checkpoint", c.checkpoint),
  };
}

const std::vector<std::string> kArchitectureKeys{
    "radar.n_samples", "radar.n_chirps", "radar.array_az", "radar.array_el", "grid.n_az",   "grid.n_el",
    "model.widths",    "model.bottleneck", "model.n_classes", "model.crop_channels", "model.fc",
};

}  // namespace

void RunConfig::finalize() {
  if (array_az < 1 || array_el < 1) throw InvalidArgument("config: array dimensions must be >= 1");
  radar.n_antennas = array_az * array_el;
  radar.geometry = uniform_rect_array(array_az, array_el, array_spacing);
  radar.sample_rate_hz = sample_rate_hz > 0.0 ? sample_rate_hz : radar.n_samples / radar.chirp_duration_s;
  radar.validate();
  grid.validate();

  dataset.seed = seed;
  rdnet.n_antennas = static_cast<int>(radar.n_antennas);
  rdnet.n_range = static_cast<int>(radar.n_samples);
  rdnet.n_doppler = static_cast<int>(radar.n_chirps);
  rdnet.validate();
  angnet.n_az = static_cast<int>(grid.n_az);
  angnet.n_el = static_cast<int>(grid.n_el);
  angnet.use_context = true;
  angnet.validate();
  if (!(infer.threshold >= 0.0 && infer.threshold < 1.0)) throw InvalidArgument("config: infer.threshold must be in [0, 1)");

  schedule.validate();
  finetune_schedule().validate();
  if (finetune_epochs < 0) throw InvalidArgument("config: finetune.epochs must be >= 0");
  if (!(ablation.lr > 0) || ablation.batch < 1 || ablation.epochs < 0) {
    throw InvalidArgument("config: invalid ablation schedule");
  }
  ablation.adam = schedule.adam;
  cfar1.validate();
  cfar2.validate();
  if (sweep_snrs.empty()) throw InvalidArgument("config: sweep.snrs must not be empty");
  if (sweep_trials < 1) throw InvalidArgument("config: sweep.trials must be >= 1");
  if (bench_frames < 1) throw InvalidArgument("config: bench.frames must be >= 1");
}

std::string RunConfig::echo() const {
  RunConfig copy = *this;
  std::string out;
  for (const auto& k : key_table(copy)) out += k.name + " = " + k.get() + "\n";
  return out;
}

train::TrainSchedule RunConfig::finetune_schedule() const {
  auto s = schedule;
  s.lr0 = finetune_lr;
  if (finetune_decay_steps) s.decay_steps = *finetune_decay_steps;
  s.snr_min_db = finetune_snr_min_db;
  s.snr_max_db = finetune_snr_max_db;
  return s;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (auto& k : key_table(*this)) {
    if (k.name == key) {
      k.set(value);
      return;
    }
  }
  throw InvalidArgument("config: unknown key '" + key + "'");
}

std::vector<std::string> RunConfig::keys() {
  RunConfig c;
  std::vector<std::string> out;
  for (const auto& k : key_table(c)) out.push_back(k.name);
  return out;
}

RunConfig parse(const std::string& text) {
  RunConfig c;
  std::istringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  c.finalize();
  return c;
}

RunConfig load(const std::filesystem::path& path) {
  try {
    return parse(io::read_text(path));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

std::vector<std::string> architecture_mismatches(const RunConfig& a, const RunConfig& b) {
  RunConfig ca = a, cb = b;
  const auto ta = key_table(ca), tb = key_table(cb);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (std::find(kArchitectureKeys.begin(), kArchitectureKeys.end(), ta[i].name) == kArchitectureKeys.end()) continue;
    if (ta[i].get() != tb[i].get()) out.push_back(ta[i].name + " (" + ta[i].get() + " vs " + tb[i].get() + ")");
  }
  return out;
}

}  // namespace drd::config
