#include "drd/signal_sim.hpp"

#include <algorithm>
#include <boost/math/distributions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "drd/classic.hpp"
#include "drd/io.hpp"

namespace drd::sim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(master) ^ a) ^ (b * 0xD1B54A32D192ED03ULL));
}

std::complex<double> ChannelPerturbation::gain(std::size_t antenna) const {
  return std::polar(std::pow(10.0, gain_db.at(antenna) / 20.0), deg2rad(phase_deg.at(antenna)));
}

void ChannelPerturbation::validate(std::size_t n_antennas) const {
  if (gain_db.size() != n_antennas || phase_deg.size() != n_antennas) {
    throw InvalidArgument("channel perturbation: length must equal n_antennas");
  }
  for (std::size_t a = 0; a < n_antennas; ++a) {
    if (!std::isfinite(gain_db[a]) || !std::isfinite(phase_deg[a])) {
      throw InvalidArgument("channel perturbation: non-finite gain");
    }
  }
}

ChannelPerturbation ChannelPerturbation::identity(std::uint32_t radar_id, std::size_t n_antennas) {
  return {radar_id, std::vector<double>(n_antennas, 0.0), std::vector<double>(n_antennas, 0.0)};
}

ChannelPerturbation ChannelPerturbation::random(std::uint32_t radar_id, std::size_t n_antennas, std::uint64_t seed,
                                                double gain_sigma_db, double phase_sigma_deg) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ChannelPerturbation p{radar_id, {}, {}};
  for (std::size_t a = 0; a < n_antennas; ++a) {
    p.gain_db.push_back(gain_sigma_db * normal(rng));
    p.phase_deg.push_back(phase_sigma_deg * normal(rng));
  }
  return p;
}

std::vector<std::complex<double>> steering_vector(double az_deg, double el_deg,
                                                  const std::vector<AntennaPosition>& geometry,
                                                  const ChannelPerturbation* perturbation) {
  if (perturbation != nullptr) perturbation->validate(geometry.size());
  const double az = deg2rad(az_deg), el = deg2rad(el_deg);
  const double u = std::sin(az) * std::cos(el), v = std::sin(el);
  std::vector<std::complex<double>> out(geometry.size());
  for (std::size_t a = 0; a < geometry.size(); ++a) {
    const double phase = kTwoPi * (geometry[a].x * u + geometry[a].y * v);
    out[a] = std::polar(1.0, phase);
    if (perturbation != nullptr) out[a] *= perturbation->gain(a);
  }
  return out;
}

SynthResult synthesize_frame(const std::vector<TargetSpec>& targets, const RadarParams& params,
                             const AngleGrid& grid, const ChannelPerturbation* perturbation,
                             double noise_snr_db, std::uint64_t seed) {
  params.validate();
  grid.validate();
  if (targets.empty()) throw InvalidArgument("synthesize_frame: at least one target required");
  const std::size_t ns = params.n_samples, nc = params.n_chirps, na = params.n_antennas;
  const std::uint32_t radar_id = perturbation != nullptr ? perturbation->radar_id : 0;

  std::vector<std::complex<double>> acc(ns * nc * na);
  std::vector<GroundTruthLabel> labels;
  for (const auto& t : targets) {
    GroundTruthLabel label;
    label.r_bin = bin_of_range(t.range_m, params);
    label.d_bin = bin_of_doppler(t.velocity_mps, params);
    label.az_bin = grid.az_bin_of(t.azimuth_deg);
    label.el_bin = grid.el_bin_of(t.elevation_deg);
    label.radar_id = radar_id;
    label.snr_db = noise_snr_db;
    labels.push_back(label);

    const double beat_hz = 2.0 * params.chirp_slope() * t.range_m / kSpeedOfLight;
    const double doppler_hz = 2.0 * t.velocity_mps * params.carrier_hz / kSpeedOfLight;
    const auto steer = steering_vector(t.azimuth_deg, t.elevation_deg, params.geometry, perturbation);
    for (std::size_t n = 0; n < ns; ++n) {
      for (std::size_t c = 0; c < nc; ++c) {
        const double phase = kTwoPi * (beat_hz * n / params.sample_rate_hz + doppler_hz * c * params.chirp_duration_s);
        const std::complex<double> tone = t.amplitude * std::polar(1.0, phase);
        for (std::size_t a = 0; a < na; ++a) acc[(n * nc + c) * na + a] += tone * steer[a];
      }
    }
  }

  std::vector<cfloat> values(acc.size());
  std::transform(acc.begin(), acc.end(), values.begin(), [](const std::complex<double>& v) {
    return cfloat(static_cast<float>(v.real()), static_cast<float>(v.imag()));
  });
  RawFrame frame(params, ComplexCube(ns, nc, na, std::move(values)));
  if (std::isfinite(noise_snr_db)) frame = add_noise(frame, noise_snr_db, seed);
  return {std::move(frame), std::move(labels)};
}

RawFrame add_noise(const RawFrame& frame, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) return frame;
  if (!std::isfinite(snr_db)) throw InvalidArgument("add_noise: snr must be finite or +inf");

  const auto& params = frame.params();
  const std::size_t ns = params.n_samples, nc = params.n_chirps, na = params.n_antennas;
  const auto rd = classic::rd_transform(frame, classic::WindowKind::kHamming);
  const auto energy = rd.energy_map();
  const double peak = *std::max_element(energy.begin(), energy.end());
  if (!(peak > 0.0)) throw InvalidArgument("add_noise: frame has no reference target");

  // Per-cell noise energy summed over antennas is sigma^2 * Wr * Wd * Gamma(Nant, 1);
  // its median sets the floor.
  const auto wr = classic::make_window(classic::WindowKind::kHamming, ns);
  const auto wd = classic::make_window(classic::WindowKind::kHamming, nc);
  auto sum_sq = [](const std::vector<float>& w) {
    return std::accumulate(w.begin(), w.end(), 0.0, [](double s, float x) { return s + double(x) * x; });
  };
  const boost::math::gamma_distribution<double> chi(static_cast<double>(na), 1.0);
  const double median_gain = boost::math::median(chi);
  const double floor_per_sigma2 = sum_sq(wr) * sum_sq(wd) * median_gain;
  const double sigma2 = peak / (std::pow(10.0, snr_db / 10.0) * floor_per_sigma2);
  const double component_sigma = std::sqrt(sigma2 / 2.0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, component_sigma);
  std::vector<cfloat> values(frame.data().values().begin(), frame.data().values().end());
  for (auto& v : values) {
    const double re = normal(rng);
    const double im = normal(rng);
    v += cfloat(static_cast<float>(re), static_cast<float>(im));
  }
  return RawFrame(params, ComplexCube(ns, nc, na, std::move(values)));
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw InvalidArgument("unknown split tag: " + s);
}

std::vector<const ManifestEntry*> DatasetManifest::of_split(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

std::vector<std::uint32_t> DatasetManifest::radars_of_split(Split s) const {
  std::vector<std::uint32_t> ids;
  for (const auto& e : entries) {
    if (e.split == s) ids.push_back(e.radar_id);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::vector<Split> assign_splits(std::uint32_t n_radars, double train_ratio, double val_ratio, double test_ratio,
                                 std::uint64_t seed) {
  if (n_radars < 1) throw InvalidArgument("assign_splits: need at least one radar");
  if (train_ratio < 0 || val_ratio < 0 || test_ratio < 0 ||
      std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) {
    throw InvalidArgument("assign_splits: ratios must be non-negative and sum to 1");
  }
  // Small epsilon so 0.1 * 10 lands on 1 despite binary rounding.
  const auto n_val = static_cast<std::uint32_t>(std::floor(val_ratio * n_radars + 1e-9));
  const auto n_test = static_cast<std::uint32_t>(std::floor(test_ratio * n_radars + 1e-9));
  const std::uint32_t n_train = n_radars - n_val - n_test;

  std::vector<std::uint32_t> order(n_radars);
  std::iota(order.begin(), order.end(), 0u);
  std::mt19937_64 rng(derive_seed(seed, 0x5EED5));
  // Fisher-Yates with an explicit draw so the permutation does not depend
  // on the standard library's shuffle implementation.
  for (std::uint32_t i = n_radars; i > 1; --i) {
    const auto j = static_cast<std::uint32_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<Split> out(n_radars, Split::kTest);
  for (std::uint32_t k = 0; k < n_radars; ++k) {
    const Split s = k < n_train ? Split::kTrain : (k < n_train + n_val ? Split::kVal : Split::kTest);
    out[order[k]] = s;
  }
  return out;
}

GeneratedDataset generate_calibration_dataset(const CalibrationDatasetConfig& config, const RadarParams& params,
                                              const AngleGrid& grid, const std::filesystem::path& out_dir,
                                              const std::string& config_echo) {
  params.validate();
  grid.validate();
  if (config.n_radars < 1 || config.frames_per_radar < 1) {
    throw InvalidArgument("dataset: radar and frame counts must be >= 1");
  }
  if (config.range_bin >= params.n_samples) throw InvalidArgument("dataset: range bin outside map");
  const bool noisy = std::isfinite(config.snr_min_db) || std::isfinite(config.snr_max_db);
  if (noisy && !(std::isfinite(config.snr_min_db) && std::isfinite(config.snr_max_db) &&
                 config.snr_min_db <= config.snr_max_db)) {
    throw InvalidArgument("dataset: snr range must be finite with min <= max, or both +inf");
  }

  const auto splits =
      assign_splits(config.n_radars, config.train_ratio, config.val_ratio, config.test_ratio, config.seed);

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "frames", ec);
  std::filesystem::create_directories(out_dir / "labels", ec);
  if (ec) throw IoError("dataset: cannot create output directories under " + out_dir.string());

  GeneratedDataset out;
  out.manifest.root = out_dir;
  for (std::uint32_t radar = 0; radar < config.n_radars; ++radar) {
    out.perturbations.push_back(ChannelPerturbation::random(radar, params.n_antennas,
                                                            derive_seed(config.seed, 0xCA1, radar),
                                                            config.gain_sigma_db, config.phase_sigma_deg));
  }

  for (std::uint32_t radar = 0; radar < config.n_radars; ++radar) {
    for (std::uint32_t f = 0; f < config.frames_per_radar; ++f) {
      std::mt19937_64 rng(derive_seed(config.seed, radar, f));
      std::uniform_int_distribution<std::uint32_t> az_dist(0, grid.n_az - 1), el_dist(0, grid.n_el - 1);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      TargetSpec target;
      target.azimuth_deg = grid.az_of_bin(az_dist(rng));
      target.elevation_deg = grid.el_of_bin(el_dist(rng));
      const double offset = config.fractional_offsets ? unit(rng) - 0.5 : 0.0;
      target.range_m = (config.range_bin + offset * 0.999) * range_resolution(params);
      target.velocity_mps = 0.0;
      target.amplitude = 1.0;
      const double snr = noisy ? config.snr_min_db + (config.snr_max_db - config.snr_min_db) * unit(rng) : kNoNoise;

      auto synth = synthesize_frame({target}, params, grid, &out.perturbations[radar], snr, rng());

      char stem[64];
      std::snprintf(stem, sizeof(stem), "r%04u_f%05u", radar, f);
      ManifestEntry entry;
      entry.frame_path = (std::filesystem::path("frames") / (std::string(stem) + ".drdf")).generic_string();
      entry.label_path = (std::filesystem::path("labels") / (std::string(stem) + ".txt")).generic_string();
      entry.split = splits[radar];
      entry.radar_id = radar;
      io::write_frame(out_dir / entry.frame_path, synth.frame);
      io::write_labels(out_dir / entry.label_path, synth.labels);
      out.manifest.entries.push_back(std::move(entry));
    }
  }
  io::write_perturbations(out_dir / "perturbations.csv", out.perturbations, config_echo);
  io::write_manifest(out_dir / "manifest.csv", out.manifest, config_echo);
  return out;
}

}  // namespace drd::sim
