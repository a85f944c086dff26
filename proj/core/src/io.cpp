#include "drd/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace drd::io {

namespace {

namespace fs = std::filesystem;

// Byte-level little-endian writer/reader; the host order never leaks into
// the files.
class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const std::string& s) { buf_.append(s); }
  [[nodiscard]] const std::string& data() const { return buf_; }
  void reserve(std::size_t n) { buf_.reserve(n); }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string data, std::string what) : data_(std::move(data)), what_(std::move(what)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  [[nodiscard]] bool at_end() const { return pos_ == data_.size(); }
  [[nodiscard]] std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw IoError(what_ + ": truncated file");
  }
  std::string data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string read_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Data lines of a text artifact: comments, blank lines and an optional
// header line (detected by its first field) are dropped.
std::vector<std::string> data_lines(const std::string& text, const std::string& header_first_field) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_first_field.empty() && line.rfind(header_first_field + ",", 0) == 0) continue;
    out.push_back(line);
  }
  return out;
}

std::uint32_t parse_u32(const std::string& s, const std::string& what) {
  std::uint32_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError(what + ": bad integer '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const std::string& what) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError(what + ": bad number '" + s + "'");
  return v;
}

void write_record(ByteWriter& w, const NamedTensor& t) {
  w.u32(static_cast<std::uint32_t>(t.name.size()));
  w.bytes(t.name);
  w.u32(static_cast<std::uint32_t>(t.value.rank()));
  for (int d : t.value.shape()) w.u32(static_cast<std::uint32_t>(d));
  for (float v : t.value.values()) w.f32(v);
}

NamedTensor read_record(ByteReader& r) {
  NamedTensor t;
  t.name = r.bytes(r.u32());
  const std::uint32_t rank = r.u32();
  if (rank < 1 || rank > 4) throw IoError("checkpoint: tensor '" + t.name + "' has invalid rank");
  std::vector<int> shape;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint32_t d = r.u32();
    if (d > (1u << 30)) throw IoError("checkpoint: tensor '" + t.name + "' dimension too large");
    shape.push_back(static_cast<int>(d));
    count *= d;
  }
  if (count * 4 > r.remaining()) throw IoError("checkpoint: truncated payload for '" + t.name + "'");
  std::vector<float> values(count);
  for (auto& v : values) v = r.f32();
  t.value = nn::TensorF(std::move(shape), std::move(values));
  return t;
}

}  // namespace

std::string comment_block(const std::string& text) {
  std::string out;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out += "# " + line + "\n";
  return out;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_metric(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed: " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename into " + path.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) { return read_binary(path); }

void write_frame(const fs::path& path, const RawFrame& frame) {
  const auto& p = frame.params();
  ByteWriter w;
  w.reserve(20 + frame.data().size() * 8);
  w.bytes("DRDF");
  w.u32(kFrameVersion);
  w.u32(p.n_samples);
  w.u32(p.n_chirps);
  w.u32(p.n_antennas);
  for (const auto& v : frame.data().values()) {
    w.f32(v.real());
    w.f32(v.imag());
  }
  write_text(path, w.data());
}

RawFrame read_frame(const fs::path& path, const RadarParams& base) {
  ByteReader r(read_binary(path), "frame " + path.string());
  if (r.bytes(4) != "DRDF") throw IoError("frame " + path.string() + ": bad magic");
  const std::uint32_t version = r.u32();
  if (version != kFrameVersion) throw IoError("frame " + path.string() + ": unsupported version " + std::to_string(version));
  RadarParams params = base;
  params.n_samples = r.u32();
  params.n_chirps = r.u32();
  params.n_antennas = r.u32();
  if (params.n_samples == 0 || params.n_chirps == 0 || params.n_antennas == 0) {
    throw IoError("frame " + path.string() + ": zero dimension");
  }
  if (params.n_antennas != base.n_antennas) {
    throw IoError("frame " + path.string() + ": antenna count " + std::to_string(params.n_antennas) +
                  " does not match the configured array (" + std::to_string(base.n_antennas) + ")");
  }
  const std::size_t n = static_cast<std::size_t>(params.n_samples) * params.n_chirps * params.n_antennas;
  if (r.remaining() != n * 8) throw IoError("frame " + path.string() + ": payload size mismatch");
  std::vector<cfloat> values(n);
  for (auto& v : values) {
    const float re = r.f32();
    const float im = r.f32();
    v = cfloat(re, im);
  }
  try {
    return RawFrame(params, ComplexCube(params.n_samples, params.n_chirps, params.n_antennas, std::move(values)));
  } catch (const InvalidArgument& e) {
    throw IoError("frame " + path.string() + ": " + e.what());
  }
}

void write_labels(const fs::path& path, const std::vector<GroundTruthLabel>& labels) {
  std::string text;
  for (const auto& l : labels) {
    text += std::to_string(l.r_bin) + "," + std::to_string(l.d_bin) + "," + std::to_string(l.az_bin) + "," +
            std::to_string(l.el_bin) + "," + std::to_string(l.radar_id) + "," + format_double(l.snr_db) + "\n";
  }
  write_text(path, text);
}

std::vector<GroundTruthLabel> read_labels(const fs::path& path) {
  const std::string what = "labels " + path.string();
  std::vector<GroundTruthLabel> out;
  for (const auto& line : data_lines(read_binary(path), "r_bin")) {
    const auto f = split_csv(line);
    if (f.size() != 6) throw IoError(what + ": expected 6 fields, got '" + line + "'");
    out.push_back({parse_u32(f[0], what), parse_u32(f[1], what), parse_u32(f[2], what), parse_u32(f[3], what),
                   parse_u32(f[4], what), parse_double(f[5], what)});
  }
  return out;
}

void write_manifest(const fs::path& path, const sim::DatasetManifest& manifest, const std::string& config_echo) {
  std::string text = comment_block(config_echo);
  for (const auto& e : manifest.entries) {
    text += e.frame_path + "," + sim::to_string(e.split) + "," + std::to_string(e.radar_id) + "," + e.label_path + "\n";
  }
  write_text(path, text);
}

sim::DatasetManifest read_manifest(const fs::path& path) {
  const std::string what = "manifest " + path.string();
  sim::DatasetManifest m;
  m.root = path.has_parent_path() ? path.parent_path() : fs::path(".");
  for (const auto& line : data_lines(read_binary(path), "path")) {
    const auto f = split_csv(line);
    if (f.size() != 4) throw IoError(what + ": expected 4 fields, got '" + line + "'");
    sim::ManifestEntry e;
    e.frame_path = f[0];
    try {
      e.split = sim::split_from_string(f[1]);
    } catch (const InvalidArgument& ex) {
      throw IoError(what + ": " + ex.what());
    }
    e.radar_id = parse_u32(f[2], what);
    e.label_path = f[3];
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_perturbations(const fs::path& path, const std::vector<sim::ChannelPerturbation>& perts,
                         const std::string& config_echo) {
  std::string text = comment_block(config_echo) + "radar_id,antenna,gain_db,phase_deg\n";
  for (const auto& p : perts) {
    for (std::size_t a = 0; a < p.size(); ++a) {
      text += std::to_string(p.radar_id) + "," + std::to_string(a) + "," + format_double(p.gain_db[a]) + "," +
              format_double(p.phase_deg[a]) + "\n";
    }
  }
  write_text(path, text);
}

std::vector<sim::ChannelPerturbation> read_perturbations(const fs::path& path) {
  const std::string what = "perturbations " + path.string();
  std::vector<sim::ChannelPerturbation> out;
  for (const auto& line : data_lines(read_binary(path), "radar_id")) {
    const auto f = split_csv(line);
    if (f.size() != 4) throw IoError(what + ": expected 4 fields, got '" + line + "'");
    const std::uint32_t id = parse_u32(f[0], what);
    const std::uint32_t antenna = parse_u32(f[1], what);
    if (out.empty() || out.back().radar_id != id) out.push_back({id, {}, {}});
    auto& p = out.back();
    if (antenna != p.size()) throw IoError(what + ": antennas must be listed in order");
    p.gain_db.push_back(parse_double(f[2], what));
    p.phase_deg.push_back(parse_double(f[3], what));
  }
  return out;
}

void write_checkpoint(const fs::path& path, const CheckpointFile& ckpt) {
  ByteWriter w;
  w.bytes("DRDC");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) write_record(w, t);
  w.u32(static_cast<std::uint32_t>(ckpt.optimizer.size()));
  for (const auto& t : ckpt.optimizer) write_record(w, t);
  w.u32(static_cast<std::uint32_t>(ckpt.config_echo.size()));
  w.bytes(ckpt.config_echo);
  write_text(path, w.data());
}

CheckpointFile read_checkpoint(const fs::path& path) {
  ByteReader r(read_binary(path), "checkpoint " + path.string());
  if (r.bytes(4) != "DRDC") throw IoError("checkpoint " + path.string() + ": bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint " + path.string() + ": unsupported version " + std::to_string(version));
  }
  CheckpointFile ckpt;
  for (std::uint32_t n = r.u32(), i = 0; i < n; ++i) ckpt.tensors.push_back(read_record(r));
  for (std::uint32_t n = r.u32(), i = 0; i < n; ++i) ckpt.optimizer.push_back(read_record(r));
  ckpt.config_echo = r.bytes(r.u32());
  if (!r.at_end()) throw IoError("checkpoint " + path.string() + ": trailing bytes");
  return ckpt;
}

}  // namespace drd::io
