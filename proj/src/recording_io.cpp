#include "effort/recording_io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <algorithm>
#include <iterator>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace effort {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'G', '0'};

void put_u32(std::vector<char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_num(const std::string& s, std::size_t row, std::size_t col) {
  const char* b = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(b, &end);
  if (s.empty() || end != b + s.size())
    throw RecordingFormatError(fmt::format("row {}, column {}: bad number '{}'", row, col, s));
  return v;
}

template <class T>
T parse_uint(const std::string& s, std::size_t row, std::size_t col) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw RecordingFormatError(fmt::format("row {}, column {}: bad integer '{}'", row, col, s));
  return v;
}

}  // namespace

std::vector<std::string> recording_columns() {
  std::vector<std::string> c = {"t_session",      "trial",          "neutral_x1",
                                "neutral_x2",     "target_x1",      "target_x2",
                                "actual_x1",      "actual_x2",      "deviation_x1",
                                "deviation_x2",   "subject_tau1",   "subject_tau2",
                                "impedance_tau1", "impedance_tau2", "raw_offset",
                                "raw_count"};
  for (const char* prefix : {"act_", "dist_"}) {
    for (auto m : kMuscleNames) c.push_back(std::string(prefix) + std::string(m));
  }
  c.push_back("degenerate");
  for (auto m : kMuscleNames) c.push_back("fatigue_" + std::string(m));
  c.push_back("label_K");
  c.push_back("label_theta");
  return c;
}

void write_recording_csv(std::ostream& os, std::span<const FrameRow> frames) {
  const auto cols = recording_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  std::string line;
  for (const FrameRow& r : frames) {
    line.clear();
    auto add = [&](const std::string& s) {
      if (!line.empty()) line += ',';
      line += s;
    };
    auto add2 = [&](const Vec2& v) {
      add(num(v(0)));
      add(num(v(1)));
    };
    auto add6 = [&](const Vec6& v) {
      for (int i = 0; i < kMuscles; ++i) add(num(v(i)));
    };
    add(num(r.t_session));
    add(std::to_string(r.trial));
    add2(r.neutral);
    add2(r.target);
    add2(r.actual);
    add2(r.deviation);
    add2(r.subject_torque);
    add2(r.impedance_torque);
    add(std::to_string(r.raw_offset));
    add(std::to_string(r.raw_count));
    add6(r.activation);
    add6(r.distribution);
    add(r.degenerate ? "1" : "0");
    add6(r.fatigue);
    add2(r.label);
    os << line << '\n';
  }
}

std::vector<FrameRow> read_recording_csv(std::istream& is) {
  const auto cols = recording_columns();
  std::string line;
  if (!std::getline(is, line)) throw RecordingFormatError("empty recording");
  if (split_csv(line) != cols) throw RecordingFormatError("unexpected recording header");
  std::vector<FrameRow> frames;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != cols.size())
      throw RecordingFormatError(
          fmt::format("row {}: expected {} columns, got {}", row, cols.size(), cells.size()));
    std::size_t c = 0;
    auto d = [&] {
      const double v = parse_num(cells[c], row, c);
      ++c;
      return v;
    };
    auto v2 = [&] {
      Vec2 v;
      v(0) = d();
      v(1) = d();
      return v;
    };
    auto v6 = [&] {
      Vec6 v;
      for (int i = 0; i < kMuscles; ++i) v(i) = d();
      return v;
    };
    FrameRow r;
    r.t_session = d();
    r.trial = static_cast<int>(parse_uint<unsigned>(cells[c], row, c));
    ++c;
    r.neutral = v2();
    r.target = v2();
    r.actual = v2();
    r.deviation = v2();
    r.subject_torque = v2();
    r.impedance_torque = v2();
    r.raw_offset = parse_uint<std::uint64_t>(cells[c], row, c);
    ++c;
    r.raw_count = parse_uint<std::uint32_t>(cells[c], row, c);
    ++c;
    r.activation = v6();
    r.distribution = v6();
    r.degenerate = parse_uint<unsigned>(cells[c], row, c) != 0;
    ++c;
    r.fatigue = v6();
    r.label = v2();
    frames.push_back(r);
  }
  return frames;
}

void write_calibration_csv(std::ostream& os, const MaxActivations& calib) {
  os << "muscle,max_activation\n";
  for (int m = 0; m < kMuscles; ++m)
    os << kMuscleNames[static_cast<std::size_t>(m)] << ',' << num(calib.value(m)) << '\n';
}

MaxActivations read_calibration_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "muscle,max_activation")
    throw RecordingFormatError("unexpected calibration header");
  MaxActivations calib;
  for (int m = 0; m < kMuscles; ++m) {
    if (!std::getline(is, line)) throw RecordingFormatError("calibration truncated");
    const auto cells = split_csv(line);
    if (cells.size() != 2 || cells[0] != kMuscleNames[static_cast<std::size_t>(m)])
      throw RecordingFormatError(fmt::format("calibration row {} malformed", m + 2));
    calib.value(m) = parse_num(cells[1], static_cast<std::size_t>(m + 2), 1);
  }
  return calib;
}

EmgSidecarWriter::EmgSidecarWriter(const std::filesystem::path& path,
                                   std::uint32_t sample_rate_hz)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  std::vector<char> header(kMagic, kMagic + 4);
  put_u32(header, kMuscles);
  put_u32(header, sample_rate_hz);
  out_.write(header.data(), static_cast<std::streamsize>(header.size()));
}

void EmgSidecarWriter::append(std::span<const Vec6> samples) {
  buf_.clear();
  buf_.reserve(samples.size() * kMuscles * 4);
  for (const Vec6& s : samples) {
    for (int ch = 0; ch < kMuscles; ++ch)
      put_u32(buf_, std::bit_cast<std::uint32_t>(static_cast<float>(s(ch))));
  }
  out_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
  if (!out_) throw std::runtime_error("write failed: " + path_.string());
  count_ += samples.size();
}

void EmgSidecarWriter::close() {
  out_.close();
  if (out_.fail()) throw std::runtime_error("close failed: " + path_.string());
}

EmgSidecar read_emg_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || !std::equal(kMagic, kMagic + 4, bytes.begin()))
    throw RecordingFormatError(path.string() + ": missing EMG0 header");
  EmgSidecar s;
  s.channels = get_u32(bytes.data() + 4);
  s.sample_rate_hz = get_u32(bytes.data() + 8);
  if (s.channels != kMuscles)
    throw RecordingFormatError(fmt::format("{}: expected {} channels, header says {}",
                                           path.string(), kMuscles, s.channels));
  const std::size_t payload = bytes.size() - 12;
  const std::size_t frame_bytes = 4u * s.channels;
  if (payload % frame_bytes != 0)
    throw RecordingFormatError(path.string() + ": truncated sample block");
  s.samples.resize(payload / frame_bytes);
  const unsigned char* p = bytes.data() + 12;
  for (Vec6& v : s.samples) {
    for (int ch = 0; ch < kMuscles; ++ch, p += 4) v(ch) = std::bit_cast<float>(get_u32(p));
  }
  return s;
}

}  // namespace effort
