#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "effort/protocol.hpp"

namespace effort {

class RecordingFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Column names of the per-frame recording CSV, in order.
std::vector<std::string> recording_columns();

/// Doubles are printed with 17 significant digits so a read-back is exact.
void write_recording_csv(std::ostream& os, std::span<const FrameRow> frames);
std::vector<FrameRow> read_recording_csv(std::istream& is);

void write_calibration_csv(std::ostream& os, const MaxActivations& calib);
MaxActivations read_calibration_csv(std::istream& is);

/// Raw EMG sidecar: "EMG0", uint32 channel count, uint32 sample rate (Hz),
/// then float32 samples interleaved by channel. All little-endian.
class EmgSidecarWriter {
 public:
  EmgSidecarWriter(const std::filesystem::path& path, std::uint32_t sample_rate_hz);
  void append(std::span<const Vec6> samples);
  std::uint64_t samples_written() const { return count_; }
  void close();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::uint64_t count_ = 0;
  std::vector<char> buf_;
};

struct EmgSidecar {
  std::uint32_t channels = 0;
  std::uint32_t sample_rate_hz = 0;
  std::vector<Vec6> samples;  // float32 widened to double
};

EmgSidecar read_emg_sidecar(const std::filesystem::path& path);

}  // namespace effort
