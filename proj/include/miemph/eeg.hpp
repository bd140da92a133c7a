#pragma once

// Trial-level EEG data model and file IO. Values live as 32-bit floats on
// disk and 64-bit in memory; the binary format round-trips byte-exactly.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace miemph {

// Row-major [rows x cols]; rows are channels, cols are samples.
struct Matrix {
  std::size_t rows{0};
  std::size_t cols{0};
  std::vector<double> v;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

  double* row(std::size_t r) { return v.data() + r * cols; }
  const double* row(std::size_t r) const { return v.data() + r * cols; }
  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

}  // namespace miemph

namespace miemph::eeg {

inline constexpr int kNumClasses = 3;
inline constexpr const char* kClassNames[kNumClasses] = {"Cylindrical",
                                                         "Spherical",
                                                         "Lumbrical"};

struct ChannelSet {
  std::size_t count{0};
  std::vector<std::string> labels;  // unique, length == count

  static ChannelSet make_default(std::size_t count);
  void validate() const;
};

struct Trial {
  Matrix data;  // [channels x samples]
  double fs_hz{0.0};
  std::uint8_t label{0};  // 0=Cylindrical 1=Spherical 2=Lumbrical
  std::string subject_id;
  int session_id{1};

  std::size_t n_channels() const { return data.rows; }
  std::size_t n_samples() const { return data.cols; }
  double duration_s() const { return fs_hz > 0 ? data.cols / fs_hz : 0.0; }
};

struct TrialSet {
  ChannelSet channels;
  std::vector<Trial> trials;
  double fs_hz{0.0};

  std::size_t size() const { return trials.size(); }
  // Full consistency check; error messages name the offending trial index.
  void validate() const;
};

struct Epoch {
  Matrix data;
  double t0_s{0.0};
  double t1_s{0.0};
  double fs_hz{0.0};
  std::uint8_t label{0};
  std::string subject_id;
  int session_id{1};
};

// Slice [lround(t0*fs), lround(t0*fs) + lround((t1-t0)*fs)) of every channel.
Epoch extract_epoch(const Trial& trial, double t0_s, double t1_s);

enum class Format { binary, csv };

// Binary format "MIEEG1" (little-endian) and the CSV layout
// `subject,session,label,channel,s0,s1,...` (optionally preceded by a
// `# fs_hz=<value>` comment; otherwise pass fs_hz_hint).
TrialSet load_trialset(const std::filesystem::path& path, Format format,
                       double fs_hz_hint = 0.0);
void save_trialset(const TrialSet& set, const std::filesystem::path& path,
                   Format format);

}  // namespace miemph::eeg
