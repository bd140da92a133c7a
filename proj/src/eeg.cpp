#include "miemph/eeg.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "miemph/errors.hpp"

namespace miemph::eeg {
namespace {

constexpr char kMagic[6] = {'M', 'I', 'E', 'E', 'G', '1'};
constexpr std::uint16_t kVersion = 1;

// --- little-endian primitives -------------------------------------------

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const unsigned char* p;
  std::size_t n;
  std::size_t pos{0};

  bool need(std::size_t k) const { return pos + k <= n; }
  std::uint8_t u8() { return p[pos++]; }
  std::uint16_t u16() {
    std::uint16_t v = static_cast<std::uint16_t>(p[pos]) |
                      static_cast<std::uint16_t>(p[pos + 1]) << 8;
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

int parse_label(const std::string& tok, std::size_t trial_idx) {
  for (int c = 0; c < kNumClasses; ++c)
    if (tok == kClassNames[c]) return c;
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used == tok.size() && v >= 0 && v < kNumClasses) return v;
  } catch (const std::exception&) {
  }
  throw DataError("trial " + std::to_string(trial_idx) + ": unknown label '" +
                  tok + "'");
}

TrialSet load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  Reader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};

  if (!r.need(6 + 2 + 4 + 4 + 4) ||
      std::memcmp(bytes.data(), kMagic, 6) != 0)
    throw DataError("malformed header in " + path.string());
  r.pos = 6;
  if (r.u16() != kVersion)
    throw DataError("unsupported version in " + path.string());
  const std::uint32_t n_channels = r.u32();
  const std::uint32_t fs_hz = r.u32();
  const std::uint32_t n_trials = r.u32();
  if (n_channels == 0 || fs_hz == 0)
    throw DataError("malformed header in " + path.string());
  if (n_trials == 0) throw DataError("no trials in " + path.string());

  TrialSet set;
  set.fs_hz = fs_hz;
  set.channels = ChannelSet::make_default(n_channels);
  set.trials.reserve(n_trials);
  for (std::uint32_t i = 0; i < n_trials; ++i) {
    const std::string at = "trial " + std::to_string(i);
    if (!r.need(1 + 1 + 2)) throw DataError(at + ": truncated record");
    Trial t;
    t.fs_hz = fs_hz;
    t.label = r.u8();
    if (t.label >= kNumClasses)
      throw DataError(at + ": unknown label " + std::to_string(t.label));
    t.session_id = r.u8();
    const std::uint16_t id_len = r.u16();
    if (!r.need(id_len + 4u)) throw DataError(at + ": truncated record");
    t.subject_id.assign(bytes.data() + r.pos, id_len);
    r.pos += id_len;
    const std::uint32_t n_samples = r.u32();
    if (!r.need(std::size_t{n_channels} * n_samples * 4))
      throw DataError(at + ": truncated payload");
    t.data = Matrix(n_channels, n_samples);
    for (std::uint32_t c = 0; c < n_channels; ++c)
      for (std::uint32_t s = 0; s < n_samples; ++s) {
        const double v = r.f32();
        if (!std::isfinite(v))
          throw DataError(at + ": non-finite sample at channel " +
                          std::to_string(c));
        t.data.at(c, s) = v;
      }
    set.trials.push_back(std::move(t));
  }
  if (r.pos != r.n) throw DataError("trailing bytes in " + path.string());
  set.validate();
  return set;
}

void save_binary(const TrialSet& set, const std::filesystem::path& path) {
  const double fs_round = std::round(set.fs_hz);
  if (fs_round != set.fs_hz || set.fs_hz <= 0)
    throw DataError("binary format stores integral sampling rates only");
  std::string out;
  out.append(kMagic, 6);
  put_u16(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(set.channels.count));
  put_u32(out, static_cast<std::uint32_t>(fs_round));
  put_u32(out, static_cast<std::uint32_t>(set.trials.size()));
  for (const Trial& t : set.trials) {
    out.push_back(static_cast<char>(t.label));
    out.push_back(static_cast<char>(t.session_id));
    put_u16(out, static_cast<std::uint16_t>(t.subject_id.size()));
    out.append(t.subject_id);
    put_u32(out, static_cast<std::uint32_t>(t.n_samples()));
    for (std::size_t c = 0; c < t.n_channels(); ++c)
      for (std::size_t s = 0; s < t.n_samples(); ++s)
        put_f32(out, static_cast<float>(t.data.at(c, s)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

TrialSet load_csv(const std::filesystem::path& path, double fs_hz_hint) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  double fs = fs_hz_hint;
  std::string line;
  bool header_seen = false;
  TrialSet set;
  Trial current;
  std::size_t next_channel = 0;
  std::size_t trial_idx = 0;
  std::vector<std::vector<double>> rows;

  auto flush_trial = [&]() {
    if (rows.empty()) return;
    const std::size_t n_samples = rows[0].size();
    current.data = Matrix(rows.size(), n_samples);
    for (std::size_t c = 0; c < rows.size(); ++c) {
      if (rows[c].size() != n_samples)
        throw DataError("trial " + std::to_string(trial_idx) +
                        ": ragged sample counts");
      std::memcpy(current.data.row(c), rows[c].data(),
                  n_samples * sizeof(double));
    }
    current.fs_hz = fs;
    set.trials.push_back(std::move(current));
    current = Trial{};
    rows.clear();
    ++trial_idx;
  };

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find("fs_hz=");
      if (eq != std::string::npos) fs = std::stod(line.substr(eq + 6));
      continue;
    }
    if (!header_seen) {
      if (line.rfind("subject,session,label,channel", 0) != 0)
        throw DataError("malformed header in " + path.string());
      header_seen = true;
      continue;
    }
    std::stringstream ss(line);
    std::string subject, session_tok, label_tok, channel_tok, cell;
    if (!std::getline(ss, subject, ',') || !std::getline(ss, session_tok, ',') ||
        !std::getline(ss, label_tok, ',') || !std::getline(ss, channel_tok, ','))
      throw DataError("trial " + std::to_string(trial_idx) + ": malformed row");
    const std::size_t channel = std::stoul(channel_tok);
    if (channel == 0) flush_trial();
    if (channel != next_channel && channel != 0)
      throw DataError("trial " + std::to_string(trial_idx) +
                      ": channel rows out of order");
    next_channel = channel + 1;
    if (channel == 0) {
      current.subject_id = subject;
      current.session_id = std::stoi(session_tok);
      current.label = static_cast<std::uint8_t>(parse_label(label_tok, trial_idx));
    }
    std::vector<double> samples;
    while (std::getline(ss, cell, ',')) {
      const double v = std::stod(cell);
      if (!std::isfinite(v))
        throw DataError("trial " + std::to_string(trial_idx) +
                        ": non-finite sample at channel " +
                        std::to_string(channel));
      samples.push_back(v);
    }
    rows.push_back(std::move(samples));
  }
  flush_trial();

  if (set.trials.empty()) throw DataError("no trials in " + path.string());
  if (fs <= 0)
    throw DataError("sampling rate unknown: add '# fs_hz=...' or pass a hint");
  set.fs_hz = fs;
  for (auto& t : set.trials) t.fs_hz = fs;
  set.channels = ChannelSet::make_default(set.trials[0].n_channels());
  set.validate();
  return set;
}

void save_csv(const TrialSet& set, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  char buf[64];
  std::snprintf(buf, sizeof(buf), "# fs_hz=%g\n", set.fs_hz);
  f << buf << "subject,session,label,channel";
  const std::size_t n_samples =
      set.trials.empty() ? 0 : set.trials[0].n_samples();
  for (std::size_t s = 0; s < n_samples; ++s) f << ",s" << s;
  f << "\n";
  for (const Trial& t : set.trials) {
    for (std::size_t c = 0; c < t.n_channels(); ++c) {
      f << t.subject_id << ',' << t.session_id << ','
        << static_cast<int>(t.label) << ',' << c;
      for (std::size_t s = 0; s < t.n_samples(); ++s) {
        // %.9g round-trips the on-disk f32 payload exactly
        std::snprintf(buf, sizeof(buf), ",%.9g",
                      static_cast<double>(static_cast<float>(t.data.at(c, s))));
        f << buf;
      }
      f << "\n";
    }
  }
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace

ChannelSet ChannelSet::make_default(std::size_t count) {
  ChannelSet cs;
  cs.count = count;
  cs.labels.reserve(count);
  char buf[16];
  for (std::size_t i = 0; i < count; ++i) {
    std::snprintf(buf, sizeof(buf), "ch%02zu", i);
    cs.labels.emplace_back(buf);
  }
  return cs;
}

void ChannelSet::validate() const {
  if (count < 1) throw DataError("channel set: count must be >= 1");
  if (labels.size() != count)
    throw DataError("channel set: label count mismatch");
  std::set<std::string> uniq(labels.begin(), labels.end());
  if (uniq.size() != count) throw DataError("channel set: duplicate labels");
}

void TrialSet::validate() const {
  channels.validate();
  if (trials.empty()) throw DataError("no trials");
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const std::string at = "trial " + std::to_string(i);
    const Trial& t = trials[i];
    if (t.fs_hz != fs_hz) throw DataError(at + ": mixed sampling rates");
    if (t.n_channels() != channels.count)
      throw DataError(at + ": channel count mismatch (" +
                      std::to_string(t.n_channels()) + " vs " +
                      std::to_string(channels.count) + ")");
    if (t.label >= kNumClasses)
      throw DataError(at + ": unknown label " + std::to_string(t.label));
    for (double v : t.data.v)
      if (!std::isfinite(v)) throw DataError(at + ": non-finite sample");
  }
}

Epoch extract_epoch(const Trial& trial, double t0_s, double t1_s) {
  if (!(t0_s >= 0.0) || !(t0_s < t1_s) || t1_s > trial.duration_s() + 1e-9)
    throw DataError("epoch window [" + std::to_string(t0_s) + ", " +
                    std::to_string(t1_s) + "] out of range for " +
                    std::to_string(trial.duration_s()) + " s trial");
  const std::size_t start =
      static_cast<std::size_t>(std::lround(t0_s * trial.fs_hz));
  const std::size_t len =
      static_cast<std::size_t>(std::lround((t1_s - t0_s) * trial.fs_hz));
  if (start + len > trial.n_samples())
    throw DataError("epoch window exceeds trial length");

  Epoch e;
  e.t0_s = t0_s;
  e.t1_s = t1_s;
  e.fs_hz = trial.fs_hz;
  e.label = trial.label;
  e.subject_id = trial.subject_id;
  e.session_id = trial.session_id;
  e.data = Matrix(trial.n_channels(), len);
  for (std::size_t c = 0; c < trial.n_channels(); ++c)
    std::memcpy(e.data.row(c), trial.data.row(c) + start, len * sizeof(double));
  return e;
}

TrialSet load_trialset(const std::filesystem::path& path, Format format,
                       double fs_hz_hint) {
  return format == Format::binary ? load_binary(path)
                                  : load_csv(path, fs_hz_hint);
}

void save_trialset(const TrialSet& set, const std::filesystem::path& path,
                   Format format) {
  set.validate();
  if (format == Format::binary)
    save_binary(set, path);
  else
    save_csv(set, path);
}

}  // namespace miemph::eeg
