#include "cnf/audio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace cnf {

namespace {

constexpr uint16_t kFormatPcm = 0x0001;
constexpr uint16_t kFormatFloat = 0x0003;

uint32_t read_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint16_t read_u16(const uint8_t* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

}  // namespace

AudioClip load_wav(const std::string& path) {
  if (!std::filesystem::exists(path)) raise(Errc::file_not_found, path);
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    raise(Errc::malformed_wav, path + ": not a RIFF/WAVE file");
  }

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  bool have_fmt = false;
  const uint8_t* data = nullptr;
  uint32_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* hdr = bytes.data() + pos;
    uint32_t chunk_len = read_u32(hdr + 4);
    size_t body = pos + 8;
    if (body + chunk_len > bytes.size()) raise(Errc::malformed_wav, path + ": truncated chunk");
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) raise(Errc::malformed_wav, path + ": short fmt chunk");
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      sample_rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data == nullptr) raise(Errc::malformed_wav, path + ": missing fmt/data chunk");
  if (channels < 1 || sample_rate == 0) raise(Errc::malformed_wav, path + ": bad fmt fields");

  bool pcm16 = (format == kFormatPcm && bits == 16);
  bool f32 = (format == kFormatFloat && bits == 32);
  if (!pcm16 && !f32) {
    raise(Errc::unsupported_codec,
          path + ": format " + std::to_string(format) + " / " + std::to_string(bits) + " bits");
  }

  size_t bytes_per_sample = pcm16 ? 2 : 4;
  size_t frame_bytes = bytes_per_sample * channels;
  size_t n_frames = data_len / frame_bytes;
  if (n_frames == 0) raise(Errc::malformed_wav, path + ": empty data chunk");

  AudioClip clip;
  clip.sample_rate = int(sample_rate);
  clip.samples.resize(n_frames);
  const double inv_ch = 1.0 / channels;
  for (size_t f = 0; f < n_frames; ++f) {
    double acc = 0.0;
    const uint8_t* frame = data + f * frame_bytes;
    for (unsigned c = 0; c < channels; ++c) {
      if (pcm16) {
        int16_t s = int16_t(read_u16(frame + c * 2));
        acc += double(s) / 32768.0;
      } else {
        uint32_t u = read_u32(frame + c * 4);
        float v;
        std::memcpy(&v, &u, 4);
        acc += double(v);
      }
    }
    clip.samples[f] = float(acc * inv_ch);
  }
  return clip;
}

void save_wav_pcm16(const std::string& path, const AudioClip& clip) {
  if (clip.samples.empty() || clip.sample_rate <= 0) raise(Errc::empty_input, "empty clip");
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::io, "cannot write " + path);

  auto put_u32 = [&](uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  auto put_u16 = [&](uint16_t v) {
    uint8_t b[2] = {uint8_t(v), uint8_t(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
  };

  uint32_t data_len = uint32_t(clip.samples.size() * 2);
  out.write("RIFF", 4);
  put_u32(36 + data_len);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(kFormatPcm);
  put_u16(1);
  put_u32(uint32_t(clip.sample_rate));
  put_u32(uint32_t(clip.sample_rate) * 2);
  put_u16(2);
  put_u16(16);
  out.write("data", 4);
  put_u32(data_len);
  for (float s : clip.samples) {
    double x = std::fmin(1.0, std::fmax(-1.0, double(s)));
    int v = int(std::lrint(x * 32767.0));
    put_u16(uint16_t(int16_t(v)));
  }
  if (!out) raise(Errc::io, "write failed: " + path);
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) raise(Errc::invalid_argument, "target_rate must be positive");
  if (clip.samples.empty()) raise(Errc::empty_input, "empty clip");
  if (target_rate == clip.sample_rate) return clip;

  size_t len = clip.samples.size();
  size_t out_len = size_t(std::llround(double(len) * target_rate / clip.sample_rate));
  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  const double step = double(clip.sample_rate) / target_rate;
  for (size_t i = 0; i < out_len; ++i) {
    double pos = double(i) * step;
    size_t i0 = size_t(pos);
    if (i0 >= len - 1) {
      out.samples[i] = clip.samples[len - 1];
    } else {
      double frac = pos - double(i0);
      out.samples[i] = float((1.0 - frac) * clip.samples[i0] + frac * clip.samples[i0 + 1]);
    }
  }
  return out;
}

AudioClip repeat_to_length(const AudioClip& clip, double target_seconds) {
  if (clip.samples.empty()) raise(Errc::empty_input, "empty clip");
  size_t target = size_t(std::llround(target_seconds * clip.sample_rate));
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.resize(target);
  size_t len = clip.samples.size();
  for (size_t i = 0; i < target; ++i) out.samples[i] = clip.samples[i % len];
  return out;
}

}  // namespace cnf
