#pragma once

#include <string>
#include <vector>

#include "cnf/errors.hpp"

namespace cnf {

/// Mono audio in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 0;

  double seconds() const { return sample_rate > 0 ? double(samples.size()) / sample_rate : 0.0; }
};

/// Decode a RIFF/WAVE file. Accepts PCM 16-bit and IEEE float-32, any
/// channel count >= 1 (channels are averaged into mono). PCM samples are
/// scaled by 1/32768.
///
/// Errors: file_not_found, malformed_wav, unsupported_codec.
AudioClip load_wav(const std::string& path);

/// Write a mono PCM 16-bit WAV (values clamped to [-1, 1]).
void save_wav_pcm16(const std::string& path, const AudioClip& clip);

/// Linear-interpolation resampler. Output length = round(len * target/source).
/// Low quality but fully deterministic, which is what the test suite needs.
AudioClip resample(const AudioClip& clip, int target_rate);

/// Tile the clip end-to-end and truncate to exactly round(target_seconds * sr)
/// samples. Clips longer than the target are truncated too.
AudioClip repeat_to_length(const AudioClip& clip, double target_seconds);

}  // namespace cnf
