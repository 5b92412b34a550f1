#pragma once

#include <vector>

#include "cnf/audio.hpp"
#include "cnf/mat.hpp"

namespace cnf {

/// One-sided STFT magnitudes, (n_fft/2 + 1) x n_frames.
struct Spectrogram {
  Mat magnitudes;
  int n_fft = 0;
  int hop = 0;
};

/// Triangular mel filterbank, n_mels x (n_fft/2 + 1).
struct MelFilterbank {
  Mat weights;
  int n_mels = 0;
  double f_min = 0.0;
  double f_max = 0.0;
  std::vector<double> center_hz;  // per filter
};

/// Decibel-scaled mel-spectrogram, n_mels x n_frames (96 x 1360 with the
/// default config). Max entry is 0 (reference-to-max), min entry >= floor_db.
struct MelSpectrogram {
  Mat db;
  double floor_db = -80.0;
};

/// Frontend parameters. The defaults produce the 96 x 1360 input layout:
/// 29.12 s at 12 kHz, 512-point FFT, hop 256, then a center crop of the
/// frame axis to exactly 1360 columns.
struct DspConfig {
  int sample_rate = 12000;
  int n_fft = 512;
  int hop = 256;
  int n_mels = 96;
  int n_frames = 1360;
  double clip_seconds = 29.12;
  double floor_db = -80.0;
  int mfcc_coeffs = 20;
  int delta_width = 9;
};

/// Mel scale (Slaney variant): linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

/// Magnitude STFT with reflect padding of n_fft/2 on both ends, so frame t
/// is centered on sample t*hop. Frame count = floor(len/hop) + 1.
Spectrogram stft_magnitude(const AudioClip& clip, int n_fft = 512, int hop = 256);

/// Triangular filters with centers equally spaced on the mel scale and
/// Slaney area normalization (each triangle scaled by 2 / base width in Hz).
MelFilterbank mel_filterbank(int sample_rate, int n_fft, int n_mels, double f_min, double f_max);

/// Full frontend: repeat_to_length -> resample -> STFT -> mel power ->
/// decibels (reference-to-max, floored) -> crop/pad frames.
/// An all-zero clip maps to an all-zero matrix.
MelSpectrogram melspectrogram(const AudioClip& clip, const DspConfig& cfg = {});

/// Orthonormal DCT-II matrix (n_out x n_in).
Mat dct2_matrix(int n_out, int n_in);

/// First mfcc_coeffs cepstral coefficients per frame of the log-mel matrix.
Mat mfcc_of_melspec(const MelSpectrogram& mel, int n_coeffs = 20);

/// MFCC matrix (n_coeffs x n_frames) computed from melspectrogram(clip).
Mat mfcc(const AudioClip& clip, int n_coeffs = 20, const DspConfig& cfg = {});

/// Local linear-regression slope over a centered window of `width` frames,
/// with edge columns replicated. width must be odd and >= 3.
Mat delta(const Mat& m, int width = 9);

/// 120-dim baseline vector: [mean(MFCC), std(MFCC), mean(d), std(d),
/// mean(dd), std(dd)], 20 values per block, population standard deviation.
std::vector<double> mfcc_feature_vector(const AudioClip& clip, const DspConfig& cfg = {});

/// Same, from a precomputed mel-spectrogram (shares work with the convnet
/// path when both features are extracted from one clip).
std::vector<double> mfcc_feature_vector_of_melspec(const MelSpectrogram& mel,
                                                   const DspConfig& cfg = {});

}  // namespace cnf
