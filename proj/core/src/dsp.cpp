#include "cnf/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>

namespace cnf {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// Iterative radix-2 Cooley-Tukey, in place. n must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * kPi / double(len);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

/// Reflect index into [0, len) without repeating the edge sample
/// (librosa-style reflect padding; period 2*(len-1)).
size_t reflect_index(long long i, size_t len) {
  if (len == 1) return 0;
  long long period = 2 * (long long(len) - 1);
  long long m = i % period;
  if (m < 0) m += period;
  if (m >= long long(len)) m = period - m;
  return size_t(m);
}

}  // namespace

double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz < min_log_hz) return hz / f_sp;
  return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return mel * f_sp;
  return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(size_t(n));
  for (int i = 0; i < n; ++i) w[size_t(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
  return w;
}

Spectrogram stft_magnitude(const AudioClip& clip, int n_fft, int hop) {
  if (clip.samples.empty()) raise(Errc::empty_input, "empty clip");
  if (!is_power_of_two(n_fft)) raise(Errc::invalid_argument, "n_fft must be a power of two");
  if (hop <= 0) raise(Errc::invalid_argument, "hop must be positive");

  const size_t len = clip.samples.size();
  const int pad = n_fft / 2;
  const size_t n_frames = len / size_t(hop) + 1;
  const int n_bins = n_fft / 2 + 1;
  const std::vector<double> window = hann_window(n_fft);

  Spectrogram out;
  out.n_fft = n_fft;
  out.hop = hop;
  out.magnitudes = Mat(n_bins, int(n_frames));

  std::vector<std::complex<double>> buf(size_t(n_fft));
  for (size_t t = 0; t < n_frames; ++t) {
    long long start = (long long)(t)*hop - pad;
    for (int i = 0; i < n_fft; ++i) {
      double s = clip.samples[reflect_index(start + i, len)];
      buf[size_t(i)] = std::complex<double>(s * window[size_t(i)], 0.0);
    }
    fft_inplace(buf);
    for (int k = 0; k < n_bins; ++k) out.magnitudes.at(k, int(t)) = std::abs(buf[size_t(k)]);
  }
  return out;
}

MelFilterbank mel_filterbank(int sample_rate, int n_fft, int n_mels, double f_min, double f_max) {
  if (n_mels < 1) raise(Errc::invalid_argument, "n_mels must be >= 1");
  if (!(f_min >= 0.0) || !(f_min < f_max) || f_max > sample_rate / 2.0 + 1e-9) {
    raise(Errc::invalid_argument, "need 0 <= f_min < f_max <= sr/2");
  }
  const int n_bins = n_fft / 2 + 1;

  // n_mels + 2 edge frequencies, equally spaced in mel.
  std::vector<double> hz(size_t(n_mels) + 2);
  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  for (int i = 0; i < n_mels + 2; ++i) {
    hz[size_t(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }

  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.f_min = f_min;
  fb.f_max = f_max;
  fb.weights = Mat(n_mels, n_bins);
  fb.center_hz.resize(size_t(n_mels));

  for (int m = 0; m < n_mels; ++m) {
    const double lo = hz[size_t(m)], center = hz[size_t(m) + 1], hi = hz[size_t(m) + 2];
    fb.center_hz[size_t(m)] = center;
    const double enorm = 2.0 / (hi - lo);  // Slaney area normalization
    for (int k = 0; k < n_bins; ++k) {
      double f = double(k) * sample_rate / n_fft;
      double up = (f - lo) / (center - lo);
      double down = (hi - f) / (hi - center);
      double w = std::max(0.0, std::min(up, down));
      fb.weights.at(m, k) = w * enorm;
    }
  }
  return fb;
}

MelSpectrogram melspectrogram(const AudioClip& clip, const DspConfig& cfg) {
  AudioClip fixed = repeat_to_length(clip, cfg.clip_seconds);
  fixed = resample(fixed, cfg.sample_rate);

  Spectrogram spec = stft_magnitude(fixed, cfg.n_fft, cfg.hop);
  MelFilterbank fb =
      mel_filterbank(cfg.sample_rate, cfg.n_fft, cfg.n_mels, 0.0, cfg.sample_rate / 2.0);

  // Sparse row ranges: each triangle covers a narrow bin interval.
  const int n_bins = cfg.n_fft / 2 + 1;
  std::vector<std::pair<int, int>> support(size_t(cfg.n_mels));
  for (int m = 0; m < cfg.n_mels; ++m) {
    int b = 0, e = n_bins;
    while (b < n_bins && fb.weights.at(m, b) == 0.0) ++b;
    while (e > b && fb.weights.at(m, e - 1) == 0.0) --e;
    support[size_t(m)] = {b, e};
  }

  const int frames_in = spec.magnitudes.cols;
  Mat mel_power(cfg.n_mels, frames_in);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const auto [b, e] = support[size_t(m)];
    const double* wrow = fb.weights.row(m);
    for (int t = 0; t < frames_in; ++t) {
      double acc = 0.0;
      for (int k = b; k < e; ++k) {
        double mag = spec.magnitudes.at(k, t);
        acc += wrow[k] * mag * mag;
      }
      mel_power.at(m, t) = acc;
    }
  }

  double peak = 0.0;
  for (double p : mel_power.v) peak = std::max(peak, p);

  MelSpectrogram out;
  out.floor_db = cfg.floor_db;
  out.db = Mat(cfg.n_mels, cfg.n_frames, 0.0);
  if (peak <= 0.0) return out;  // zero-signal guard: all-zero dB matrix

  // Center crop (or pad with the floor) of the frame axis.
  const int offset = (frames_in - cfg.n_frames) / 2;
  const double ref_db = 10.0 * std::log10(std::max(peak, 1e-10));
  for (int m = 0; m < cfg.n_mels; ++m) {
    for (int t = 0; t < cfg.n_frames; ++t) {
      int src = t + offset;
      double db;
      if (src < 0 || src >= frames_in) {
        db = cfg.floor_db;
      } else {
        db = 10.0 * std::log10(std::max(mel_power.at(m, src), 1e-10)) - ref_db;
        db = std::max(db, cfg.floor_db);
      }
      out.db.at(m, t) = db;
    }
  }
  return out;
}

Mat dct2_matrix(int n_out, int n_in) {
  Mat d(n_out, n_in);
  const double scale0 = std::sqrt(1.0 / n_in);
  const double scale = std::sqrt(2.0 / n_in);
  for (int k = 0; k < n_out; ++k) {
    for (int n = 0; n < n_in; ++n) {
      d.at(k, n) = (k == 0 ? scale0 : scale) * std::cos(kPi * k * (2.0 * n + 1.0) / (2.0 * n_in));
    }
  }
  return d;
}

Mat mfcc_of_melspec(const MelSpectrogram& mel, int n_coeffs) {
  const int n_mels = mel.db.rows;
  const int n_frames = mel.db.cols;
  if (n_coeffs < 1 || n_coeffs > n_mels) raise(Errc::invalid_argument, "bad n_coeffs");
  Mat dct = dct2_matrix(n_coeffs, n_mels);
  Mat out(n_coeffs, n_frames);
  for (int k = 0; k < n_coeffs; ++k) {
    const double* drow = dct.row(k);
    for (int t = 0; t < n_frames; ++t) {
      double acc = 0.0;
      for (int m = 0; m < n_mels; ++m) acc += drow[m] * mel.db.at(m, t);
      out.at(k, t) = acc;
    }
  }
  return out;
}

Mat mfcc(const AudioClip& clip, int n_coeffs, const DspConfig& cfg) {
  return mfcc_of_melspec(melspectrogram(clip, cfg), n_coeffs);
}

Mat delta(const Mat& m, int width) {
  if (width < 3 || width % 2 == 0) raise(Errc::invalid_argument, "delta width must be odd, >= 3");
  const int half = width / 2;
  double denom = 0.0;
  for (int n = 1; n <= half; ++n) denom += 2.0 * n * n;

  Mat out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    for (int t = 0; t < m.cols; ++t) {
      double acc = 0.0;
      for (int n = 1; n <= half; ++n) {
        int hi = std::min(t + n, m.cols - 1);  // edge replication
        int lo = std::max(t - n, 0);
        acc += n * (m.at(r, hi) - m.at(r, lo));
      }
      out.at(r, t) = acc / denom;
    }
  }
  return out;
}

namespace {

void append_mean_std(const Mat& m, std::vector<double>& out) {
  for (int r = 0; r < m.rows; ++r) {
    double mean = 0.0;
    for (int t = 0; t < m.cols; ++t) mean += m.at(r, t);
    mean /= m.cols;
    out.push_back(mean);
  }
  for (int r = 0; r < m.rows; ++r) {
    double mean = 0.0, sq = 0.0;
    for (int t = 0; t < m.cols; ++t) mean += m.at(r, t);
    mean /= m.cols;
    for (int t = 0; t < m.cols; ++t) {
      double d = m.at(r, t) - mean;
      sq += d * d;
    }
    out.push_back(std::sqrt(sq / m.cols));  // population std
  }
}

}  // namespace

std::vector<double> mfcc_feature_vector_of_melspec(const MelSpectrogram& mel,
                                                   const DspConfig& cfg) {
  Mat c = mfcc_of_melspec(mel, cfg.mfcc_coeffs);
  Mat d1 = delta(c, cfg.delta_width);
  Mat d2 = delta(d1, cfg.delta_width);
  std::vector<double> out;
  out.reserve(size_t(cfg.mfcc_coeffs) * 6);
  append_mean_std(c, out);
  append_mean_std(d1, out);
  append_mean_std(d2, out);
  return out;
}

std::vector<double> mfcc_feature_vector(const AudioClip& clip, const DspConfig& cfg) {
  return mfcc_feature_vector_of_melspec(melspectrogram(clip, cfg), cfg);
}

}  // namespace cnf
