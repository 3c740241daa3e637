// Copyright 2026 The vqphone Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Log-mel spectrogram analysis and a lossy Griffin-Lim inversion.

#include <cmath>
#include <complex>
#include <string>

#include "vqphone/eigen_types.hpp"
#include "vqphone/errors.hpp"
#include "vqphone/wav.hpp"

namespace vqphone {

struct FrameParams {
  int sample_rate = 24000;
  int fft_size = 1024;
  int hop = 256;
  int window = 1024;
  int mel_bins = 80;
  double fmin = 80.0;
  double fmax = 11000.0;
  double log_floor = 1e-10;

  int spectrum_bins() const { return fft_size / 2 + 1; }
  // Throws ConfigError describing the first violated constraint.
  void validate() const;
  bool operator==(const FrameParams&) const = default;
};

// Frames in row order, mel bands in columns.
struct MelSpectrogram {
  RowMatrixXd frames;
  FrameParams params;
  std::string utterance_id;

  Index num_frames() const { return frames.rows(); }
};

// 1 + floor((samples - window) / hop); zero when the signal is shorter than
// one window.
Index frame_count(Index samples, const FrameParams& p);

template <typename Scalar>
Scalar hz_to_mel(Scalar hz) {
  using std::log10;
  return Scalar(2595) * log10(Scalar(1) + hz / Scalar(700));
}

template <typename Scalar>
Scalar mel_to_hz(Scalar mel) {
  using std::pow;
  return Scalar(700) * (pow(Scalar(10), mel / Scalar(2595)) - Scalar(1));
}

// Periodic Hann window.
template <typename Scalar = double>
Vector<Scalar> hann_window(Index length) {
  Vector<Scalar> w(length);
  const Scalar two_pi = Scalar(2) * Scalar(M_PI);
  for (Index n = 0; n < length; ++n) {
    using std::cos;
    w[n] = Scalar(0.5) - Scalar(0.5) * cos(two_pi * Scalar(n) / Scalar(length));
  }
  return w;
}

// Center frequencies (Hz) of the mel_bins filters.
template <typename Scalar = double>
Vector<Scalar> mel_center_frequencies(const FrameParams& p) {
  const Scalar lo = hz_to_mel<Scalar>(Scalar(p.fmin));
  const Scalar hi = hz_to_mel<Scalar>(Scalar(p.fmax));
  Vector<Scalar> centers(p.mel_bins);
  for (int j = 0; j < p.mel_bins; ++j) {
    centers[j] = mel_to_hz<Scalar>(lo + (hi - lo) * Scalar(j + 1) / Scalar(p.mel_bins + 1));
  }
  return centers;
}

// mel_bins x (fft_size/2 + 1) triangular filters with unit peak, spaced
// uniformly on the HTK mel scale between fmin and fmax. A filter narrower than
// one FFT bin keeps a single unit weight at the bin nearest its center.
template <typename Scalar = double>
RowMatrix<Scalar> build_mel_filterbank(const FrameParams& p) {
  p.validate();
  const int bins = p.spectrum_bins();
  const Scalar lo = hz_to_mel<Scalar>(Scalar(p.fmin));
  const Scalar hi = hz_to_mel<Scalar>(Scalar(p.fmax));
  Vector<Scalar> edges(p.mel_bins + 2);
  for (int j = 0; j < p.mel_bins + 2; ++j) {
    edges[j] = mel_to_hz<Scalar>(lo + (hi - lo) * Scalar(j) / Scalar(p.mel_bins + 1));
  }
  const Scalar bin_hz = Scalar(p.sample_rate) / Scalar(p.fft_size);
  RowMatrix<Scalar> bank = RowMatrix<Scalar>::Zero(p.mel_bins, bins);
  for (int j = 0; j < p.mel_bins; ++j) {
    const Scalar left = edges[j], center = edges[j + 1], right = edges[j + 2];
    for (int k = 0; k < bins; ++k) {
      const Scalar f = Scalar(k) * bin_hz;
      const Scalar rise = (f - left) / (center - left);
      const Scalar fall = (right - f) / (right - center);
      const Scalar w = rise < fall ? rise : fall;
      if (w > Scalar(0)) bank(j, k) = w;
    }
    if (bank.row(j).sum() == Scalar(0)) {
      using std::round;
      const int nearest = static_cast<int>(round(center / bin_hz));
      bank(j, nearest < bins ? nearest : bins - 1) = Scalar(1);
    }
  }
  return bank;
}

// T x (fft_size/2 + 1) power spectrogram |DFT(w * frame)|^2 with a Hann window
// of `window` samples zero-padded to fft_size. Frames are not centered and the
// tail that does not fill a whole window is dropped.
RowMatrixXd stft_power(const AudioBuffer& buffer, const FrameParams& p);

using ComplexRowMatrix =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Complex half-spectrum STFT with the same framing as stft_power.
ComplexRowMatrix stft(const std::vector<double>& samples, const FrameParams& p);

// Weighted overlap-add inverse of stft(); output has (T - 1) * hop + window
// samples.
std::vector<double> istft(const ComplexRowMatrix& spectrum, const FrameParams& p);

// log(max(power * filterbank^T, log_floor)). p.sample_rate is overwritten by
// the buffer's rate.
MelSpectrogram mel_spectrogram(const AudioBuffer& buffer, FrameParams p,
                               const std::string& utterance_id = "");

// Lossy inversion: the mel power is mapped back to a linear spectrum through
// the filterbank pseudo-inverse (clamped at zero), then phase is estimated by
// Griffin-Lim iterations. Output length is (T - 1) * hop + window.
AudioBuffer griffin_lim_invert(const MelSpectrogram& mel, int iterations = 32);

}  // namespace vqphone
