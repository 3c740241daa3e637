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

#include "vqphone/frontend.hpp"

#include <algorithm>
#include <unsupported/Eigen/FFT>
#include <vector>

namespace vqphone {

void FrameParams::validate() const {
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (fft_size <= 0 || window <= 0 || hop <= 0) throw ConfigError("fft_size, window and hop must be positive");
  if (window > fft_size) throw ConfigError("window must not exceed fft_size");
  if (hop > window) throw ConfigError("hop must not exceed window");
  if (mel_bins <= 0) throw ConfigError("mel_bins must be positive");
  if (!(fmin >= 0.0) || !(fmin < fmax)) throw ConfigError("require 0 <= fmin < fmax");
  if (fmax > sample_rate / 2.0) {
    throw ConfigError("fmax " + std::to_string(fmax) + " exceeds Nyquist " +
                      std::to_string(sample_rate / 2.0));
  }
  if (!(log_floor > 0.0)) throw ConfigError("log_floor must be positive");
}

Index frame_count(Index samples, const FrameParams& p) {
  if (samples < p.window) return 0;
  return 1 + (samples - p.window) / p.hop;
}

ComplexRowMatrix stft(const std::vector<double>& samples, const FrameParams& p) {
  const Index frames = frame_count(static_cast<Index>(samples.size()), p);
  const VectorXd window = hann_window(p.window);
  ComplexRowMatrix out(frames, p.spectrum_bins());
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(static_cast<std::size_t>(p.fft_size), 0.0);
  std::vector<std::complex<double>> spectrum;
  for (Index t = 0; t < frames; ++t) {
    const double* src = samples.data() + t * p.hop;
    for (int n = 0; n < p.window; ++n) frame[static_cast<std::size_t>(n)] = src[n] * window[n];
    fft.fwd(spectrum, frame);
    for (int k = 0; k < p.spectrum_bins(); ++k) out(t, k) = spectrum[static_cast<std::size_t>(k)];
  }
  return out;
}

std::vector<double> istft(const ComplexRowMatrix& spectrum, const FrameParams& p) {
  const Index frames = spectrum.rows();
  if (spectrum.cols() != p.spectrum_bins()) {
    throw DimensionError("istft", 1, p.spectrum_bins(), spectrum.cols());
  }
  if (frames == 0) return {};
  const std::size_t length = static_cast<std::size_t>((frames - 1) * p.hop + p.window);
  std::vector<double> out(length, 0.0);
  std::vector<double> norm(length, 0.0);
  const VectorXd window = hann_window(p.window);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> half(static_cast<std::size_t>(p.spectrum_bins()));
  std::vector<double> frame;
  for (Index t = 0; t < frames; ++t) {
    for (int k = 0; k < p.spectrum_bins(); ++k) half[static_cast<std::size_t>(k)] = spectrum(t, k);
    fft.inv(frame, half, p.fft_size);
    const std::size_t start = static_cast<std::size_t>(t * p.hop);
    for (int n = 0; n < p.window; ++n) {
      out[start + static_cast<std::size_t>(n)] += frame[static_cast<std::size_t>(n)] * window[n];
      norm[start + static_cast<std::size_t>(n)] += window[n] * window[n];
    }
  }
  for (std::size_t i = 0; i < length; ++i) {
    if (norm[i] > 1e-8) out[i] /= norm[i];
  }
  return out;
}

RowMatrixXd stft_power(const AudioBuffer& buffer, const FrameParams& p) {
  p.validate();
  if (static_cast<Index>(buffer.samples.size()) < p.window) {
    throw DimensionError("stft_power", "buffer of " + std::to_string(buffer.samples.size()) +
                                           " samples is shorter than one window (" +
                                           std::to_string(p.window) + ")");
  }
  return stft(buffer.samples, p).cwiseAbs2();
}

MelSpectrogram mel_spectrogram(const AudioBuffer& buffer, FrameParams p,
                               const std::string& utterance_id) {
  p.sample_rate = buffer.sample_rate;
  const RowMatrixXd power = stft_power(buffer, p);
  const RowMatrixXd bank = build_mel_filterbank(p);
  MelSpectrogram mel;
  mel.params = p;
  mel.utterance_id = utterance_id;
  mel.frames = (power * bank.transpose()).cwiseMax(p.log_floor).array().log().matrix();
  return mel;
}

AudioBuffer griffin_lim_invert(const MelSpectrogram& mel, int iterations) {
  const FrameParams& p = mel.params;
  p.validate();
  if (mel.frames.cols() != p.mel_bins) {
    throw DimensionError("griffin_lim_invert", 1, p.mel_bins, mel.frames.cols());
  }
  AudioBuffer out;
  out.sample_rate = p.sample_rate;
  if (mel.num_frames() == 0) return out;

  const RowMatrixXd bank = build_mel_filterbank(p);
  const Eigen::MatrixXd pinv = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(bank).pseudoInverse();
  // Floor cells carry no energy information; treat them as silent.
  const double floor_log = std::log(p.log_floor);
  const RowMatrixXd mel_power =
      mel.frames.unaryExpr([floor_log](double v) { return v > floor_log + 1e-9 ? std::exp(v) : 0.0; });
  const RowMatrixXd magnitude = (mel_power * pinv.transpose()).cwiseMax(0.0).cwiseSqrt();

  ComplexRowMatrix spectrum = magnitude.cast<std::complex<double>>();
  std::vector<double> signal = istft(spectrum, p);
  for (int it = 0; it < iterations; ++it) {
    const ComplexRowMatrix estimate = stft(signal, p);
    for (Index t = 0; t < spectrum.rows(); ++t) {
      for (Index k = 0; k < spectrum.cols(); ++k) {
        const std::complex<double> z = estimate(t, k);
        const double a = std::abs(z);
        spectrum(t, k) = a > 1e-12 ? magnitude(t, k) * (z / a) : std::complex<double>(magnitude(t, k), 0.0);
      }
    }
    signal = istft(spectrum, p);
  }
  for (double& s : signal) s = std::clamp(s, -1.0, 1.0);
  out.samples = std::move(signal);
  return out;
}

}  // namespace vqphone
