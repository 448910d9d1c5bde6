#pragma once

#include "ecgqa/error.hpp"

#include <complex>
#include <span>
#include <vector>

namespace ecgqa::dsp {

/// One second-order IIR section (a0 normalized to 1).
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0;
    double a1 = 0, a2 = 0;
};

enum class FilterKind { LowPass, HighPass };

/// Butterworth design as cascaded second-order sections (bilinear transform).
/// Supported orders: 1..4. cutoff_hz must lie in (0, fs/2).
std::vector<Biquad> butterworth_sos(int order, double cutoff_hz, double fs, FilterKind kind);

/// RBJ notch at f0 with quality factor q.
Biquad notch(double f0_hz, double fs, double q = 30.0);

/// Forward-backward (zero-phase) application of a biquad cascade with odd
/// reflective extension of `pad` samples at both ends. pad is clamped to n-1.
std::vector<double> filtfilt(const std::vector<Biquad>& sos, std::span<const double> x, int pad);

/// Zero-phase Butterworth high-pass; pad chosen from the cutoff transient.
std::vector<double> highpass_zero_phase(std::span<const double> x, double fs, double cutoff_hz,
                                        int order = 2);
std::vector<double> lowpass_zero_phase(std::span<const double> x, double fs, double cutoff_hz,
                                       int order = 2);
/// Zero-phase notch (two cascaded passes of the RBJ section).
std::vector<double> notch_zero_phase(std::span<const double> x, double fs, double f0_hz,
                                     double q = 30.0);

/// FIR Gaussian smoothing, kernel radius ceil(4*sigma), reflective edges.
std::vector<double> gaussian_smooth(std::span<const double> x, double sigma);

/// Sliding median, odd window, reflective edges.
std::vector<double> median_filter(std::span<const double> x, int window);

/// Savitzky-Golay smoothing. window odd and > order; throws ParameterError
/// otherwise.
std::vector<double> savitzky_golay(std::span<const double> x, int window, int order);

/// Linear-interpolation resampling from rate_in to rate_out.
std::vector<double> resample_linear(std::span<const double> x, double rate_in, double rate_out);

/// In-place iterative radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse = false);

/// One-sided Hann-windowed periodogram. Returns per-bin power; bin k maps to
/// frequency k * fs / n_fft with n_fft the zero-padded transform size.
struct PowerSpectrum {
    std::vector<double> power; // bins 0..n_fft/2
    double bin_hz = 0.0;

    double band(double f_lo, double f_hi) const;
    double total() const;
};

PowerSpectrum power_spectrum(std::span<const double> x, double fs);

} // namespace ecgqa::dsp
