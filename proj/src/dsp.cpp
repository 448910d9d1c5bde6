#include "ecgqa/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ecgqa::dsp {

namespace {

// Quality factors of the conjugate pole pairs of an order-n Butterworth
// prototype; odd orders contribute one extra real pole.
std::vector<double> butterworth_pair_q(int order) {
    std::vector<double> qs;
    for (int k = 1; 2 * k <= order; ++k)
        qs.push_back(1.0 / (2.0 * std::sin(M_PI * (2.0 * k - 1.0) / (2.0 * order))));
    return qs;
}

std::vector<double> odd_extend(std::span<const double> x, int pad) {
    const int n = static_cast<int>(x.size());
    std::vector<double> ext;
    ext.reserve(static_cast<std::size_t>(n) + 2 * pad);
    for (int i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (int i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);
    return ext;
}

void filter_forward(const Biquad& bq, std::vector<double>& x) {
    double w1 = 0.0, w2 = 0.0; // direct form II transposed state
    for (double& v : x) {
        const double in = v;
        const double out = bq.b0 * in + w1;
        w1 = bq.b1 * in - bq.a1 * out + w2;
        w2 = bq.b2 * in - bq.a2 * out;
        v = out;
    }
}

int reflect_index(int i, int n) {
    // Mirror without repeating the edge sample: -1 -> 1, n -> n-2.
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

} // namespace

std::vector<Biquad> butterworth_sos(int order, double cutoff_hz, double fs, FilterKind kind) {
    if (order < 1 || order > 4)
        throw EcgError(ErrorKind::ParameterError, "butterworth order must be 1..4");
    if (fs <= 0 || cutoff_hz <= 0 || cutoff_hz >= fs / 2.0)
        throw EcgError(ErrorKind::ParameterError, "cutoff must lie in (0, fs/2)");

    const double K = std::tan(M_PI * cutoff_hz / fs);
    std::vector<Biquad> sos;
    for (double q : butterworth_pair_q(order)) {
        const double a0 = K * K + K / q + 1.0;
        Biquad bq;
        bq.a1 = 2.0 * (K * K - 1.0) / a0;
        bq.a2 = (K * K - K / q + 1.0) / a0;
        if (kind == FilterKind::LowPass) {
            bq.b0 = K * K / a0;
            bq.b1 = 2.0 * bq.b0;
            bq.b2 = bq.b0;
        } else {
            bq.b0 = 1.0 / a0;
            bq.b1 = -2.0 * bq.b0;
            bq.b2 = bq.b0;
        }
        sos.push_back(bq);
    }
    if (order % 2 == 1) {
        const double a0 = K + 1.0;
        Biquad bq;
        bq.a1 = (K - 1.0) / a0;
        bq.a2 = 0.0;
        if (kind == FilterKind::LowPass) {
            bq.b0 = K / a0;
            bq.b1 = bq.b0;
        } else {
            bq.b0 = 1.0 / a0;
            bq.b1 = -bq.b0;
        }
        bq.b2 = 0.0;
        sos.push_back(bq);
    }
    return sos;
}

Biquad notch(double f0_hz, double fs, double q) {
    if (fs <= 0 || f0_hz <= 0 || f0_hz >= fs / 2.0)
        throw EcgError(ErrorKind::ParameterError, "notch frequency must lie in (0, fs/2)");
    const double w = 2.0 * M_PI * f0_hz / fs;
    const double alpha = std::sin(w) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad bq;
    bq.b0 = 1.0 / a0;
    bq.b1 = -2.0 * std::cos(w) / a0;
    bq.b2 = 1.0 / a0;
    bq.a1 = -2.0 * std::cos(w) / a0;
    bq.a2 = (1.0 - alpha) / a0;
    return bq;
}

std::vector<double> filtfilt(const std::vector<Biquad>& sos, std::span<const double> x, int pad) {
    const int n = static_cast<int>(x.size());
    if (n < 3) return {x.begin(), x.end()};
    pad = std::clamp(pad, 0, n - 1);
    std::vector<double> ext = odd_extend(x, pad);
    for (const Biquad& bq : sos) filter_forward(bq, ext);
    std::reverse(ext.begin(), ext.end());
    for (const Biquad& bq : sos) filter_forward(bq, ext);
    std::reverse(ext.begin(), ext.end());
    return {ext.begin() + pad, ext.begin() + pad + n};
}

namespace {

int transient_pad(double fs, double cutoff_hz) {
    return static_cast<int>(std::ceil(3.0 * fs / cutoff_hz));
}

} // namespace

std::vector<double> highpass_zero_phase(std::span<const double> x, double fs, double cutoff_hz,
                                        int order) {
    return filtfilt(butterworth_sos(order, cutoff_hz, fs, FilterKind::HighPass), x,
                    transient_pad(fs, cutoff_hz));
}

std::vector<double> lowpass_zero_phase(std::span<const double> x, double fs, double cutoff_hz,
                                       int order) {
    return filtfilt(butterworth_sos(order, cutoff_hz, fs, FilterKind::LowPass), x,
                    transient_pad(fs, cutoff_hz));
}

std::vector<double> notch_zero_phase(std::span<const double> x, double fs, double f0_hz, double q) {
    const double bandwidth = f0_hz / q;
    return filtfilt({notch(f0_hz, fs, q)}, x,
                    std::min<int>(static_cast<int>(x.size()) - 1, transient_pad(fs, bandwidth)));
}

std::vector<double> gaussian_smooth(std::span<const double> x, double sigma) {
    if (sigma <= 0) return {x.begin(), x.end()};
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i / sigma) * (i / sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;
    const int n = static_cast<int>(x.size());
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = -radius; j <= radius; ++j)
            acc += kernel[j + radius] * x[reflect_index(i + j, n)];
        out[i] = acc;
    }
    return out;
}

std::vector<double> median_filter(std::span<const double> x, int window) {
    if (window <= 1) return {x.begin(), x.end()};
    if (window % 2 == 0) throw EcgError(ErrorKind::ParameterError, "median window must be odd");
    const int n = static_cast<int>(x.size());
    const int radius = window / 2;
    std::vector<double> out(n);
    std::vector<double> buf(window);
    for (int i = 0; i < n; ++i) {
        for (int j = -radius; j <= radius; ++j) buf[j + radius] = x[reflect_index(i + j, n)];
        std::nth_element(buf.begin(), buf.begin() + radius, buf.end());
        out[i] = buf[radius];
    }
    return out;
}

std::vector<double> savitzky_golay(std::span<const double> x, int window, int order) {
    if (window % 2 == 0 || window < 3)
        throw EcgError(ErrorKind::ParameterError, "savitzky-golay window must be odd and >= 3");
    if (order < 0 || order >= window)
        throw EcgError(ErrorKind::ParameterError, "savitzky-golay order must be < window");

    // Least-squares smoothing coefficients: h = (A^T A)^-1 A^T row 0,
    // with A the Vandermonde matrix over offsets -m..m.
    const int m = window / 2;
    const int p = order + 1;
    std::vector<std::vector<double>> ata(p, std::vector<double>(p, 0.0));
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            for (int t = -m; t <= m; ++t)
                ata[i][j] += std::pow(static_cast<double>(t), i + j);

    // Solve ata * c = e0 by Gaussian elimination with partial pivoting.
    std::vector<double> rhs(p, 0.0);
    rhs[0] = 1.0;
    for (int col = 0; col < p; ++col) {
        int piv = col;
        for (int r = col + 1; r < p; ++r)
            if (std::abs(ata[r][col]) > std::abs(ata[piv][col])) piv = r;
        std::swap(ata[col], ata[piv]);
        std::swap(rhs[col], rhs[piv]);
        if (std::abs(ata[col][col]) < 1e-12)
            throw EcgError(ErrorKind::ParameterError, "singular savitzky-golay system");
        for (int r = 0; r < p; ++r) {
            if (r == col) continue;
            const double f = ata[r][col] / ata[col][col];
            for (int c = col; c < p; ++c) ata[r][c] -= f * ata[col][c];
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> c(p);
    for (int i = 0; i < p; ++i) c[i] = rhs[i] / ata[i][i];

    std::vector<double> kernel(window);
    for (int t = -m; t <= m; ++t) {
        double v = 0.0;
        for (int i = 0; i < p; ++i) v += c[i] * std::pow(static_cast<double>(t), i);
        kernel[t + m] = v;
    }

    const int n = static_cast<int>(x.size());
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int t = -m; t <= m; ++t) acc += kernel[t + m] * x[reflect_index(i + t, n)];
        out[i] = acc;
    }
    return out;
}

std::vector<double> resample_linear(std::span<const double> x, double rate_in, double rate_out) {
    if (rate_in <= 0 || rate_out <= 0)
        throw EcgError(ErrorKind::ParameterError, "sample rates must be positive");
    if (x.empty()) return {};
    const int n_in = static_cast<int>(x.size());
    const int n_out = std::max(1, static_cast<int>(std::llround(n_in * rate_out / rate_in)));
    std::vector<double> out(n_out);
    const double step = rate_in / rate_out;
    for (int i = 0; i < n_out; ++i) {
        const double pos = i * step;
        const int lo = static_cast<int>(pos);
        if (lo + 1 >= n_in) {
            out[i] = x[n_in - 1];
        } else {
            const double f = pos - lo;
            out[i] = x[lo] * (1.0 - f) + x[lo + 1] * f;
        }
    }
    return out;
}

void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw EcgError(ErrorKind::ParameterError, "fft size must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& v : a) v /= static_cast<double>(n);
}

double PowerSpectrum::band(double f_lo, double f_hi) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < power.size(); ++k) {
        const double f = k * bin_hz;
        if (f >= f_lo && f < f_hi) acc += power[k];
    }
    return acc;
}

double PowerSpectrum::total() const { return std::accumulate(power.begin(), power.end(), 0.0); }

PowerSpectrum power_spectrum(std::span<const double> x, double fs) {
    if (x.size() < 4) throw EcgError(ErrorKind::InsufficientSignal, "spectrum needs >= 4 samples");
    std::size_t n_fft = 1;
    while (n_fft < x.size()) n_fft <<= 1;

    std::vector<std::complex<double>> buf(n_fft, {0.0, 0.0});
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (n - 1)); // Hann
        buf[i] = {x[i] * w, 0.0};
    }
    fft_radix2(buf);

    PowerSpectrum ps;
    ps.bin_hz = fs / static_cast<double>(n_fft);
    ps.power.resize(n_fft / 2 + 1);
    for (std::size_t k = 0; k < ps.power.size(); ++k) ps.power[k] = std::norm(buf[k]);
    return ps;
}

} // namespace ecgqa::dsp
