#include "ecgqa/fidelity.hpp"

#include "ecgqa/error.hpp"
#include "ecgqa/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace ecgqa {

double dtw_distance(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty())
        throw EcgError(ErrorKind::InsufficientSignal, "dtw needs non-empty series");
    const std::size_t n = a.size(), m = b.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= m; ++j) {
            const double cost = std::abs(a[i - 1] - b[j - 1]);
            cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

namespace {

double pearson_or_zero_var_throw(std::span<const double> a, std::span<const double> b) {
    return stats::pearson(a, b);
}

double ssim_1d(std::span<const double> a, std::span<const double> b) {
    const int n = static_cast<int>(a.size());
    const int window = 11, radius = window / 2;
    const double sigma = 1.5;

    std::vector<double> kernel(window);
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i / sigma) * (i / sigma));
        ksum += kernel[i + radius];
    }
    for (double& k : kernel) k /= ksum;

    double lo = a[0], hi = a[0];
    for (double v : a) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : b) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = std::max(hi - lo, 1e-12);
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);

    auto reflect = [&](int i) {
        if (n == 1) return 0;
        const int period = 2 * (n - 1);
        i = ((i % period) + period) % period;
        return i < n ? i : period - i;
    };

    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double ma = 0, mb = 0;
        for (int j = -radius; j <= radius; ++j) {
            const int k = reflect(i + j);
            ma += kernel[j + radius] * a[k];
            mb += kernel[j + radius] * b[k];
        }
        double va = 0, vb = 0, cov = 0;
        for (int j = -radius; j <= radius; ++j) {
            const int k = reflect(i + j);
            va += kernel[j + radius] * (a[k] - ma) * (a[k] - ma);
            vb += kernel[j + radius] * (b[k] - mb) * (b[k] - mb);
            cov += kernel[j + radius] * (a[k] - ma) * (b[k] - mb);
        }
        acc += ((2 * ma * mb + c1) * (2 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return acc / n;
}

} // namespace

FidelityMetrics compute_fidelity(std::span<const double> extracted,
                                 std::span<const double> reference, double rate) {
    if (rate <= 0) throw EcgError(ErrorKind::ParameterError, "rate must be positive");
    if (static_cast<double>(extracted.size()) / rate < 2.0 ||
        static_cast<double>(reference.size()) / rate < 2.0)
        throw EcgError(ErrorKind::InsufficientSignal, "fidelity needs >= 2 s per series");
    if (stats::variance(extracted) <= 0.0 || stats::variance(reference) <= 0.0)
        throw EcgError(ErrorKind::UndefinedCorrelation, "zero-variance input");

    // Cross-correlation alignment within +-0.5 s. Positive lag means the
    // extracted series is delayed relative to the reference.
    const int max_lag = static_cast<int>(std::lround(0.5 * rate));
    const int min_overlap = static_cast<int>(std::lround(1.0 * rate));
    int best_lag = 0;
    double best_abs = -1.0;
    for (int lag = -max_lag; lag <= max_lag; ++lag) {
        const int e0 = std::max(0, lag);
        const int r0 = std::max(0, -lag);
        const int overlap = std::min(static_cast<int>(extracted.size()) - e0,
                                     static_cast<int>(reference.size()) - r0);
        if (overlap < min_overlap) continue;
        try {
            const double c = pearson_or_zero_var_throw(
                extracted.subspan(e0, overlap), reference.subspan(r0, overlap));
            if (std::abs(c) > best_abs) {
                best_abs = std::abs(c);
                best_lag = lag;
            }
        } catch (const EcgError&) {
        }
    }
    if (best_abs < 0.0)
        throw EcgError(ErrorKind::UndefinedCorrelation, "no usable alignment overlap");

    const int e0 = std::max(0, best_lag);
    const int r0 = std::max(0, -best_lag);
    const int overlap = std::min(static_cast<int>(extracted.size()) - e0,
                                 static_cast<int>(reference.size()) - r0);
    const auto ext = extracted.subspan(e0, overlap);
    const auto ref = reference.subspan(r0, overlap);

    FidelityMetrics fm;
    fm.alignment_lag = best_lag / rate;
    fm.pcc = stats::pearson(ext, ref);

    double se = 0.0, ref_power = 0.0;
    for (int i = 0; i < overlap; ++i) {
        const double d = ref[i] - ext[i];
        se += d * d;
        ref_power += ref[i] * ref[i];
    }
    fm.rmse = std::sqrt(se / overlap);
    fm.snr = 10.0 * std::log10(std::max(ref_power, 1e-30) / std::max(se, 1e-30));
    fm.dtw = dtw_distance(ext, ref);
    fm.ssim = ssim_1d(ext, ref);
    return fm;
}

} // namespace ecgqa
