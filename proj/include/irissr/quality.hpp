#pragma once

// Full-reference quality metrics: PSNR, SSIM and FSIM, on the whole image
// and on the rubber-sheet unwrapped iris band.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "irissr/dataset.hpp"
#include "irissr/error.hpp"
#include "irissr/fft.hpp"
#include "irissr/iriscode.hpp"
#include "irissr/raster.hpp"

namespace irissr {

/// PSNR value printed in tables for identical images.
inline constexpr double kPsnrTableCap = 99.0;

namespace detail {

inline void check_pair(const Image& a, const Image& b, const char* op) {
    require(a.same_dims(b), ErrorKind::DimensionMismatch,
            std::string(op) + ": image sizes differ (" + dims_string(a) + " vs " + dims_string(b) + ")");
}

} // namespace detail

/// Peak 1.0. Identical images give +infinity.
inline double psnr(const Image& ref, const Image& test) {
    detail::check_pair(ref, test, "psnr");
    double sse = 0.0;
    const auto a = ref.pixels();
    const auto b = test.pixels();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sse += d * d;
    }
    if (sse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(static_cast<double>(a.size()) / sse);
}

inline double psnr_for_table(double v) { return std::isinf(v) ? kPsnrTableCap : v; }

struct SsimConfig {
    int window = 8;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Mean SSIM over all window positions (stride 1, uniform weights,
/// population statistics).
inline double ssim(const Image& ref, const Image& test, const SsimConfig& cfg = {}) {
    detail::check_pair(ref, test, "ssim");
    const int w = cfg.window;
    require(w >= 1, ErrorKind::InvalidArgument, "ssim: window must be positive");
    require(ref.width() >= w && ref.height() >= w, ErrorKind::InvalidArgument,
            "ssim: image " + dims_string(ref) + " smaller than the " + std::to_string(w) + "x" + std::to_string(w) + " window");
    const double c1 = cfg.k1 * cfg.k1;
    const double c2 = cfg.k2 * cfg.k2;
    const double n = static_cast<double>(w) * w;
    double total = 0.0;
    for (int y0 = 0; y0 + w <= ref.height(); ++y0)
        for (int x0 = 0; x0 + w <= ref.width(); ++x0) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (int y = y0; y < y0 + w; ++y)
                for (int x = x0; x < x0 + w; ++x) {
                    const double a = ref(x, y);
                    const double b = test(x, y);
                    sa += a;
                    sb += b;
                    saa += a * a;
                    sbb += b * b;
                    sab += a * b;
                }
            const double ma = sa / n;
            const double mb = sb / n;
            const double va = saa / n - ma * ma;
            const double vb = sbb / n - mb * mb;
            const double cov = sab / n - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    const int count = (ref.width() - w + 1) * (ref.height() - w + 1);
    return total / count;
}

// ---------------------------------------------------------------------------
// FSIM

struct PhaseCongruencyConfig {
    int nscale = 4;
    int norient = 4;
    double min_wavelength = 6.0;
    double mult = 2.0;
    double sigma_on_f = 0.55;
    double d_theta_on_sigma = 1.2;
    double k = 2.0;
    double epsilon = 1e-4;
};

/// Row-major real map.
struct Map2d {
    int width = 0;
    int height = 0;
    std::vector<double> v;

    double& operator()(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
    double operator()(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

// Frequency coordinate of FFT bin j on an n-point axis, in cycles per sample
// normalized the way the reference filter construction does (odd lengths
// divide by n - 1).
inline double freq_coord(int j, int n) {
    const int k = j < (n + 1) / 2 ? j : j - n;
    return n % 2 ? static_cast<double>(k) / (n - 1) : static_cast<double>(k) / n;
}

inline double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    const std::size_t mid = n / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (n % 2) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Phase congruency of `values` (any intensity scale; FSIM passes 0..255).
inline Map2d phase_congruency(const Map2d& img, const PhaseCongruencyConfig& cfg = {}) {
    const int rows = img.height;
    const int cols = img.width;
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    const double theta_sigma = std::numbers::pi / cfg.norient / cfg.d_theta_on_sigma;

    std::vector<double> radius(n), sin_t(n), cos_t(n), lowpass(n);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double fx = detail::freq_coord(c, cols);
            const double fy = detail::freq_coord(r, rows);
            const std::size_t i = static_cast<std::size_t>(r) * cols + c;
            const double rad = std::sqrt(fx * fx + fy * fy);
            lowpass[i] = 1.0 / (1.0 + std::pow(rad / 0.45, 2 * 15));
            radius[i] = (r == 0 && c == 0) ? 1.0 : rad;
            const double th = std::atan2(-fy, fx);
            sin_t[i] = std::sin(th);
            cos_t[i] = std::cos(th);
        }

    std::vector<std::vector<double>> log_gabor(static_cast<std::size_t>(cfg.nscale), std::vector<double>(n));
    const double lg_denom = 2.0 * std::pow(std::log(cfg.sigma_on_f), 2);
    for (int s = 0; s < cfg.nscale; ++s) {
        const double fo = 1.0 / (cfg.min_wavelength * std::pow(cfg.mult, s));
        auto& g = log_gabor[static_cast<std::size_t>(s)];
        for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(-std::pow(std::log(radius[i] / fo), 2) / lg_denom) * lowpass[i];
        g[0] = 0.0;
    }

    detail::FftPlan fft(rows, cols);
    std::vector<std::complex<double>> spectrum(n);
    for (std::size_t i = 0; i < n; ++i) fft.data()[i] = img.v[i];
    fft.forward();
    std::copy(fft.data(), fft.data() + n, spectrum.begin());

    std::vector<double> energy_all(n, 0.0), an_all(n, 0.0);
    std::vector<double> filter(n), sum_e(n), sum_o(n), sum_an(n), energy(n);
    std::vector<std::vector<std::complex<double>>> eo(static_cast<std::size_t>(cfg.nscale), std::vector<std::complex<double>>(n));
    std::vector<std::vector<double>> ifft_filter(static_cast<std::size_t>(cfg.nscale), std::vector<double>(n));
    const double sqrt_n = std::sqrt(static_cast<double>(n));

    for (int o = 0; o < cfg.norient; ++o) {
        const double angl = o * std::numbers::pi / cfg.norient;
        const double ca = std::cos(angl);
        const double sa = std::sin(angl);
        std::fill(sum_e.begin(), sum_e.end(), 0.0);
        std::fill(sum_o.begin(), sum_o.end(), 0.0);
        std::fill(sum_an.begin(), sum_an.end(), 0.0);
        std::fill(energy.begin(), energy.end(), 0.0);
        double em_n = 0.0;
        for (int s = 0; s < cfg.nscale; ++s) {
            const auto& g = log_gabor[static_cast<std::size_t>(s)];
            for (std::size_t i = 0; i < n; ++i) {
                const double ds = sin_t[i] * ca - cos_t[i] * sa;
                const double dc = cos_t[i] * ca + sin_t[i] * sa;
                const double dtheta = std::abs(std::atan2(ds, dc));
                filter[i] = g[i] * std::exp(-dtheta * dtheta / (2 * theta_sigma * theta_sigma));
            }
            // Spatial-domain filter, used for the noise energy estimate.
            for (std::size_t i = 0; i < n; ++i) fft.data()[i] = filter[i];
            fft.backward();
            auto& spatial = ifft_filter[static_cast<std::size_t>(s)];
            for (std::size_t i = 0; i < n; ++i) spatial[i] = fft.data()[i].real() * sqrt_n;

            for (std::size_t i = 0; i < n; ++i) fft.data()[i] = spectrum[i] * filter[i];
            fft.backward();
            auto& e = eo[static_cast<std::size_t>(s)];
            std::copy(fft.data(), fft.data() + n, e.begin());
            for (std::size_t i = 0; i < n; ++i) {
                sum_an[i] += std::abs(e[i]);
                sum_e[i] += e[i].real();
                sum_o[i] += e[i].imag();
            }
            if (s == 0)
                for (std::size_t i = 0; i < n; ++i) em_n += filter[i] * filter[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double xe = std::sqrt(sum_e[i] * sum_e[i] + sum_o[i] * sum_o[i]) + cfg.epsilon;
            const double me = sum_e[i] / xe;
            const double mo = sum_o[i] / xe;
            for (int s = 0; s < cfg.nscale; ++s) {
                const auto z = eo[static_cast<std::size_t>(s)][i];
                energy[i] += z.real() * me + z.imag() * mo - std::abs(z.real() * mo - z.imag() * me);
            }
        }

        // Noise threshold from the smallest-scale response amplitude.
        std::vector<double> e2(n);
        for (std::size_t i = 0; i < n; ++i) e2[i] = std::norm(eo[0][i]);
        const double mean_e2n = -detail::median_of(std::move(e2)) / std::log(0.5);
        const double noise_power = em_n > 0.0 ? mean_e2n / em_n : 0.0;
        double sum_an2 = 0.0;
        double sum_aiaj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (int si = 0; si < cfg.nscale; ++si) {
                const double fi = ifft_filter[static_cast<std::size_t>(si)][i];
                sum_an2 += fi * fi;
                for (int sj = si + 1; sj < cfg.nscale; ++sj) sum_aiaj += fi * ifft_filter[static_cast<std::size_t>(sj)][i];
            }
        }
        const double noise_energy2 = 2 * noise_power * sum_an2 + 4 * noise_power * sum_aiaj;
        const double tau = std::sqrt(std::max(0.0, noise_energy2 / 2));
        const double noise_mean = tau * std::sqrt(std::numbers::pi / 2);
        const double noise_sigma = std::sqrt((2 - std::numbers::pi / 2) * tau * tau);
        const double threshold = (noise_mean + cfg.k * noise_sigma) / 1.7;
        for (std::size_t i = 0; i < n; ++i) {
            energy_all[i] += std::max(energy[i] - threshold, 0.0);
            an_all[i] += sum_an[i];
        }
    }

    Map2d pc{cols, rows, std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) pc.v[i] = an_all[i] > 0.0 ? energy_all[i] / an_all[i] : 0.0;
    return pc;
}

/// Scharr gradient magnitude (kernel / 16), zero padding outside the map.
inline Map2d gradient_magnitude(const Map2d& img) {
    Map2d g{img.width, img.height, std::vector<double>(img.v.size())};
    auto at = [&](int x, int y) {
        return (x < 0 || y < 0 || x >= img.width || y >= img.height) ? 0.0 : img(x, y);
    };
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double gx = (3 * (at(x + 1, y - 1) - at(x - 1, y - 1)) + 10 * (at(x + 1, y) - at(x - 1, y)) +
                               3 * (at(x + 1, y + 1) - at(x - 1, y + 1))) / 16.0;
            const double gy = (3 * (at(x - 1, y + 1) - at(x - 1, y - 1)) + 10 * (at(x, y + 1) - at(x, y - 1)) +
                               3 * (at(x + 1, y + 1) - at(x + 1, y - 1))) / 16.0;
            g(x, y) = std::sqrt(gx * gx + gy * gy);
        }
    return g;
}

struct FsimConfig {
    double t1 = 0.85;
    double t2 = 160.0 / (255.0 * 255.0); // gradients on the [0,1] scale
    PhaseCongruencyConfig pc;
};

/// Images entering the FSIM maps: box-averaged and subsampled by
/// F = max(1, round(min(w, h) / 256)).
inline Map2d fsim_input(const Image& img) {
    const int f = std::max(1, static_cast<int>(std::lround(std::min(img.width(), img.height()) / 256.0)));
    if (f == 1) return {img.width(), img.height(), std::vector<double>(img.pixels().begin(), img.pixels().end())};
    const int off = f / 2;
    const int ow = (img.width() + f - 1) / f;
    const int oh = (img.height() + f - 1) / f;
    Map2d out{ow, oh, std::vector<double>(static_cast<std::size_t>(ow) * oh)};
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
            double s = 0.0;
            for (int y = oy * f + off - f + 1; y <= oy * f + off; ++y)
                for (int x = ox * f + off - f + 1; x <= ox * f + off; ++x)
                    if (x >= 0 && y >= 0 && x < img.width() && y < img.height()) s += img(x, y);
            out(ox, oy) = s / (f * f);
        }
    return out;
}

struct FsimMaps {
    Map2d pc1, pc2, g1, g2;
};

inline FsimMaps fsim_maps(const Image& ref, const Image& test, const FsimConfig& cfg = {}) {
    detail::check_pair(ref, test, "fsim");
    const Map2d a = fsim_input(ref);
    const Map2d b = fsim_input(test);
    auto scaled = [](Map2d m) {
        for (double& v : m.v) v *= 255.0;
        return m;
    };
    return {phase_congruency(scaled(a), cfg.pc), phase_congruency(scaled(b), cfg.pc), gradient_magnitude(a),
            gradient_magnitude(b)};
}

/// Pooling step of FSIM given precomputed maps. `equal` decides the
/// featureless case.
inline double fsim_from_maps(const FsimMaps& m, bool equal, const FsimConfig& cfg = {}) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < m.pc1.v.size(); ++i) {
        const double p1 = m.pc1.v[i];
        const double p2 = m.pc2.v[i];
        const double g1 = m.g1.v[i];
        const double g2 = m.g2.v[i];
        const double s_pc = (2 * p1 * p2 + cfg.t1) / (p1 * p1 + p2 * p2 + cfg.t1);
        const double s_g = (2 * g1 * g2 + cfg.t2) / (g1 * g1 + g2 * g2 + cfg.t2);
        const double pcm = std::max(p1, p2);
        num += s_pc * s_g * pcm;
        den += pcm;
    }
    if (den < 1e-12) return equal ? 1.0 : 0.0;
    return num / den;
}

inline bool nearly_equal(const Image& a, const Image& b, double tol = 1e-9) {
    const auto pa = a.pixels();
    const auto pb = b.pixels();
    for (std::size_t i = 0; i < pa.size(); ++i)
        if (std::abs(pa[i] - pb[i]) > tol) return false;
    return true;
}

inline double fsim(const Image& ref, const Image& test, const FsimConfig& cfg = {}) {
    detail::check_pair(ref, test, "fsim");
    require(ref.width() >= 3 && ref.height() >= 3, ErrorKind::InvalidArgument,
            "fsim: image " + dims_string(ref) + " smaller than 3x3");
    return fsim_from_maps(fsim_maps(ref, test, cfg), nearly_equal(ref, test), cfg);
}

// ---------------------------------------------------------------------------
// Reports

enum class Region { Full, Iris };

inline const char* region_name(Region r) { return r == Region::Full ? "full" : "iris"; }

struct QualityReport {
    Region region = Region::Full;
    double psnr = 0.0;
    double ssim = 0.0;
    double fsim = std::numeric_limits<double>::quiet_NaN(); // NaN when not computed
};

inline QualityReport quality_report(const Image& ref, const Image& test, Region region, bool with_fsim) {
    QualityReport r;
    r.region = region;
    r.psnr = psnr(ref, test);
    r.ssim = ssim(ref, test);
    if (with_fsim) r.fsim = fsim(ref, test);
    return r;
}

struct RegionReports {
    QualityReport full;
    QualityReport iris;
};

/// Full-image metrics on the raw pair, iris metrics on the unwrapped bands.
inline RegionReports region_report(const Image& ref, const Image& test, const IrisAnnotation& ann,
                                   const IrisCodeConfig& iris = {}, bool with_fsim = false) {
    detail::check_pair(ref, test, "region_report");
    const auto ur = unwrap(ref, ann, iris.radial, iris.angular);
    const auto ut = unwrap(test, ann, iris.radial, iris.angular);
    return {quality_report(ref, test, Region::Full, with_fsim),
            quality_report(ur.values, ut.values, Region::Iris, with_fsim)};
}

} // namespace irissr
