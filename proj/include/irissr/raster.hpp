#pragma once

// Grayscale rasters and the resampling / blur operators used by the
// degradation model (blur B, downsample D) and by back-projection (U).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "irissr/error.hpp"

namespace irissr {

/// Row-major grayscale image. Intensities are nominally in [0,1]; operators
/// that may leave that range (signed residuals inside back-projection) say so.
class Image {
public:
    Image() = default;

    Image(int width, int height, double fill = 0.0) : w_(width), h_(height) {
        require(width >= 1 && height >= 1, ErrorKind::InvalidArgument,
                "image dimensions must be >= 1, got " + std::to_string(width) + "x" +
                    std::to_string(height));
        px_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    Image(int width, int height, std::vector<double> pixels) : Image(width, height) {
        require(pixels.size() == px_.size(), ErrorKind::DimensionMismatch,
                "pixel count does not match " + std::to_string(width) + "x" +
                    std::to_string(height));
        px_ = std::move(pixels);
    }

    int width() const noexcept { return w_; }
    int height() const noexcept { return h_; }
    std::size_t size() const noexcept { return px_.size(); }
    bool empty() const noexcept { return px_.empty(); }

    double operator()(int x, int y) const noexcept { return px_[index(x, y)]; }
    double& operator()(int x, int y) noexcept { return px_[index(x, y)]; }

    // Border-replicating access.
    double clamped(int x, int y) const noexcept {
        return (*this)(std::clamp(x, 0, w_ - 1), std::clamp(y, 0, h_ - 1));
    }

    std::span<const double> pixels() const noexcept { return px_; }
    std::span<double> pixels() noexcept { return px_; }

    bool same_dims(const Image& o) const noexcept { return w_ == o.w_ && h_ == o.h_; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(w_) +
               static_cast<std::size_t>(x);
    }

    int w_ = 0;
    int h_ = 0;
    std::vector<double> px_;
};

inline std::string dims_string(const Image& img) {
    return std::to_string(img.width()) + "x" + std::to_string(img.height());
}

inline Image clamp01(Image img) {
    for (double& v : img.pixels()) v = std::clamp(v, 0.0, 1.0);
    return img;
}

inline double mean_abs_diff(const Image& a, const Image& b) {
    require(a.same_dims(b), ErrorKind::DimensionMismatch,
            "mean_abs_diff: " + dims_string(a) + " vs " + dims_string(b));
    double acc = 0.0;
    const auto pa = a.pixels();
    const auto pb = b.pixels();
    for (std::size_t i = 0; i < pa.size(); ++i) acc += std::abs(pa[i] - pb[i]);
    return acc / static_cast<double>(pa.size());
}

/// Normalized, symmetric 1-D Gaussian, truncated at ceil(3 sigma).
class BlurKernel {
public:
    explicit BlurKernel(double sigma) : sigma_(sigma) {
        require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::InvalidArgument,
                "blur sigma must be > 0");
        radius_ = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
        taps_.resize(static_cast<std::size_t>(2 * radius_ + 1));
        double sum = 0.0;
        for (int i = -radius_; i <= radius_; ++i) {
            const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
            taps_[static_cast<std::size_t>(i + radius_)] = v;
            sum += v;
        }
        for (double& t : taps_) t /= sum;
    }

    double sigma() const noexcept { return sigma_; }
    int radius() const noexcept { return radius_; }
    std::span<const double> taps() const noexcept { return taps_; }
    double tap(int offset) const noexcept {
        return taps_[static_cast<std::size_t>(offset + radius_)];
    }

private:
    double sigma_;
    int radius_ = 1;
    std::vector<double> taps_;
};

namespace detail {

inline void check_target(int out_w, int out_h, const char* op) {
    require(out_w >= 1 && out_h >= 1, ErrorKind::InvalidArgument,
            std::string(op) + ": target dimensions must be >= 1, got " +
                std::to_string(out_w) + "x" + std::to_string(out_h));
}

// Pixel-center alignment: output sample i sits at source coordinate
// (i + 0.5) * in / out - 0.5.
inline double source_coord(int i, int in, int out) {
    return (i + 0.5) * (static_cast<double>(in) / out) - 0.5;
}

// Cubic convolution kernel, a = -0.5 (Catmull-Rom).
inline double cubic_weight(double x) {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

struct Taps1d {
    std::vector<int> first;      // leftmost source index (unclamped)
    std::vector<double> weights; // `width` weights per output sample
    int width = 0;
};

inline Taps1d bicubic_taps(int in, int out) {
    Taps1d t;
    t.width = 4;
    t.first.resize(static_cast<std::size_t>(out));
    t.weights.resize(static_cast<std::size_t>(out) * 4);
    for (int i = 0; i < out; ++i) {
        const double s = source_coord(i, in, out);
        const int base = static_cast<int>(std::floor(s));
        const double f = s - base;
        t.first[static_cast<std::size_t>(i)] = base - 1;
        double* w = &t.weights[static_cast<std::size_t>(i) * 4];
        w[0] = cubic_weight(1.0 + f);
        w[1] = cubic_weight(f);
        w[2] = cubic_weight(1.0 - f);
        w[3] = cubic_weight(2.0 - f);
    }
    return t;
}

inline Taps1d bilinear_taps(int in, int out) {
    Taps1d t;
    t.width = 2;
    t.first.resize(static_cast<std::size_t>(out));
    t.weights.resize(static_cast<std::size_t>(out) * 2);
    for (int i = 0; i < out; ++i) {
        const double s = source_coord(i, in, out);
        const int base = static_cast<int>(std::floor(s));
        const double f = s - base;
        t.first[static_cast<std::size_t>(i)] = base;
        t.weights[static_cast<std::size_t>(i) * 2] = 1.0 - f;
        t.weights[static_cast<std::size_t>(i) * 2 + 1] = f;
    }
    return t;
}

// Separable resampling with border replication; no clamping of the result.
inline Image resample(const Image& img, int out_w, int out_h, const Taps1d& tx,
                      const Taps1d& ty) {
    const int in_w = img.width();
    const int in_h = img.height();
    Image mid(out_w, in_h);
    for (int y = 0; y < in_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const int f = tx.first[static_cast<std::size_t>(x)];
            const double* w = &tx.weights[static_cast<std::size_t>(x) * tx.width];
            double acc = 0.0;
            for (int k = 0; k < tx.width; ++k)
                acc += w[k] * img(std::clamp(f + k, 0, in_w - 1), y);
            mid(x, y) = acc;
        }
    }
    Image out(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        const int f = ty.first[static_cast<std::size_t>(y)];
        const double* w = &ty.weights[static_cast<std::size_t>(y) * ty.width];
        for (int x = 0; x < out_w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < ty.width; ++k)
                acc += w[k] * mid(x, std::clamp(f + k, 0, in_h - 1));
            out(x, y) = acc;
        }
    }
    return out;
}

/// Bicubic resampling without the final clamp. Linear in the input, so it is
/// also valid for signed fields such as back-projection residuals.
inline Image resample_bicubic(const Image& img, int out_w, int out_h) {
    check_target(out_w, out_h, "resize_bicubic");
    if (out_w == img.width() && out_h == img.height()) return img;
    return resample(img, out_w, out_h, bicubic_taps(img.width(), out_w),
                    bicubic_taps(img.height(), out_h));
}

/// Separable Gaussian blur, border replicated, no clamping.
inline Image convolve_separable(const Image& img, const BlurKernel& k) {
    const int w = img.width();
    const int h = img.height();
    const int r = k.radius();
    Image mid(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k.tap(i) * img(std::clamp(x + i, 0, w - 1), y);
            mid(x, y) = acc;
        }
    Image out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k.tap(i) * mid(x, std::clamp(y + i, 0, h - 1));
            out(x, y) = acc;
        }
    return out;
}

// Blur (replicated border) followed by bicubic resampling, folded into one
// set of per-output taps over the source axis.
inline Taps1d blurred_bicubic_taps(int in, int out, const BlurKernel& k) {
    const Taps1d cubic = bicubic_taps(in, out);
    const int r = k.radius();
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(out));
    std::vector<int> lo(static_cast<std::size_t>(out));
    int width = 1;
    for (int j = 0; j < out; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        const int f = cubic.first[jj];
        const int a = std::clamp(std::clamp(f, 0, in - 1) - r, 0, in - 1);
        const int b = std::clamp(std::clamp(f + 3, 0, in - 1) + r, 0, in - 1);
        lo[jj] = a;
        rows[jj].assign(static_cast<std::size_t>(b - a + 1), 0.0);
        for (int c = 0; c < 4; ++c) {
            const double wc = cubic.weights[jj * 4 + static_cast<std::size_t>(c)];
            const int centre = std::clamp(f + c, 0, in - 1);
            for (int t = -r; t <= r; ++t)
                rows[jj][static_cast<std::size_t>(std::clamp(centre + t, 0, in - 1) - a)] +=
                    wc * k.tap(t);
        }
        width = std::max(width, b - a + 1);
    }
    Taps1d taps;
    taps.width = width;
    taps.first = lo;
    taps.weights.assign(static_cast<std::size_t>(out) * width, 0.0);
    for (int j = 0; j < out; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        // Rows near the far border are shifted left so the window stays in range.
        const int shift = std::max(0, lo[jj] + width - in);
        taps.first[jj] = lo[jj] - shift;
        for (std::size_t i = 0; i < rows[jj].size(); ++i)
            taps.weights[jj * width + i + static_cast<std::size_t>(shift)] = rows[jj][i];
    }
    return taps;
}

/// D(B(img)) without clamping; sigma == 0 skips the blur.
inline Image degrade_linear(const Image& img, int out_w, int out_h, double sigma) {
    require(sigma >= 0.0, ErrorKind::InvalidArgument, "degrade: sigma must be >= 0");
    if (sigma == 0.0) return resample_bicubic(img, out_w, out_h);
    check_target(out_w, out_h, "degrade");
    const BlurKernel k(sigma);
    return resample(img, out_w, out_h, blurred_bicubic_taps(img.width(), out_w, k),
                    blurred_bicubic_taps(img.height(), out_h, k));
}

} // namespace detail

inline Image resize_bilinear(const Image& img, int out_w, int out_h) {
    detail::check_target(out_w, out_h, "resize_bilinear");
    if (out_w == img.width() && out_h == img.height()) return img;
    return detail::resample(img, out_w, out_h, detail::bilinear_taps(img.width(), out_w),
                            detail::bilinear_taps(img.height(), out_h));
}

/// Catmull-Rom resize; results clamped to [0,1] since the kernel overshoots.
inline Image resize_bicubic(const Image& img, int out_w, int out_h) {
    return clamp01(detail::resample_bicubic(img, out_w, out_h));
}

inline Image gaussian_blur(const Image& img, double sigma) {
    return detail::convolve_separable(img, BlurKernel(sigma));
}

/// Degradation D(B(img)): Gaussian blur followed by bicubic downsampling.
/// sigma == 0 disables the blur.
inline Image degrade(const Image& img, int out_w, int out_h, double sigma) {
    detail::check_target(out_w, out_h, "degrade");
    require(out_w <= img.width() && out_h <= img.height(), ErrorKind::InvalidArgument,
            "degrade: target " + std::to_string(out_w) + "x" + std::to_string(out_h) +
                " larger than source " + dims_string(img));
    return clamp01(detail::degrade_linear(img, out_w, out_h, sigma));
}

/// The up-sampling operator U: bicubic enlargement.
inline Image upsample(const Image& img, int out_w, int out_h) {
    detail::check_target(out_w, out_h, "upsample");
    require(out_w >= img.width() && out_h >= img.height(), ErrorKind::InvalidArgument,
            "upsample: target " + std::to_string(out_w) + "x" + std::to_string(out_h) +
                " smaller than source " + dims_string(img));
    return resize_bicubic(img, out_w, out_h);
}

/// Default anti-alias strength for a downsampling by `factor` (hr/lr).
inline double default_blur_sigma(double factor) { return 0.5 * factor; }

} // namespace irissr
