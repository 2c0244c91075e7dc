#pragma once

// Log-Gabor iris codes: rubber-sheet unwrapping on concentric pupil/iris
// circles, 1-D log-Gabor filtering along the angular direction, two-bit
// phase quantization and shifted normalized Hamming distance.

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "irissr/dataset.hpp"
#include "irissr/error.hpp"
#include "irissr/fft.hpp"
#include "irissr/raster.hpp"

namespace irissr {

struct IrisCodeConfig {
    int radial = 20;
    int angular = 240;
    double wavelength = 18.0;
    double sigma_ratio = 0.5;
    int max_shift = 8;
    double amplitude_floor = 1e-4;

    void validate() const {
        require(radial >= 1 && radial <= 32, ErrorKind::InvalidArgument, "iriscode: radial resolution must be in [1, 32]");
        require(angular >= 8, ErrorKind::InvalidArgument, "iriscode: angular resolution must be >= 8");
        require(wavelength >= 2.0, ErrorKind::InvalidArgument, "iriscode: wavelength must be >= 2");
        require(sigma_ratio > 0.0 && sigma_ratio < 1.0, ErrorKind::InvalidArgument,
                "iriscode: sigma_ratio must be in (0, 1)");
        require(max_shift >= 0 && max_shift < angular, ErrorKind::InvalidArgument,
                "iriscode: max_shift out of range");
    }
};

/// Polar raster: row i is radius index, column j is angle index.
struct NormalizedIris {
    Image values;
    std::vector<std::uint8_t> mask; // 1 = sampled inside the image

    int radial() const { return values.height(); }
    int angular() const { return values.width(); }
    bool valid(int j, int i) const { return mask[static_cast<std::size_t>(i) * angular() + j] != 0; }
};

namespace detail {

inline bool bilinear_at(const Image& img, double x, double y, double& out) {
    if (!(x >= 0.0 && y >= 0.0 && x <= img.width() - 1.0 && y <= img.height() - 1.0)) return false;
    const int x0 = std::min(static_cast<int>(x), img.width() - 1);
    const int y0 = std::min(static_cast<int>(y), img.height() - 1);
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = img(x0, y0) * (1 - fx) + img(x1, y0) * fx;
    const double bot = img(x0, y1) * (1 - fx) + img(x1, y1) * fx;
    out = top * (1 - fy) + bot * fy;
    return true;
}

} // namespace detail

/// Rubber-sheet unwrapping. Sample (i, j) lies at angle 2*pi*j/A and at
/// normalized radius (i + 0.5)/R between the pupil and iris circles.
inline NormalizedIris unwrap(const Image& img, const IrisAnnotation& ann, int radial = 20, int angular = 240) {
    require(radial >= 1 && angular >= 1, ErrorKind::InvalidArgument, "unwrap: resolution must be positive");
    require(ann.pupil_radius > 0.0 && ann.pupil_radius < ann.iris_radius, ErrorKind::InvalidArgument,
            "unwrap: degenerate annotation (pupil radius must be below iris radius)");
    NormalizedIris out{Image(angular, radial), std::vector<std::uint8_t>(static_cast<std::size_t>(radial) * angular, 0)};
    for (int j = 0; j < angular; ++j) {
        const double theta = 2.0 * std::numbers::pi * j / angular;
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        for (int i = 0; i < radial; ++i) {
            const double rho = (i + 0.5) / radial;
            const double r = ann.pupil_radius + rho * (ann.iris_radius - ann.pupil_radius);
            double v = 0.0;
            if (detail::bilinear_at(img, ann.pupil_center.x + r * c, ann.pupil_center.y + r * s, v)) {
                out.values(j, i) = v;
                out.mask[static_cast<std::size_t>(i) * angular + j] = 1;
            }
        }
    }
    return out;
}

/// Two bits per (row, angle) sample packed column-wise: for angle j, bit 2i
/// holds sign(Re) of row i and bit 2i+1 sign(Im).
struct IrisTemplate {
    int radial = 0;
    int angular = 0;
    std::vector<std::uint64_t> code;
    std::vector<std::uint64_t> mask;

    bool bit(int i, int j, int part) const { return (code[j] >> (2 * i + part)) & 1u; }
    bool usable(int i, int j, int part) const { return (mask[j] >> (2 * i + part)) & 1u; }
    std::size_t valid_bits() const {
        std::size_t n = 0;
        for (auto m : mask) n += static_cast<std::size_t>(std::popcount(m));
        return n;
    }
    bool operator==(const IrisTemplate&) const = default;
};

/// Frequency response of the 1-D log-Gabor filter over an n-point row.
/// Only non-negative frequencies pass, so the response is the analytic signal.
inline std::vector<double> log_gabor_response(int n, double wavelength, double sigma_ratio) {
    std::vector<double> g(static_cast<std::size_t>(n), 0.0);
    const double f0 = 1.0 / wavelength;
    const double denom = 2.0 * std::pow(std::log(sigma_ratio), 2);
    for (int k = 1; k <= n / 2; ++k) {
        const double f = static_cast<double>(k) / n;
        g[static_cast<std::size_t>(k)] = std::exp(-std::pow(std::log(f / f0), 2) / denom);
    }
    return g;
}

/// Filters each row; masked samples are replaced by the row's valid mean first.
inline std::vector<std::complex<double>> log_gabor_filter(const NormalizedIris& norm, double wavelength,
                                                          double sigma_ratio) {
    const int R = norm.radial();
    const int A = norm.angular();
    const auto g = log_gabor_response(A, wavelength, sigma_ratio);
    std::vector<std::complex<double>> out(static_cast<std::size_t>(R) * A);
    detail::FftPlan fft(1, A);
    for (int i = 0; i < R; ++i) {
        double sum = 0.0;
        int count = 0;
        for (int j = 0; j < A; ++j)
            if (norm.valid(j, i)) sum += norm.values(j, i), ++count;
        const double fill = count > 0 ? sum / count : 0.0;
        auto* d = fft.data();
        for (int j = 0; j < A; ++j) d[j] = norm.valid(j, i) ? norm.values(j, i) : fill;
        fft.forward();
        for (int j = 0; j < A; ++j) d[j] *= g[static_cast<std::size_t>(j)];
        fft.backward();
        std::copy(d, d + A, out.begin() + static_cast<std::ptrdiff_t>(i) * A);
    }
    return out;
}

inline IrisTemplate encode(const NormalizedIris& norm, const IrisCodeConfig& cfg = {}) {
    cfg.validate();
    require(norm.radial() == cfg.radial && norm.angular() == cfg.angular, ErrorKind::DimensionMismatch,
            "encode: normalized iris is " + std::to_string(norm.radial()) + "x" + std::to_string(norm.angular()) +
                ", configured " + std::to_string(cfg.radial) + "x" + std::to_string(cfg.angular));
    const int R = norm.radial();
    const int A = norm.angular();
    const auto resp = log_gabor_filter(norm, cfg.wavelength, cfg.sigma_ratio);
    IrisTemplate t{R, A, std::vector<std::uint64_t>(static_cast<std::size_t>(A), 0),
                   std::vector<std::uint64_t>(static_cast<std::size_t>(A), 0)};
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < A; ++j) {
            const auto z = resp[static_cast<std::size_t>(i) * A + j];
            const std::uint64_t re = z.real() >= 0.0;
            const std::uint64_t im = z.imag() >= 0.0;
            t.code[j] |= (re << (2 * i)) | (im << (2 * i + 1));
            if (norm.valid(j, i) && std::abs(z) >= cfg.amplitude_floor) t.mask[j] |= std::uint64_t{3} << (2 * i);
        }
    return t;
}

/// Minimum normalized Hamming distance over angular shifts in [-S, S].
/// Shift s compares column j of t1 with column (j - s) mod A of t2.
inline double hamming(const IrisTemplate& t1, const IrisTemplate& t2, int max_shift = 8) {
    require(t1.radial == t2.radial && t1.angular == t2.angular, ErrorKind::DimensionMismatch,
            "hamming: template dimensions differ");
    require(max_shift >= 0, ErrorKind::InvalidArgument, "hamming: max_shift must be >= 0");
    const int A = t1.angular;
    const int S = std::min(max_shift, A - 1);
    double best = std::numeric_limits<double>::infinity();
    for (int s = -S; s <= S; ++s) {
        std::size_t diff = 0;
        std::size_t total = 0;
        for (int j = 0; j < A; ++j) {
            const int k = ((j - s) % A + A) % A;
            const std::uint64_t m = t1.mask[j] & t2.mask[k];
            total += static_cast<std::size_t>(std::popcount(m));
            diff += static_cast<std::size_t>(std::popcount((t1.code[j] ^ t2.code[k]) & m));
        }
        if (total > 0) best = std::min(best, static_cast<double>(diff) / static_cast<double>(total));
    }
    require(std::isfinite(best), ErrorKind::Data, "hamming: no comparable bits at any shift");
    return best;
}

/// Circular column rotation: result column j is t column (j - k) mod A.
inline IrisTemplate rotate_columns(const IrisTemplate& t, int k) {
    IrisTemplate r = t;
    const int A = t.angular;
    for (int j = 0; j < A; ++j) {
        const int src = ((j - k) % A + A) % A;
        r.code[j] = t.code[src];
        r.mask[j] = t.mask[src];
    }
    return r;
}

// Template file: "IRSRTPL" magic, u32 version, u32 R, u32 A, then A code
// words and A mask words, all little-endian.
inline constexpr char kTemplateMagic[8] = {'I', 'R', 'S', 'R', 'T', 'P', 'L', '\0'};
inline constexpr std::uint32_t kTemplateVersion = 1;

namespace detail {

inline void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& s, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint64_t get_le(const std::string& s, std::size_t& pos, int bytes, const std::string& where) {
    require(pos + static_cast<std::size_t>(bytes) <= s.size(), ErrorKind::Parse, where + ": truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
    pos += static_cast<std::size_t>(bytes);
    return v;
}

} // namespace detail

inline std::string serialize_template(const IrisTemplate& t) {
    std::string s(kTemplateMagic, sizeof kTemplateMagic);
    detail::put_u32(s, kTemplateVersion);
    detail::put_u32(s, static_cast<std::uint32_t>(t.radial));
    detail::put_u32(s, static_cast<std::uint32_t>(t.angular));
    for (auto w : t.code) detail::put_u64(s, w);
    for (auto w : t.mask) detail::put_u64(s, w);
    return s;
}

inline IrisTemplate deserialize_template(const std::string& s, const std::string& where = "<template>") {
    require(s.size() >= sizeof kTemplateMagic && s.compare(0, sizeof kTemplateMagic, kTemplateMagic, sizeof kTemplateMagic) == 0,
            ErrorKind::Parse, where + ": not an iris template");
    std::size_t pos = sizeof kTemplateMagic;
    const auto version = detail::get_le(s, pos, 4, where);
    require(version == kTemplateVersion, ErrorKind::Parse, where + ": unsupported template version " + std::to_string(version));
    IrisTemplate t;
    t.radial = static_cast<int>(detail::get_le(s, pos, 4, where));
    t.angular = static_cast<int>(detail::get_le(s, pos, 4, where));
    require(t.radial >= 1 && t.radial <= 32 && t.angular >= 1 && t.angular <= (1 << 20), ErrorKind::Parse,
            where + ": implausible template size");
    t.code.resize(static_cast<std::size_t>(t.angular));
    t.mask.resize(static_cast<std::size_t>(t.angular));
    for (auto& w : t.code) w = detail::get_le(s, pos, 8, where);
    for (auto& w : t.mask) w = detail::get_le(s, pos, 8, where);
    require(pos == s.size(), ErrorKind::Parse, where + ": trailing bytes");
    return t;
}

inline void save_template(const std::filesystem::path& path, const IrisTemplate& t) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    const std::string s = serialize_template(t);
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
    require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

inline IrisTemplate load_template(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::MissingInput, "cannot open " + path.string());
    const std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_template(s, path.string());
}

} // namespace irissr
