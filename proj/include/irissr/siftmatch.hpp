#pragma once

// SIFT keypoints and descriptors (difference-of-Gaussians detector, Lowe
// style) and the keypoint-count comparator: the score of a pair is the number
// of ratio-test matches.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "irissr/dataset.hpp"
#include "irissr/error.hpp"
#include "irissr/raster.hpp"

namespace irissr {

struct SiftConfig {
    int scales_per_octave = 3;
    double sigma0 = 1.6;
    double input_sigma = 0.5; // blur assumed already present in the input
    int min_octave_dim = 16;
    double contrast_threshold = 0.03;
    double edge_ratio = 10.0;
    int border = 5;
    int max_interp_steps = 5;
    int orientation_bins = 36;
    double orientation_peak_ratio = 0.8;
    double descriptor_clamp = 0.2;

    void validate() const {
        require(scales_per_octave >= 1, ErrorKind::InvalidArgument, "sift: scales_per_octave must be >= 1");
        require(sigma0 > input_sigma && input_sigma >= 0.0, ErrorKind::InvalidArgument, "sift: bad base blur");
        require(contrast_threshold >= 0.0 && edge_ratio >= 1.0, ErrorKind::InvalidArgument, "sift: bad thresholds");
        require(min_octave_dim >= 2 * border + 3, ErrorKind::InvalidArgument, "sift: octave floor below border");
    }
};

struct Keypoint {
    double x = 0.0; // input pixel coordinates
    double y = 0.0;
    double scale = 0.0;       // sigma in input pixels
    double orientation = 0.0; // radians in [0, 2 pi), image axes (y down)
    double response = 0.0;    // interpolated DoG value
    int octave = 0;
    int layer = 0;
    bool operator==(const Keypoint&) const = default;
};

inline constexpr int kDescriptorSize = 128;
using Descriptor = std::array<double, kDescriptorSize>;

struct Feature {
    Keypoint kp;
    Descriptor desc{};
    bool operator==(const Feature&) const = default;
};

namespace detail {

struct Octave {
    std::vector<Image> gauss; // scales_per_octave + 3 levels
    std::vector<Image> dog;   // scales_per_octave + 2 levels
};

inline Image difference(const Image& a, const Image& b) {
    Image d(a.width(), a.height());
    for (std::size_t i = 0; i < d.size(); ++i) d.pixels()[i] = a.pixels()[i] - b.pixels()[i];
    return d;
}

inline Image blur_by(const Image& img, double sigma) {
    return sigma > 0.0 ? convolve_separable(img, BlurKernel(sigma)) : img;
}

inline Image half_sample(const Image& img) {
    Image out(img.width() / 2, img.height() / 2);
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) out(x, y) = img(2 * x, 2 * y);
    return out;
}

inline std::vector<Octave> build_pyramid(const Image& img, const SiftConfig& cfg) {
    const int s = cfg.scales_per_octave;
    const double k = std::pow(2.0, 1.0 / s);
    std::vector<double> step(static_cast<std::size_t>(s + 3));
    step[0] = std::sqrt(cfg.sigma0 * cfg.sigma0 - cfg.input_sigma * cfg.input_sigma);
    for (int i = 1; i < s + 3; ++i) {
        const double prev = cfg.sigma0 * std::pow(k, i - 1);
        const double total = prev * k;
        step[static_cast<std::size_t>(i)] = std::sqrt(total * total - prev * prev);
    }

    std::vector<Octave> pyr;
    Image base = blur_by(img, step[0]);
    while (std::min(base.width(), base.height()) >= cfg.min_octave_dim) {
        Octave oct;
        oct.gauss.push_back(base);
        for (int i = 1; i < s + 3; ++i) oct.gauss.push_back(blur_by(oct.gauss.back(), step[static_cast<std::size_t>(i)]));
        for (int i = 0; i + 1 < s + 3; ++i) oct.dog.push_back(difference(oct.gauss[i + 1], oct.gauss[i]));
        base = half_sample(oct.gauss[static_cast<std::size_t>(s)]);
        pyr.push_back(std::move(oct));
    }
    return pyr;
}

inline bool is_extremum(const std::vector<Image>& dog, int layer, int x, int y) {
    const double v = dog[layer](x, y);
    const bool want_max = v > 0;
    for (int l = layer - 1; l <= layer + 1; ++l)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (l == layer && dx == 0 && dy == 0) continue;
                const double n = dog[l](x + dx, y + dy);
                if (want_max ? n > v : n < v) return false;
            }
    return true;
}

struct Refined {
    int x, y, layer;
    Eigen::Vector3d offset; // (dx, dy, dlayer)
    double contrast;
};

inline Eigen::Vector3d dog_gradient(const std::vector<Image>& dog, int l, int x, int y) {
    return {(dog[l](x + 1, y) - dog[l](x - 1, y)) * 0.5, (dog[l](x, y + 1) - dog[l](x, y - 1)) * 0.5,
            (dog[l + 1](x, y) - dog[l - 1](x, y)) * 0.5};
}

inline Eigen::Matrix3d dog_hessian(const std::vector<Image>& dog, int l, int x, int y) {
    const Image& c = dog[l];
    const Image& p = dog[l - 1];
    const Image& n = dog[l + 1];
    const double v2 = 2.0 * c(x, y);
    const double dxx = c(x + 1, y) + c(x - 1, y) - v2;
    const double dyy = c(x, y + 1) + c(x, y - 1) - v2;
    const double dss = n(x, y) + p(x, y) - v2;
    const double dxy = (c(x + 1, y + 1) - c(x - 1, y + 1) - c(x + 1, y - 1) + c(x - 1, y - 1)) * 0.25;
    const double dxs = (n(x + 1, y) - n(x - 1, y) - p(x + 1, y) + p(x - 1, y)) * 0.25;
    const double dys = (n(x, y + 1) - n(x, y - 1) - p(x, y + 1) + p(x, y - 1)) * 0.25;
    Eigen::Matrix3d h;
    h << dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss;
    return h;
}

// Sub-pixel / sub-scale refinement by repeated quadratic fits. Rejects
// points that drift out of range, fail to settle, have low contrast or sit
// on an edge.
inline bool refine(const std::vector<Image>& dog, int x, int y, int layer, const SiftConfig& cfg, Refined& out) {
    const int s = cfg.scales_per_octave;
    const int w = dog[0].width();
    const int h = dog[0].height();
    Eigen::Vector3d off = Eigen::Vector3d::Zero();
    int step = 0;
    for (; step < cfg.max_interp_steps; ++step) {
        const Eigen::Vector3d g = dog_gradient(dog, layer, x, y);
        const Eigen::Matrix3d H = dog_hessian(dog, layer, x, y);
        off = -H.fullPivLu().solve(g);
        if (!off.allFinite()) return false;
        if (std::abs(off(0)) < 0.5 && std::abs(off(1)) < 0.5 && std::abs(off(2)) < 0.5) break;
        if (off.cwiseAbs().maxCoeff() > 1e6) return false;
        x += static_cast<int>(std::lround(off(0)));
        y += static_cast<int>(std::lround(off(1)));
        layer += static_cast<int>(std::lround(off(2)));
        if (layer < 1 || layer > s || x < cfg.border || x >= w - cfg.border || y < cfg.border || y >= h - cfg.border)
            return false;
    }
    if (step >= cfg.max_interp_steps) return false;

    const double contrast = dog[layer](x, y) + 0.5 * dog_gradient(dog, layer, x, y).dot(off);
    if (std::abs(contrast) < cfg.contrast_threshold) return false;

    const Eigen::Matrix3d H = dog_hessian(dog, layer, x, y);
    const double tr = H(0, 0) + H(1, 1);
    const double det = H(0, 0) * H(1, 1) - H(0, 1) * H(0, 1);
    const double r = cfg.edge_ratio;
    if (det <= 0.0 || tr * tr * r >= (r + 1) * (r + 1) * det) return false;

    out = {x, y, layer, off, contrast};
    return true;
}

inline double wrap_2pi(double a) {
    const double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a < 0.0) a += two_pi;
    if (a >= two_pi) a -= two_pi;
    return a;
}

// Dominant gradient orientations around (x, y) at octave-relative sigma.
inline std::vector<double> orientations(const Image& g, int x, int y, double sigma, const SiftConfig& cfg) {
    const int nb = cfg.orientation_bins;
    const double ws = 1.5 * sigma;
    const int radius = static_cast<int>(std::lround(3.0 * ws));
    std::vector<double> hist(static_cast<std::size_t>(nb), 0.0);
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
            const int px = x + dx;
            const int py = y + dy;
            if (px <= 0 || py <= 0 || px >= g.width() - 1 || py >= g.height() - 1) continue;
            const double gx = g(px + 1, py) - g(px - 1, py);
            const double gy = g(px, py + 1) - g(px, py - 1);
            const double wgt = std::exp(-(dx * dx + dy * dy) / (2.0 * ws * ws));
            const double ang = wrap_2pi(std::atan2(gy, gx));
            const int bin = static_cast<int>(std::lround(ang * nb / (2.0 * std::numbers::pi))) % nb;
            hist[static_cast<std::size_t>(bin)] += wgt * std::hypot(gx, gy);
        }
    std::vector<double> sm(static_cast<std::size_t>(nb));
    auto at = [&](int i) { return hist[static_cast<std::size_t>((i % nb + nb) % nb)]; };
    for (int i = 0; i < nb; ++i)
        sm[static_cast<std::size_t>(i)] = (at(i - 2) + at(i + 2)) / 16.0 + (at(i - 1) + at(i + 1)) * 4.0 / 16.0 + at(i) * 6.0 / 16.0;
    const double peak = *std::max_element(sm.begin(), sm.end());
    std::vector<double> out;
    if (peak <= 0.0) return out;
    for (int i = 0; i < nb; ++i) {
        const double l = sm[static_cast<std::size_t>((i - 1 + nb) % nb)];
        const double r = sm[static_cast<std::size_t>((i + 1) % nb)];
        const double c = sm[static_cast<std::size_t>(i)];
        if (c > l && c > r && c >= cfg.orientation_peak_ratio * peak) {
            const double bin = i + 0.5 * (l - r) / (l - 2.0 * c + r);
            out.push_back(wrap_2pi(bin * 2.0 * std::numbers::pi / nb));
        }
    }
    return out;
}

// 4x4 spatial cells x 8 orientation bins, trilinear voting, clamp and
// renormalize. Returns false when the patch carries no gradient energy.
inline bool describe(const Image& g, double xf, double yf, double sigma, double ori, const SiftConfig& cfg,
                     Descriptor& out) {
    constexpr int d = 4;
    constexpr int n = 8;
    const double hist_width = 3.0 * sigma;
    int radius = static_cast<int>(std::lround(hist_width * std::numbers::sqrt2 * (d + 1) * 0.5));
    radius = std::min(radius, static_cast<int>(std::hypot(g.width(), g.height())));
    const int cx = static_cast<int>(std::lround(xf));
    const int cy = static_cast<int>(std::lround(yf));
    const double cos_t = std::cos(ori) / hist_width;
    const double sin_t = std::sin(ori) / hist_width;
    const double bins_per_rad = n / (2.0 * std::numbers::pi);
    std::array<double, (d + 2) * (d + 2) * n> hist{};
    auto cell = [&](int r, int c, int o) -> double& {
        return hist[static_cast<std::size_t>(((r + 1) * (d + 2) + (c + 1)) * n + ((o % n) + n) % n)];
    };
    for (int i = -radius; i <= radius; ++i)
        for (int j = -radius; j <= radius; ++j) {
            // Offset rotated into the keypoint frame, in cell units.
            const double c_rot = j * cos_t + i * sin_t;
            const double r_rot = -j * sin_t + i * cos_t;
            const double rbin = r_rot + d / 2.0 - 0.5;
            const double cbin = c_rot + d / 2.0 - 0.5;
            const int px = cx + j;
            const int py = cy + i;
            if (!(rbin > -1 && rbin < d && cbin > -1 && cbin < d)) continue;
            if (px <= 0 || py <= 0 || px >= g.width() - 1 || py >= g.height() - 1) continue;
            const double gx = g(px + 1, py) - g(px - 1, py);
            const double gy = g(px, py + 1) - g(px, py - 1);
            const double mag = std::hypot(gx, gy) * std::exp(-(c_rot * c_rot + r_rot * r_rot) / (0.5 * d * d));
            const double obin = wrap_2pi(std::atan2(gy, gx) - ori) * bins_per_rad;

            const int r0 = static_cast<int>(std::floor(rbin));
            const int c0 = static_cast<int>(std::floor(cbin));
            const int o0 = static_cast<int>(std::floor(obin));
            const double fr = rbin - r0;
            const double fc = cbin - c0;
            const double fo = obin - o0;
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                    for (int e = 0; e < 2; ++e) {
                        const double wgt = (a ? fr : 1 - fr) * (b ? fc : 1 - fc) * (e ? fo : 1 - fo);
                        cell(r0 + a, c0 + b, o0 + e) += mag * wgt;
                    }
        }
    std::size_t k = 0;
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
            for (int o = 0; o < n; ++o) out[k++] = cell(r, c, o);

    double norm = 0.0;
    for (double v : out) norm += v * v;
    norm = std::sqrt(norm);
    if (!(norm > 1e-12)) return false;
    double norm2 = 0.0;
    for (double& v : out) {
        v = std::min(v / norm, cfg.descriptor_clamp);
        norm2 += v * v;
    }
    norm2 = std::sqrt(norm2);
    for (double& v : out) v /= norm2;
    return true;
}

} // namespace detail

/// Keypoints with descriptors, sorted by (octave, y, x, orientation).
inline std::vector<Feature> detect_describe(const Image& img, const SiftConfig& cfg = {}) {
    cfg.validate();
    require(img.width() >= 32 && img.height() >= 32, ErrorKind::InvalidArgument,
            "sift: image " + dims_string(img) + " smaller than 32x32");
    const int s = cfg.scales_per_octave;
    const auto pyr = detail::build_pyramid(img, cfg);
    const double prelim = 0.5 * cfg.contrast_threshold / s;

    std::vector<Feature> out;
    for (int o = 0; o < static_cast<int>(pyr.size()); ++o) {
        const auto& oct = pyr[static_cast<std::size_t>(o)];
        const int w = oct.dog[0].width();
        const int h = oct.dog[0].height();
        const double unit = std::ldexp(1.0, o);
        for (int layer = 1; layer <= s; ++layer)
            for (int y = cfg.border; y < h - cfg.border; ++y)
                for (int x = cfg.border; x < w - cfg.border; ++x) {
                    if (std::abs(oct.dog[layer](x, y)) <= prelim) continue;
                    if (!detail::is_extremum(oct.dog, layer, x, y)) continue;
                    detail::Refined r;
                    if (!detail::refine(oct.dog, x, y, layer, cfg, r)) continue;
                    const double oct_sigma = cfg.sigma0 * std::pow(2.0, (r.layer + r.offset(2)) / s);
                    const Image& g = oct.gauss[static_cast<std::size_t>(r.layer)];
                    const double xf = r.x + r.offset(0);
                    const double yf = r.y + r.offset(1);
                    for (double ori : detail::orientations(g, r.x, r.y, oct_sigma, cfg)) {
                        Feature f;
                        f.kp = {xf * unit, yf * unit, oct_sigma * unit, ori, r.contrast, o, r.layer};
                        if (detail::describe(g, xf, yf, oct_sigma, ori, cfg, f.desc)) out.push_back(f);
                    }
                }
    }
    std::sort(out.begin(), out.end(), [](const Feature& a, const Feature& b) {
        if (a.kp.octave != b.kp.octave) return a.kp.octave < b.kp.octave;
        if (a.kp.y != b.kp.y) return a.kp.y < b.kp.y;
        if (a.kp.x != b.kp.x) return a.kp.x < b.kp.x;
        if (a.kp.orientation != b.kp.orientation) return a.kp.orientation < b.kp.orientation;
        return a.kp.scale < b.kp.scale;
    });
    // Two extrema can refine onto the same point; keep one copy.
    out.erase(std::unique(out.begin(), out.end(), [](const Feature& a, const Feature& b) { return a.kp == b.kp; }),
              out.end());
    return out;
}

/// Keeps features whose location lies in the iris annulus.
inline std::vector<Feature> filter_annulus(std::vector<Feature> feats, const IrisAnnotation& ann) {
    std::erase_if(feats, [&](const Feature& f) {
        const double r = std::hypot(f.kp.x - ann.pupil_center.x, f.kp.y - ann.pupil_center.y);
        return r < ann.pupil_radius || r > ann.iris_radius;
    });
    return feats;
}

inline double descriptor_dist2(const Descriptor& a, const Descriptor& b) {
    double s = 0.0;
    for (int i = 0; i < kDescriptorSize; ++i) {
        const double d = a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)];
        s += d * d;
    }
    return s;
}

namespace detail {

// Index of the nearest neighbour of q in set, or -1 when the ratio test
// fails (or fewer than two candidates exist).
inline int ratio_match(const Descriptor& q, const std::vector<Feature>& set, double ratio) {
    if (set.size() < 2) return -1;
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = d1;
    int best = -1;
    for (std::size_t j = 0; j < set.size(); ++j) {
        const double d = descriptor_dist2(q, set[j].desc);
        if (d < d1) {
            d2 = d1;
            d1 = d;
            best = static_cast<int>(j);
        } else if (d < d2) {
            d2 = d;
        }
    }
    return d1 < ratio * ratio * d2 ? best : -1;
}

inline int nearest(const Descriptor& q, const std::vector<Feature>& set) {
    double d1 = std::numeric_limits<double>::infinity();
    int best = -1;
    for (std::size_t j = 0; j < set.size(); ++j) {
        const double d = descriptor_dist2(q, set[j].desc);
        if (d < d1) d1 = d, best = static_cast<int>(j);
    }
    return best;
}

} // namespace detail

/// Number of features of `a` with an accepted ratio-test match in `b`.
/// With `mutual`, the match must also be a's nearest neighbour seen from b.
inline int match_score(const std::vector<Feature>& a, const std::vector<Feature>& b, double ratio = 0.8,
                       bool mutual = false) {
    require(ratio > 0.0 && ratio <= 1.0, ErrorKind::InvalidArgument, "match_score: ratio must be in (0, 1]");
    int count = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const int j = detail::ratio_match(a[i].desc, b, ratio);
        if (j < 0) continue;
        if (mutual && detail::nearest(b[static_cast<std::size_t>(j)].desc, a) != static_cast<int>(i)) continue;
        ++count;
    }
    return count;
}

// Feature cache: "IRSRSFT" magic, u32 version, u64 count, then per feature
// the keypoint (5 doubles, 2 i32) and 128 doubles, little-endian IEEE.
inline constexpr char kSiftMagic[8] = {'I', 'R', 'S', 'R', 'S', 'F', 'T', '\0'};
inline constexpr std::uint32_t kSiftVersion = 1;

namespace detail {

inline void put_bytes(std::string& s, std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint64_t take_bytes(const std::string& s, std::size_t& pos, int n, const std::string& where) {
    require(pos + static_cast<std::size_t>(n) <= s.size(), ErrorKind::Parse, where + ": truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
    pos += static_cast<std::size_t>(n);
    return v;
}
inline void put_f64(std::string& s, double v) { put_bytes(s, std::bit_cast<std::uint64_t>(v), 8); }
inline double take_f64(const std::string& s, std::size_t& pos, const std::string& where) {
    return std::bit_cast<double>(take_bytes(s, pos, 8, where));
}

} // namespace detail

inline std::string serialize_features(const std::vector<Feature>& feats) {
    std::string s(kSiftMagic, sizeof kSiftMagic);
    detail::put_bytes(s, kSiftVersion, 4);
    detail::put_bytes(s, feats.size(), 8);
    for (const auto& f : feats) {
        for (double v : {f.kp.x, f.kp.y, f.kp.scale, f.kp.orientation, f.kp.response}) detail::put_f64(s, v);
        detail::put_bytes(s, static_cast<std::uint32_t>(f.kp.octave), 4);
        detail::put_bytes(s, static_cast<std::uint32_t>(f.kp.layer), 4);
        for (double v : f.desc) detail::put_f64(s, v);
    }
    return s;
}

inline std::vector<Feature> deserialize_features(const std::string& s, const std::string& where = "<features>") {
    require(s.size() >= sizeof kSiftMagic && s.compare(0, sizeof kSiftMagic, kSiftMagic, sizeof kSiftMagic) == 0,
            ErrorKind::Parse, where + ": not a feature cache");
    std::size_t pos = sizeof kSiftMagic;
    const auto version = detail::take_bytes(s, pos, 4, where);
    require(version == kSiftVersion, ErrorKind::Parse, where + ": unsupported feature cache version");
    const auto count = detail::take_bytes(s, pos, 8, where);
    constexpr std::size_t record = 5 * 8 + 2 * 4 + kDescriptorSize * 8;
    require(count <= (s.size() - pos) / record, ErrorKind::Parse, where + ": truncated");
    std::vector<Feature> feats(static_cast<std::size_t>(count));
    for (auto& f : feats) {
        f.kp.x = detail::take_f64(s, pos, where);
        f.kp.y = detail::take_f64(s, pos, where);
        f.kp.scale = detail::take_f64(s, pos, where);
        f.kp.orientation = detail::take_f64(s, pos, where);
        f.kp.response = detail::take_f64(s, pos, where);
        f.kp.octave = static_cast<std::int32_t>(detail::take_bytes(s, pos, 4, where));
        f.kp.layer = static_cast<std::int32_t>(detail::take_bytes(s, pos, 4, where));
        for (double& v : f.desc) v = detail::take_f64(s, pos, where);
    }
    require(pos == s.size(), ErrorKind::Parse, where + ": trailing bytes");
    return feats;
}

inline void save_features(const std::filesystem::path& path, const std::vector<Feature>& feats) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    const std::string s = serialize_features(feats);
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
    require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

inline std::vector<Feature> load_features(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::MissingInput, "cannot open " + path.string());
    const std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_features(s, path.string());
}

} // namespace irissr
