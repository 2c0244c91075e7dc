#pragma once

// Deterministic synthetic eye images for desk-scale experiments. A seed fixes
// an identity (iris texture); a session index adds rotation, contrast and
// sensor-noise perturbations the way repeated acquisitions would.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "irissr/dataset.hpp"
#include "irissr/error.hpp"
#include "irissr/raster.hpp"
#include "irissr/rng.hpp"

namespace irissr {

struct SynthIris {
    Image image;
    IrisAnnotation annotation;
};

struct SessionJitter {
    double rotation = 0.0;   // radians
    double contrast = 1.0;   // texture gain about the identity's base level
    double brightness = 0.0; // additive offset on the iris
    double noise = 0.0;      // per-pixel Gaussian std-dev
};

// Fractions of the image side.
inline constexpr double kSynthPupil = 0.13;
inline constexpr double kSynthIris = 0.36;
inline constexpr double kSynthSclera = 0.46;

/// Session 0 is the unperturbed capture; later sessions rotate by up to four
/// samples of a 240-column unwrap and vary gain, offset and noise slightly.
inline SessionJitter session_jitter(std::uint64_t seed, int session) {
    if (session <= 0) return {};
    Rng rng(mix_seed(seed, 1000 + static_cast<std::uint64_t>(session)));
    SessionJitter j;
    j.rotation = rng.uniform(-4.0, 4.0) * 2.0 * std::numbers::pi / 240.0;
    j.contrast = rng.uniform(0.92, 1.08);
    j.brightness = rng.uniform(-0.03, 0.03);
    j.noise = 0.01;
    return j;
}

namespace detail {

struct TextureWave {
    int angular = 0;     // cycles per revolution
    double radial = 0.0; // cycles across the annulus
    double phase = 0.0;
    double amplitude = 0.0;
};

struct Crypt {
    double rho = 0.0;
    double theta = 0.0;
    double sigma = 0.0; // pixels at the reference size 231
    double depth = 0.0;
};

struct IrisIdentity {
    double base = 0.45;
    std::vector<TextureWave> waves;
    std::vector<Crypt> crypts;
};

inline IrisIdentity make_identity(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0));
    IrisIdentity id;
    id.base = rng.uniform(0.38, 0.52);
    const int n_waves = 10;
    for (int k = 0; k < n_waves; ++k) {
        TextureWave w;
        // Two purely radial bands, the rest mixed angular/radial.
        w.angular = k < 2 ? 0 : rng.integer(4, 40);
        w.radial = rng.uniform(0.5, 4.0);
        w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        w.amplitude = rng.uniform(0.5, 1.0);
        id.waves.push_back(w);
    }
    const int n_crypts = rng.integer(14, 22);
    for (int k = 0; k < n_crypts; ++k) {
        Crypt c;
        c.rho = rng.uniform(0.12, 0.88);
        c.theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        c.sigma = rng.uniform(1.8, 4.0);
        c.depth = rng.uniform(0.0, 1.0) < 0.75 ? -rng.uniform(0.15, 0.3) : rng.uniform(0.1, 0.2);
        id.crypts.push_back(c);
    }
    return id;
}

inline double wrap_angle(double a) {
    a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
    if (a < 0) a += 2.0 * std::numbers::pi;
    return a - std::numbers::pi;
}

// Iris intensity at normalized radius rho in [0,1] and angle theta (texture
// frame). `r` and `band` are the pixel radius and annulus width.
inline double iris_texture(const IrisIdentity& id, double rho, double theta, double r,
                           double band, double size_scale) {
    double sum = 0.0;
    double norm = 0.0;
    for (const auto& w : id.waves) {
        sum += w.amplitude *
               std::cos(w.angular * theta + 2.0 * std::numbers::pi * w.radial * rho + w.phase);
        norm += w.amplitude * w.amplitude;
    }
    double v = id.base + 0.14 * sum / std::sqrt(norm);
    for (const auto& c : id.crypts) {
        const double dr = (rho - c.rho) * band;
        const double dt = wrap_angle(theta - c.theta) * std::max(r, 1.0);
        const double s = c.sigma * size_scale;
        v += c.depth * std::exp(-(dr * dr + dt * dt) / (2.0 * s * s));
    }
    return v;
}

inline double edge_ramp(double d) { return std::clamp(d + 0.5, 0.0, 1.0); }

} // namespace detail

/// Square synthetic eye of side `size`, centred, with exact circle annotation.
inline SynthIris synth_iris(std::uint64_t seed, int size, int session = 0) {
    require(size >= 64, ErrorKind::InvalidArgument, "synth_iris: size must be >= 64");
    const detail::IrisIdentity id = detail::make_identity(seed);
    const SessionJitter jit = session_jitter(seed, session);

    IrisAnnotation ann;
    const double c = (size - 1) / 2.0;
    ann.pupil_center = {c, c};
    ann.pupil_radius = kSynthPupil * size;
    ann.iris_radius = kSynthIris * size;
    ann.sclera_radius = kSynthSclera * size;

    constexpr double pupil_level = 0.06;
    constexpr double sclera_level = 0.80;
    constexpr double skin_level = 0.55;
    const double band = ann.iris_radius - ann.pupil_radius;
    const double size_scale = size / 231.0;

    Rng noise(mix_seed(seed, 5000 + static_cast<std::uint64_t>(std::max(session, 0))));
    Image img(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double dx = x - c;
            const double dy = y - c;
            const double r = std::hypot(dx, dy);
            const double theta = std::atan2(dy, dx);
            const double rho = std::clamp((r - ann.pupil_radius) / band, 0.0, 1.0);
            double tex = detail::iris_texture(id, rho, theta - jit.rotation, r, band, size_scale);
            tex = id.base + jit.contrast * (tex - id.base) + jit.brightness;

            double v = pupil_level + (tex - pupil_level) * detail::edge_ramp(r - ann.pupil_radius);
            v += (sclera_level - v) * detail::edge_ramp(r - ann.iris_radius);
            v += (skin_level - v) * detail::edge_ramp(r - ann.sclera_radius);
            if (jit.noise > 0.0) v += jit.noise * noise.normal();
            img(x, y) = std::clamp(v, 0.0, 1.0);
        }
    }
    return {std::move(img), ann};
}

/// Smoothed white noise, for comparator tests that must not share the
/// circular eye structure.
inline Image random_texture(std::uint64_t seed, int width, int height, double sigma = 1.5) {
    Rng rng(mix_seed(seed, 77));
    Image img(width, height);
    for (double& v : img.pixels()) v = rng.uniform();
    img = gaussian_blur(img, sigma);
    // Stretch back to a usable contrast range.
    double lo = 1.0;
    double hi = 0.0;
    for (double v : img.pixels()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double& v : img.pixels()) v = hi > lo ? (v - lo) / (hi - lo) : 0.5;
    return img;
}

} // namespace irissr
