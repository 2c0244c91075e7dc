#pragma once

// Image re-projection: pulls an HR estimate toward fidelity with the LR
// observation x through
//
//     Y(t+1) = Y(t) - tau * U(B(D B Y(t) - x))
//
// with D B the degradation, B a Gaussian blur on the LR-plane residual (the
// degradation sigma rescaled to LR pixels) and U bicubic upsampling to the HR
// plane. All operators run unclamped so the
// recurrence stays linear; the result is clamped once after termination.

#include <cmath>
#include <vector>

#include "irissr/error.hpp"
#include "irissr/raster.hpp"

namespace irissr {

struct ReprojectConfig {
    double tau = 0.02;
    double tol = 1e-5; // on the mean absolute change between iterates
    int max_iter = 1000;
    double sigma = 0.0; // blur shared with the degradation; 0 disables B
    int lr_w = 0;
    int lr_h = 0;

    void validate() const {
        require(tau >= 0.0 && std::isfinite(tau), ErrorKind::InvalidArgument, "reproject: tau must be >= 0");
        require(tol > 0.0, ErrorKind::InvalidArgument, "reproject: tol must be > 0");
        require(max_iter >= 1, ErrorKind::InvalidArgument, "reproject: max_iter must be >= 1");
        require(sigma >= 0.0, ErrorKind::InvalidArgument, "reproject: sigma must be >= 0");
        require(lr_w >= 1 && lr_h >= 1, ErrorKind::InvalidArgument, "reproject: LR size unset");
    }
};

struct ReprojectResult {
    Image image;
    int iterations = 0;
    bool converged = false;
    std::vector<double> changes; // mean |Y(t+1) - Y(t)| per iteration
    double initial_residual = 0.0; // mean |D B Y(0) - x|
    double final_residual = 0.0;   // same, for the returned (clamped) image
};

/// Mean absolute LR-plane residual |D B y - x|.
inline double fidelity_residual(const Image& y, const Image& x, double sigma) {
    return mean_abs_diff(detail::degrade_linear(y, x.width(), x.height(), sigma), x);
}

inline ReprojectResult reproject(const Image& y0, const Image& x, const ReprojectConfig& cfg) {
    cfg.validate();
    require(x.width() == cfg.lr_w && x.height() == cfg.lr_h, ErrorKind::DimensionMismatch,
            "reproject: observation " + dims_string(x) + " does not match configured LR size " +
                std::to_string(cfg.lr_w) + "x" + std::to_string(cfg.lr_h));
    require(y0.width() >= cfg.lr_w && y0.height() >= cfg.lr_h, ErrorKind::DimensionMismatch,
            "reproject: estimate " + dims_string(y0) + " smaller than observation");

    const int hr_w = y0.width();
    const int hr_h = y0.height();
    ReprojectResult res;
    res.initial_residual = fidelity_residual(y0, x, cfg.sigma);

    // Inner blur expressed in LR pixels.
    const double lr_sigma = cfg.sigma * static_cast<double>(cfg.lr_w) / hr_w;
    Image y = y0;
    const double n = static_cast<double>(y.size());
    for (int t = 1; t <= cfg.max_iter; ++t) {
        Image r = detail::degrade_linear(y, cfg.lr_w, cfg.lr_h, cfg.sigma);
        for (std::size_t i = 0; i < r.size(); ++i) r.pixels()[i] -= x.pixels()[i];
        if (lr_sigma > 0.0) r = detail::convolve_separable(r, BlurKernel(lr_sigma));
        const Image g = detail::resample_bicubic(r, hr_w, hr_h);

        double change = 0.0;
        auto py = y.pixels();
        const auto pg = g.pixels();
        for (std::size_t i = 0; i < py.size(); ++i) {
            const double step = cfg.tau * pg[i];
            py[i] -= step;
            change += std::abs(step);
        }
        change /= n;
        res.changes.push_back(change);
        res.iterations = t;
        if (change < cfg.tol) {
            res.converged = true;
            break;
        }
    }
    res.image = clamp01(std::move(y));
    res.final_residual = fidelity_residual(res.image, x, cfg.sigma);
    return res;
}

} // namespace irissr
