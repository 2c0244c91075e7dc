#pragma once

// Position-patch hallucination with a per-position eigen-transformation.
//
// For each patch position the M co-located LR training patches are centred
// (columns of X, d x M) and PCA is done through the small Gram matrix XᵀX.
// An input patch x is projected on the eigen-patches E = X V Λ^(-1/2),
// the projection weights are mapped back to per-sample coefficients
// c = V Λ^(-1/2) Eᵀ (x - mean_lr) and the HR patch is synthesized from the
// co-located HR training patches with the same coefficients.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "irissr/error.hpp"
#include "irissr/hash.hpp"
#include "irissr/raster.hpp"

namespace irissr {

struct PatchConfig {
    int patch_size = 4; // LR pixels
    int stride = 2;
    double variance_retention = 0.98; // 1.0 keeps every component above eps

    friend bool operator==(const PatchConfig&, const PatchConfig&) = default;
};

inline constexpr double kEigenEpsilon = 1e-10;

struct PixelRect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
    int area() const { return w * h; }
    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Top-left offsets covering [0, extent) with the last patch clamped to fit.
inline std::vector<int> patch_offsets(int extent, int patch, int stride) {
    require(patch >= 1 && stride >= 1 && stride <= patch, ErrorKind::InvalidArgument,
            "patch grid requires 1 <= stride <= patch_size");
    require(patch <= extent, ErrorKind::InvalidArgument,
            "patch size " + std::to_string(patch) + " exceeds plane extent " + std::to_string(extent));
    std::vector<int> out;
    for (int o = 0;; o += stride) {
        if (o + patch >= extent) {
            out.push_back(extent - patch);
            break;
        }
        out.push_back(o);
    }
    return out;
}

struct PatchGrid {
    int patch_size = 0;
    int stride = 0;
    std::vector<PixelRect> positions; // LR plane

    static PatchGrid make(int width, int height, int patch, int stride) {
        PatchGrid g{patch, stride, {}};
        const auto xs = patch_offsets(width, patch, stride);
        const auto ys = patch_offsets(height, patch, stride);
        for (int y : ys)
            for (int x : xs) g.positions.push_back({x, y, patch, patch});
        return g;
    }
};

/// LR rectangle scaled onto the HR plane; neighbouring rectangles share edges
/// so overlapping LR coverage implies overlapping HR coverage.
inline PixelRect scale_rect(const PixelRect& r, double fx, double fy) {
    const int x0 = static_cast<int>(std::lround(r.x * fx));
    const int y0 = static_cast<int>(std::lround(r.y * fy));
    const int x1 = static_cast<int>(std::lround((r.x + r.w) * fx));
    const int y1 = static_cast<int>(std::lround((r.y + r.h) * fy));
    return {x0, y0, std::max(1, x1 - x0), std::max(1, y1 - y0)};
}

struct EigenPatchPosition {
    PixelRect lr;
    PixelRect hr;
    Eigen::VectorXd mean_lr;  // d
    Eigen::MatrixXd eigvecs;  // V, M x K
    Eigen::VectorXd eigvals;  // Λ, K
    Eigen::MatrixXd lr_dev;   // X, d x M
    Eigen::MatrixXd hr_dev;   // h_i - mean_hr, D x M
    Eigen::VectorXd mean_hr;  // D

    // Derived on train/load.
    Eigen::MatrixXd eigenpatches; // E, d x K
    Eigen::MatrixXd hr_synthesis; // hr_dev V Λ^(-1/2), D x K

    int components() const { return static_cast<int>(eigvals.size()); }

    void derive() {
        const Eigen::VectorXd inv_sqrt = eigvals.array().rsqrt().matrix();
        eigenpatches = lr_dev * eigvecs * inv_sqrt.asDiagonal();
        hr_synthesis = hr_dev * eigvecs * inv_sqrt.asDiagonal();
    }
};

struct EigenPatchMeta {
    int lr_w = 0;
    int lr_h = 0;
    int hr_w = 0;
    int hr_h = 0;
    double sigma = 0.0;
    PatchConfig patch;
    int training_count = 0;
    std::uint64_t training_hash = 0;

    friend bool operator==(const EigenPatchMeta&, const EigenPatchMeta&) = default;
};

struct EigenPatchModel {
    EigenPatchMeta meta;
    std::vector<EigenPatchPosition> positions;
};

/// Content hash of a training set; stored in the model so a cached model can
/// be matched against the images it is about to be reused with.
inline std::uint64_t training_set_hash(std::span<const Image> images) {
    Fnv1a h;
    for (const Image& img : images) {
        h.update_value(img.width());
        h.update_value(img.height());
        h.update(img.pixels().data(), img.size() * sizeof(double));
    }
    return h.digest();
}

namespace detail {

inline Eigen::VectorXd gather(const Image& img, const PixelRect& r) {
    Eigen::VectorXd v(r.area());
    int k = 0;
    for (int y = r.y; y < r.y + r.h; ++y)
        for (int x = r.x; x < r.x + r.w; ++x) v(k++) = img(x, y);
    return v;
}

} // namespace detail

inline EigenPatchModel train_eigenpatch(std::span<const Image> hr_images, int lr_w, int lr_h,
                                        double sigma, const PatchConfig& cfg = {}) {
    require(!hr_images.empty(), ErrorKind::InvalidArgument, "eigenpatch: empty training set");
    const int hr_w = hr_images.front().width();
    const int hr_h = hr_images.front().height();
    for (const Image& img : hr_images)
        require(img.width() == hr_w && img.height() == hr_h, ErrorKind::DimensionMismatch,
                "eigenpatch: training images differ in size (" + dims_string(img) + " vs " +
                    std::to_string(hr_w) + "x" + std::to_string(hr_h) + ")");
    require(cfg.variance_retention > 0.0 && cfg.variance_retention <= 1.0,
            ErrorKind::InvalidArgument, "eigenpatch: variance retention must be in (0, 1]");

    const int m = static_cast<int>(hr_images.size());
    std::vector<Image> lr_images;
    lr_images.reserve(hr_images.size());
    for (const Image& img : hr_images) lr_images.push_back(degrade(img, lr_w, lr_h, sigma));

    EigenPatchModel model;
    model.meta = {lr_w, lr_h, hr_w, hr_h, sigma, cfg, m, training_set_hash(hr_images)};
    const PatchGrid grid = PatchGrid::make(lr_w, lr_h, cfg.patch_size, cfg.stride);
    const double fx = static_cast<double>(hr_w) / lr_w;
    const double fy = static_cast<double>(hr_h) / lr_h;

    for (const PixelRect& rect : grid.positions) {
        EigenPatchPosition pos;
        pos.lr = rect;
        pos.hr = scale_rect(rect, fx, fy);
        const int d = rect.area();
        const int dh = pos.hr.area();

        Eigen::MatrixXd lr(d, m);
        Eigen::MatrixXd hr(dh, m);
        for (int i = 0; i < m; ++i) {
            lr.col(i) = detail::gather(lr_images[static_cast<std::size_t>(i)], rect);
            hr.col(i) = detail::gather(hr_images[static_cast<std::size_t>(i)], pos.hr);
        }
        pos.mean_lr = lr.rowwise().mean();
        pos.mean_hr = hr.rowwise().mean();
        pos.lr_dev = lr.colwise() - pos.mean_lr;
        pos.hr_dev = hr.colwise() - pos.mean_hr;

        const Eigen::MatrixXd gram = pos.lr_dev.transpose() * pos.lr_dev;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
        require(solver.info() == Eigen::Success, ErrorKind::Data,
                "eigenpatch: eigendecomposition failed");
        // Eigen returns ascending eigenvalues.
        const Eigen::VectorXd& vals = solver.eigenvalues();
        double total = 0.0;
        for (int i = 0; i < m; ++i) total += std::max(vals(i), 0.0);
        int keep = 0;
        double cumulative = 0.0;
        for (int i = m - 1; i >= 0; --i) {
            if (vals(i) <= kEigenEpsilon) break;
            if (keep > 0 && cumulative >= cfg.variance_retention * total) break;
            cumulative += vals(i);
            ++keep;
        }
        keep = std::min(keep, m - 1);
        pos.eigvals.resize(keep);
        pos.eigvecs.resize(m, keep);
        for (int k = 0; k < keep; ++k) {
            pos.eigvals(k) = vals(m - 1 - k);
            pos.eigvecs.col(k) = solver.eigenvectors().col(m - 1 - k);
        }
        pos.derive();
        model.positions.push_back(std::move(pos));
    }
    return model;
}

/// Projection weights of an LR patch on the eigen-patches: w = Eᵀ(x - mean).
inline Eigen::VectorXd project(const EigenPatchPosition& pos, const Eigen::VectorXd& patch) {
    return pos.eigenpatches.transpose() * (patch - pos.mean_lr);
}

inline Image reconstruct(const Image& lr, const EigenPatchModel& model) {
    const auto& meta = model.meta;
    require(lr.width() == meta.lr_w && lr.height() == meta.lr_h, ErrorKind::DimensionMismatch,
            "eigenpatch: input " + dims_string(lr) + " does not match model LR plane " +
                std::to_string(meta.lr_w) + "x" + std::to_string(meta.lr_h));
    Image sum(meta.hr_w, meta.hr_h);
    Image count(meta.hr_w, meta.hr_h);
    for (const auto& pos : model.positions) {
        require(pos.hr.x >= 0 && pos.hr.y >= 0 && pos.hr.x + pos.hr.w <= meta.hr_w &&
                    pos.hr.y + pos.hr.h <= meta.hr_h && pos.mean_hr.size() == pos.hr.area() &&
                    pos.mean_lr.size() == pos.lr.area(),
                ErrorKind::Data, "eigenpatch: model position inconsistent with its planes");
        const Eigen::VectorXd w = project(pos, detail::gather(lr, pos.lr));
        const Eigen::VectorXd patch = pos.mean_hr + pos.hr_synthesis * w;
        int k = 0;
        for (int y = pos.hr.y; y < pos.hr.y + pos.hr.h; ++y)
            for (int x = pos.hr.x; x < pos.hr.x + pos.hr.w; ++x) {
                sum(x, y) += patch(k++);
                count(x, y) += 1.0;
            }
    }
    Image out(meta.hr_w, meta.hr_h);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double c = count.pixels()[i];
        require(c > 0.0, ErrorKind::Data, "eigenpatch: model leaves HR pixels uncovered");
        out.pixels()[i] = sum.pixels()[i] / c;
    }
    return clamp01(std::move(out));
}

// ---------------------------------------------------------------------------
// Persistence: little-endian binary, versioned.

inline constexpr char kEigenModelMagic[8] = {'I', 'R', 'S', 'R', 'E', 'P', 'M', '\0'};
inline constexpr std::uint32_t kEigenModelVersion = 1;

namespace detail {

class BinWriter {
public:
    explicit BinWriter(std::ostream& out) : out_(out) {}
    template <class T>
    void put(const T& v) { out_.write(reinterpret_cast<const char*>(&v), sizeof(T)); }
    void put_matrix(const Eigen::MatrixXd& m) {
        put<std::int32_t>(static_cast<std::int32_t>(m.rows()));
        put<std::int32_t>(static_cast<std::int32_t>(m.cols()));
        out_.write(reinterpret_cast<const char*>(m.data()),
                   static_cast<std::streamsize>(sizeof(double) * m.size()));
    }
    void put_rect(const PixelRect& r) {
        for (int v : {r.x, r.y, r.w, r.h}) put<std::int32_t>(v);
    }

private:
    std::ostream& out_;
};

class BinReader {
public:
    BinReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}
    template <class T>
    T get() {
        T v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        require(static_cast<bool>(in_), ErrorKind::Parse, name_ + ": truncated file");
        return v;
    }
    Eigen::MatrixXd get_matrix() {
        const auto rows = get<std::int32_t>();
        const auto cols = get<std::int32_t>();
        require(rows >= 0 && cols >= 0 && static_cast<std::int64_t>(rows) * cols < (1LL << 31),
                ErrorKind::Parse, name_ + ": bad matrix shape");
        Eigen::MatrixXd m(rows, cols);
        in_.read(reinterpret_cast<char*>(m.data()),
                 static_cast<std::streamsize>(sizeof(double) * m.size()));
        require(static_cast<bool>(in_), ErrorKind::Parse, name_ + ": truncated file");
        return m;
    }
    PixelRect get_rect() {
        PixelRect r;
        r.x = get<std::int32_t>();
        r.y = get<std::int32_t>();
        r.w = get<std::int32_t>();
        r.h = get<std::int32_t>();
        return r;
    }

private:
    std::istream& in_;
    std::string name_;
};

} // namespace detail

inline void save_model(const std::filesystem::path& path, const EigenPatchModel& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write model " + path.string());
    detail::BinWriter w(out);
    out.write(kEigenModelMagic, sizeof kEigenModelMagic);
    w.put(kEigenModelVersion);
    const auto& m = model.meta;
    for (int v : {m.lr_w, m.lr_h, m.hr_w, m.hr_h}) w.put<std::int32_t>(v);
    w.put(m.sigma);
    w.put<std::int32_t>(m.patch.patch_size);
    w.put<std::int32_t>(m.patch.stride);
    w.put(m.patch.variance_retention);
    w.put<std::int32_t>(m.training_count);
    w.put(m.training_hash);
    w.put<std::uint64_t>(model.positions.size());
    for (const auto& p : model.positions) {
        w.put_rect(p.lr);
        w.put_rect(p.hr);
        w.put_matrix(p.mean_lr);
        w.put_matrix(p.eigvecs);
        w.put_matrix(p.eigvals);
        w.put_matrix(p.lr_dev);
        w.put_matrix(p.hr_dev);
        w.put_matrix(p.mean_hr);
    }
    require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

inline EigenPatchModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::MissingInput, "cannot open model " + path.string());
    detail::BinReader r(in, path.string());
    char magic[sizeof kEigenModelMagic];
    in.read(magic, sizeof magic);
    require(static_cast<bool>(in) && std::memcmp(magic, kEigenModelMagic, sizeof magic) == 0,
            ErrorKind::Parse, path.string() + ": not an eigen-patch model");
    const auto version = r.get<std::uint32_t>();
    require(version == kEigenModelVersion, ErrorKind::Parse,
            path.string() + ": unsupported model version " + std::to_string(version));
    EigenPatchModel model;
    auto& m = model.meta;
    m.lr_w = r.get<std::int32_t>();
    m.lr_h = r.get<std::int32_t>();
    m.hr_w = r.get<std::int32_t>();
    m.hr_h = r.get<std::int32_t>();
    m.sigma = r.get<double>();
    m.patch.patch_size = r.get<std::int32_t>();
    m.patch.stride = r.get<std::int32_t>();
    m.patch.variance_retention = r.get<double>();
    m.training_count = r.get<std::int32_t>();
    m.training_hash = r.get<std::uint64_t>();
    const auto n = r.get<std::uint64_t>();
    require(n < (1u << 24), ErrorKind::Parse, path.string() + ": bad position count");
    for (std::uint64_t i = 0; i < n; ++i) {
        EigenPatchPosition p;
        p.lr = r.get_rect();
        p.hr = r.get_rect();
        p.mean_lr = r.get_matrix();
        p.eigvecs = r.get_matrix();
        p.eigvals = r.get_matrix();
        p.lr_dev = r.get_matrix();
        p.hr_dev = r.get_matrix();
        p.mean_hr = r.get_matrix();
        const auto d = p.lr.area();
        const auto k = p.eigvals.size();
        require(p.mean_lr.size() == d && p.lr_dev.rows() == d &&
                    p.lr_dev.cols() == m.training_count && p.eigvecs.rows() == m.training_count &&
                    p.eigvecs.cols() == k && p.hr_dev.rows() == p.hr.area() &&
                    p.hr_dev.cols() == m.training_count && p.mean_hr.size() == p.hr.area(),
                ErrorKind::Parse, path.string() + ": inconsistent position " + std::to_string(i));
        p.derive();
        model.positions.push_back(std::move(p));
    }
    return model;
}

/// Throws when a loaded model was trained for a different configuration.
inline void check_model(const EigenPatchModel& model, int lr_w, int lr_h, int hr_w, int hr_h,
                        const PatchConfig& cfg) {
    const auto& m = model.meta;
    require(m.patch == cfg, ErrorKind::InvalidArgument,
            "eigen-patch model was trained with a different patch configuration");
    require(m.lr_w == lr_w && m.lr_h == lr_h && m.hr_w == hr_w && m.hr_h == hr_h,
            ErrorKind::InvalidArgument, "eigen-patch model was trained for different plane sizes");
}

} // namespace irissr
