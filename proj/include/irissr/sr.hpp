#pragma once

// Super-resolution driver. Interpolators and the eigen-patch model map LR to
// HR directly; an external x2 backend is chained until the target is reached
// and a final bicubic resize fixes the exact output size.

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>

#include "irissr/eigenpatch.hpp"
#include "irissr/error.hpp"
#include "irissr/image_io.hpp"
#include "irissr/raster.hpp"

namespace irissr {

enum class UpscalerKind { Bilinear, Bicubic, EigenPatch, External };

struct UpscalerSpec {
    std::string name;
    UpscalerKind kind = UpscalerKind::Bicubic;
    std::string backend_command; // external: template with {in} and {out}
    std::filesystem::path exchange_dir;
    std::shared_ptr<const EigenPatchModel> model; // eigenpatch

    static UpscalerSpec bilinear() { return {"bilinear", UpscalerKind::Bilinear, {}, {}, {}}; }
    static UpscalerSpec bicubic() { return {"bicubic", UpscalerKind::Bicubic, {}, {}, {}}; }
    static UpscalerSpec eigenpatch(std::shared_ptr<const EigenPatchModel> m) {
        return {"eigenpatch", UpscalerKind::EigenPatch, {}, {}, std::move(m)};
    }
    static UpscalerSpec external(std::string name, std::string command,
                                 std::filesystem::path exchange_dir) {
        return {std::move(name), UpscalerKind::External, std::move(command),
                std::move(exchange_dir), {}};
    }

    void validate() const {
        if (kind == UpscalerKind::External) {
            require(!backend_command.empty(), ErrorKind::InvalidArgument,
                    "backend '" + name + "' has no command");
            require(!exchange_dir.empty(), ErrorKind::InvalidArgument,
                    "backend '" + name + "' has no exchange directory");
        }
        if (kind == UpscalerKind::EigenPatch)
            require(model != nullptr, ErrorKind::InvalidArgument, "eigenpatch upscaler has no model");
    }
};

enum class BackendFailure { ProcessFailed, MissingOutput, DimensionMismatch };

class BackendError : public Error {
public:
    BackendError(BackendFailure failure, int exit_status, const std::string& what)
        : Error(ErrorKind::Backend, what), failure_(failure), exit_status_(exit_status) {}

    BackendFailure failure() const noexcept { return failure_; }
    int exit_status() const noexcept { return exit_status_; }

private:
    BackendFailure failure_;
    int exit_status_;
};

/// Exchange root from IRIS_SR_TMP, else the system temp directory.
inline std::filesystem::path default_exchange_dir() {
    if (const char* env = std::getenv("IRIS_SR_TMP"); env && *env) return env;
    return std::filesystem::temp_directory_path() / "iris_sr";
}

namespace detail {

inline std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'')
            out += "'\\''";
        else
            out += c;
    }
    return out + "'";
}

inline std::string substitute(std::string cmd, const std::string& key, const std::string& value) {
    for (std::size_t pos = cmd.find(key); pos != std::string::npos;
         pos = cmd.find(key, pos + value.size()))
        cmd.replace(pos, key.size(), value);
    return cmd;
}

inline std::filesystem::path unique_exchange_subdir(const std::filesystem::path& root) {
    static std::atomic<unsigned long> counter{0};
    return root / ("x" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
}

} // namespace detail

/// One x2 pass through an external process over the PGM file exchange.
inline Image apply_backend(const Image& lr, const UpscalerSpec& up) {
    require(up.kind == UpscalerKind::External, ErrorKind::InvalidArgument,
            "apply_backend requires an external upscaler");
    up.validate();
    namespace fs = std::filesystem;
    const fs::path dir = detail::unique_exchange_subdir(up.exchange_dir);
    fs::create_directories(dir);
    const fs::path in = dir / "in.pgm";
    const fs::path out = dir / "out.pgm";
    write_pgm(in, lr);

    std::string cmd = detail::substitute(up.backend_command, "{in}", detail::shell_quote(in.string()));
    cmd = detail::substitute(cmd, "{out}", detail::shell_quote(out.string()));
    const int raw = std::system(cmd.c_str());
    const int status = raw == -1 ? -1 : (WIFEXITED(raw) ? WEXITSTATUS(raw) : 128 + WTERMSIG(raw));
    if (status != 0)
        throw BackendError(BackendFailure::ProcessFailed, status,
                           "backend '" + up.name + "' exited with status " + std::to_string(status));
    if (!fs::exists(out))
        throw BackendError(BackendFailure::MissingOutput, 0,
                           "backend '" + up.name + "' produced no output file " + out.string());
    Image result = read_image(out);
    if (result.width() != 2 * lr.width() || result.height() != 2 * lr.height())
        throw BackendError(BackendFailure::DimensionMismatch, 0,
                           "backend '" + up.name + "' returned " + dims_string(result) +
                               ", expected " + std::to_string(2 * lr.width()) + "x" +
                               std::to_string(2 * lr.height()));
    std::error_code ec;
    fs::remove_all(dir, ec);
    return result;
}

/// Number of x2 passes for an upscaling factor: ceil(log2 factor), except
/// that factors within 5% (in log2 units) above a power of two snap down, so
/// that size rounding (e.g. 231 from 115) does not add a pass.
inline int doubling_passes(double factor) {
    require(factor >= 1.0 && std::isfinite(factor), ErrorKind::InvalidArgument,
            "upscaling factor must be >= 1");
    const double l = std::log2(factor);
    const double fl = std::floor(l);
    if (l - fl < 0.05) return static_cast<int>(fl);
    return static_cast<int>(std::ceil(l));
}

struct SrResult {
    Image image;
    int passes = 0;
};

/// Restores `lr` to hr_w x hr_h. `nominal_factor` (e.g. 16 for a "1/16" run)
/// fixes the number of x2 passes for chained backends; when zero the size
/// ratio hr_w / lr_w is used.
inline SrResult super_resolve(const Image& lr, int hr_w, int hr_h, const UpscalerSpec& up,
                              double nominal_factor = 0.0) {
    up.validate();
    require(hr_w >= lr.width() && hr_h >= lr.height(), ErrorKind::InvalidArgument,
            "super_resolve: target " + std::to_string(hr_w) + "x" + std::to_string(hr_h) +
                " smaller than input " + dims_string(lr));
    switch (up.kind) {
    case UpscalerKind::Bilinear:
        return {resize_bilinear(lr, hr_w, hr_h), 1};
    case UpscalerKind::Bicubic:
        return {resize_bicubic(lr, hr_w, hr_h), 1};
    case UpscalerKind::EigenPatch: {
        Image out = reconstruct(lr, *up.model);
        if (out.width() != hr_w || out.height() != hr_h) out = resize_bicubic(out, hr_w, hr_h);
        return {std::move(out), 1};
    }
    case UpscalerKind::External: {
        const double factor =
            nominal_factor > 0.0 ? nominal_factor : static_cast<double>(hr_w) / lr.width();
        const int passes = doubling_passes(factor);
        Image cur = lr;
        for (int p = 0; p < passes; ++p) cur = clamp01(apply_backend(cur, up));
        if (cur.width() != hr_w || cur.height() != hr_h) cur = resize_bicubic(cur, hr_w, hr_h);
        return {std::move(cur), passes};
    }
    }
    fail(ErrorKind::InvalidArgument, "unknown upscaler kind");
}

} // namespace irissr
