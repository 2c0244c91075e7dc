#pragma once

// Manifests, circle annotations and the preprocessing protocol: sclera-radius
// normalization, pupil-centred square crop, low-resolution simulation.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "irissr/error.hpp"
#include "irissr/raster.hpp"

namespace irissr {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point2&, const Point2&) = default;
};

/// Concentric circle model of one eye. All lengths in pixels.
struct IrisAnnotation {
    Point2 pupil_center;
    double pupil_radius = 0.0;
    double iris_radius = 0.0;
    double sclera_radius = 0.0;

    friend bool operator==(const IrisAnnotation&, const IrisAnnotation&) = default;

    // Radii ordering and finiteness; empty string when valid.
    std::string violation() const {
        if (!std::isfinite(pupil_center.x) || !std::isfinite(pupil_center.y) ||
            !std::isfinite(pupil_radius) || !std::isfinite(iris_radius) ||
            !std::isfinite(sclera_radius))
            return "non-finite annotation value";
        if (!(pupil_radius > 0.0)) return "pupil radius must be > 0";
        if (!(pupil_radius < iris_radius)) return "pupil radius must be < iris radius";
        if (!(iris_radius <= sclera_radius)) return "iris radius must be <= sclera radius";
        return {};
    }

    bool inside(const Image& img) const {
        return pupil_center.x >= 0.0 && pupil_center.y >= 0.0 &&
               pupil_center.x <= img.width() - 1 && pupil_center.y <= img.height() - 1;
    }
};

inline void validate(const IrisAnnotation& ann, const std::string& context) {
    const std::string v = ann.violation();
    require(v.empty(), ErrorKind::Data, context + ": " + v);
}

struct ManifestRecord {
    std::string image_path;
    std::string subject_id; // one eye
    int session = 0;
    IrisAnnotation annotation;
};

inline constexpr std::string_view kManifestHeader = "path,subject,session,px,py,pr,ir,sr";

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos
                                                  ? std::string_view::npos
                                                  : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        fail(ErrorKind::Parse, where + ": expected a number, got '" + s + "'");
    }
    require(used == s.size(), ErrorKind::Parse, where + ": trailing characters in '" + s + "'");
    return v;
}

inline int parse_int(const std::string& s, const std::string& where) {
    const double v = parse_double(s, where);
    require(v == std::floor(v) && std::abs(v) < 1e9, ErrorKind::Parse,
            where + ": expected an integer, got '" + s + "'");
    return static_cast<int>(v);
}

inline std::string fmt_num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace detail

inline std::vector<ManifestRecord> parse_manifest(std::istream& in, const std::string& name) {
    std::vector<ManifestRecord> records;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const std::string where = name + ":" + std::to_string(lineno);
        if (!header_seen) {
            require(t == kManifestHeader, ErrorKind::Parse,
                    where + ": expected header '" + std::string(kManifestHeader) + "'");
            header_seen = true;
            continue;
        }
        const auto f = detail::split_csv(t);
        require(f.size() == 8, ErrorKind::Parse,
                where + ": expected 8 fields, got " + std::to_string(f.size()));
        ManifestRecord r;
        r.image_path = f[0];
        r.subject_id = f[1];
        require(!r.image_path.empty(), ErrorKind::Parse, where + ": empty path");
        require(!r.subject_id.empty(), ErrorKind::Parse, where + ": empty subject");
        r.session = detail::parse_int(f[2], where + " session");
        r.annotation.pupil_center = {detail::parse_double(f[3], where + " px"),
                                     detail::parse_double(f[4], where + " py")};
        r.annotation.pupil_radius = detail::parse_double(f[5], where + " pr");
        r.annotation.iris_radius = detail::parse_double(f[6], where + " ir");
        r.annotation.sclera_radius = detail::parse_double(f[7], where + " sr");
        validate(r.annotation, where + " (" + r.image_path + ")");
        require(r.annotation.pupil_center.x >= 0 && r.annotation.pupil_center.y >= 0,
                ErrorKind::Data, where + " (" + r.image_path + "): negative pupil center");
        require(seen.insert(r.image_path).second, ErrorKind::Data,
                where + ": duplicate path " + r.image_path);
        records.push_back(std::move(r));
    }
    require(header_seen, ErrorKind::Parse, name + ": missing header");
    return records;
}

inline std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::MissingInput, "cannot open manifest " + path.string());
    return parse_manifest(in, path.string());
}

inline std::string format_manifest(const std::vector<ManifestRecord>& records) {
    std::ostringstream out;
    out << kManifestHeader << '\n';
    for (const auto& r : records) {
        const auto& a = r.annotation;
        out << r.image_path << ',' << r.subject_id << ',' << r.session << ','
            << detail::fmt_num(a.pupil_center.x) << ',' << detail::fmt_num(a.pupil_center.y) << ','
            << detail::fmt_num(a.pupil_radius) << ',' << detail::fmt_num(a.iris_radius) << ','
            << detail::fmt_num(a.sclera_radius) << '\n';
    }
    return out.str();
}

/// Sorted unique subject ids; the first `train_subjects` form the training split.
inline std::vector<std::string> sorted_subjects(const std::vector<ManifestRecord>& records) {
    std::set<std::string> ids;
    for (const auto& r : records) ids.insert(r.subject_id);
    return {ids.begin(), ids.end()};
}

struct ManifestSplit {
    std::vector<ManifestRecord> train;
    std::vector<ManifestRecord> target;
};

inline ManifestSplit split_by_subject(const std::vector<ManifestRecord>& records,
                                      std::size_t train_subjects) {
    const auto ids = sorted_subjects(records);
    const std::set<std::string> train_ids(
        ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(train_subjects, ids.size())));
    ManifestSplit s;
    for (const auto& r : records) (train_ids.count(r.subject_id) ? s.train : s.target).push_back(r);
    return s;
}

struct Normalized {
    Image image;
    IrisAnnotation annotation;
};

/// Rescales so that the sclera radius becomes `target_radius`.
inline Normalized normalize_sclera(const Image& img, const IrisAnnotation& ann, double target_radius) {
    validate(ann, "normalize_sclera");
    require(target_radius > 0.0, ErrorKind::InvalidArgument, "target sclera radius must be > 0");
    const double s = target_radius / ann.sclera_radius;
    const int out_w = std::max(1, static_cast<int>(std::lround(img.width() * s)));
    const int out_h = std::max(1, static_cast<int>(std::lround(img.height() * s)));
    if (out_w == img.width() && out_h == img.height() && s == 1.0) return {img, ann};

    // Per-axis scale realized by the rounded output size, pixel-centre aligned.
    const double sx = static_cast<double>(out_w) / img.width();
    const double sy = static_cast<double>(out_h) / img.height();
    IrisAnnotation out = ann;
    out.pupil_center = {(ann.pupil_center.x + 0.5) * sx - 0.5, (ann.pupil_center.y + 0.5) * sy - 0.5};
    out.pupil_radius = ann.pupil_radius * s;
    out.iris_radius = ann.iris_radius * s;
    out.sclera_radius = target_radius;
    return {resize_bicubic(img, out_w, out_h), out};
}

struct Crop {
    Image image;
    IrisAnnotation annotation;
};

/// Square of `side` pixels centred on the rounded pupil centre, or nullopt
/// (discard) when the square leaves the image.
inline std::optional<Crop> crop_square(const Image& img, const IrisAnnotation& ann, int side) {
    require(side >= 1, ErrorKind::InvalidArgument, "crop side must be >= 1");
    const long cx = std::lround(ann.pupil_center.x);
    const long cy = std::lround(ann.pupil_center.y);
    const long left = cx - side / 2;
    const long top = cy - side / 2;
    if (left < 0 || top < 0 || left + side > img.width() || top + side > img.height())
        return std::nullopt;
    Image out(side, side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            out(x, y) = img(static_cast<int>(left) + x, static_cast<int>(top) + y);
    IrisAnnotation a = ann;
    a.pupil_center = {ann.pupil_center.x - static_cast<double>(left),
                      ann.pupil_center.y - static_cast<double>(top)};
    return Crop{std::move(out), a};
}

inline constexpr std::string_view kDiscardCropOutOfBounds = "crop-out-of-bounds";

struct LowResolution {
    Image lr;
    Image baseline; // bicubic upscale of lr back to the source size
};

inline LowResolution simulate_lr(const Image& img, int lr_w, int lr_h, double sigma) {
    LowResolution out;
    out.lr = degrade(img, lr_w, lr_h, sigma);
    out.baseline = upsample(out.lr, img.width(), img.height());
    return out;
}

} // namespace irissr
