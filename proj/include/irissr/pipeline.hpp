#pragma once

// On-disk pipeline behind the iris_sr tool. Every stage writes one leaf
// directory under the work root plus a stamp.json listing the content hash
// of each file it produced. Downstream stages verify those hashes before
// reading, and a stage whose stamp key (parameters + upstream stamps) is
// unchanged is skipped.
//
//   <out>/prep/                 images/*.pgm, manifest.csv, discarded.csv
//   <out>/lr/<F>/               degraded *.pgm
//   <out>/sr/<M>/<F>/           restored *.pgm (+ reproject.csv)
//   <out>/models/<F>/           eigenpatch.bin
//   <out>/quality/<M>/<F>/      per_image.csv
//   <out>/match/<M>/<F>/        templates, SIFT caches, scores.csv
//   <out>/reports/              quality.csv, eer.csv, roc/, summary.json
//
// <F> and <M> are the factor label and method label with '/', ':', '+'
// replaced by '_'.

#include <fftw3.h>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "irissr/dataset.hpp"
#include "irissr/eigenpatch.hpp"
#include "irissr/error.hpp"
#include "irissr/fusion_eval.hpp"
#include "irissr/hash.hpp"
#include "irissr/image_io.hpp"
#include "irissr/iriscode.hpp"
#include "irissr/parallel.hpp"
#include "irissr/quality.hpp"
#include "irissr/reproject.hpp"
#include "irissr/siftmatch.hpp"
#include "irissr/sr.hpp"
#include "irissr/synth.hpp"

namespace irissr::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

struct FactorSpec {
    std::string label; // "1/16"
    int lr_size = 0;   // square LR side

    friend bool operator==(const FactorSpec&, const FactorSpec&) = default;
};

inline std::vector<FactorSpec> default_factors() {
    return {{"1/2", 115}, {"1/4", 57}, {"1/8", 29}, {"1/16", 15}, {"1/18", 13}};
}

struct RunConfig {
    fs::path manifest;
    fs::path out = "iris_sr_out";
    int crop_side = 231;
    double sclera_radius = 0.0; // 0: 0.46 * crop_side
    std::vector<FactorSpec> factors = default_factors();
    std::vector<std::string> selected; // factor labels to process; empty = all
    std::optional<double> blur_sigma;  // unset: 0.5 * crop_side / lr_size
    std::vector<std::string> methods = {"bicubic"}; // for `run`; "+reproject" suffix allowed
    double tau = 0.02;
    double reproject_tol = 1e-5;
    int reproject_max_iter = 1000;
    std::vector<std::string> comparators = {"lg", "sift", "fused"};
    int train_subjects = 0;
    bool fusion_split = false;
    bool fsim = false;
    std::map<std::string, std::string> backends; // name -> command with {in} {out}
    PatchConfig patch;
    unsigned jobs = 1;

    double target_sclera() const { return sclera_radius > 0.0 ? sclera_radius : kSynthSclera * crop_side; }

    double sigma_for(const FactorSpec& f) const {
        return blur_sigma ? *blur_sigma : 0.5 * static_cast<double>(crop_side) / f.lr_size;
    }

    const FactorSpec& factor(const std::string& label) const {
        for (const auto& f : factors)
            if (f.label == label) return f;
        fail(ErrorKind::InvalidArgument, "unknown factor '" + label + "' (not in the configured factor table)");
    }

    std::vector<FactorSpec> active_factors() const {
        if (selected.empty()) return factors;
        std::vector<FactorSpec> out;
        for (const auto& s : selected) out.push_back(factor(s));
        return out;
    }

    bool wants(const std::string& comparator) const {
        return std::find(comparators.begin(), comparators.end(), comparator) != comparators.end();
    }

    void validate() const {
        require(crop_side >= 32, ErrorKind::InvalidArgument, "crop_side must be >= 32");
        require(sclera_radius >= 0.0, ErrorKind::InvalidArgument, "sclera_radius must be >= 0");
        require(!factors.empty(), ErrorKind::InvalidArgument, "factor table is empty");
        std::set<std::string> labels;
        for (const auto& f : factors) {
            require(!f.label.empty(), ErrorKind::InvalidArgument, "factor label is empty");
            require(labels.insert(f.label).second, ErrorKind::InvalidArgument,
                    "factor label '" + f.label + "' maps to more than one LR size");
            require(f.lr_size >= 1 && f.lr_size <= crop_side, ErrorKind::InvalidArgument,
                    "factor " + f.label + ": LR size must be in [1, crop_side]");
        }
        for (const auto& s : selected) (void)factor(s);
        if (blur_sigma)
            require(*blur_sigma >= 0.0 && std::isfinite(*blur_sigma), ErrorKind::InvalidArgument,
                    "blur_sigma must be >= 0");
        ReprojectConfig rc{tau, reproject_tol, reproject_max_iter, 0.0, 1, 1};
        rc.validate();
        for (const auto& c : comparators)
            require(c == "lg" || c == "sift" || c == "fused", ErrorKind::InvalidArgument,
                    "unknown comparator '" + c + "' (expected lg, sift, fused)");
        require(train_subjects >= 0, ErrorKind::InvalidArgument, "train_subjects must be >= 0");
        require(jobs >= 1, ErrorKind::InvalidArgument, "jobs must be >= 1");
        for (const auto& [name, cmd] : backends) {
            require(cmd.find("{in}") != std::string::npos && cmd.find("{out}") != std::string::npos,
                    ErrorKind::InvalidArgument, "backend '" + name + "' command needs {in} and {out}");
        }
    }
};

// ---------------------------------------------------------------- config I/O

inline json config_to_json(const RunConfig& c) {
    json j;
    j["manifest"] = c.manifest.string();
    j["crop_side"] = c.crop_side;
    j["sclera_radius"] = c.target_sclera();
    json fs_ = json::array();
    for (const auto& f : c.factors) fs_.push_back({{"label", f.label}, {"size", f.lr_size}});
    j["factors"] = fs_;
    j["blur_sigma"] = c.blur_sigma ? json(*c.blur_sigma) : json(nullptr);
    j["methods"] = c.methods;
    j["reproject"] = {{"tau", c.tau}, {"tol", c.reproject_tol}, {"max_iter", c.reproject_max_iter}};
    j["comparators"] = c.comparators;
    j["train_subjects"] = c.train_subjects;
    j["fusion_split"] = c.fusion_split;
    j["fsim"] = c.fsim;
    j["backends"] = c.backends;
    j["patch"] = {{"size", c.patch.patch_size}, {"stride", c.patch.stride},
                  {"variance_retention", c.patch.variance_retention}};
    return j;
}

namespace detail {

template <class T>
T get_as(const json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        fail(ErrorKind::InvalidArgument, "config: '" + key + "' has the wrong type");
    }
}

} // namespace detail

/// Applies the keys of a JSON config object onto `c`. Unknown keys are errors.
inline void apply_config(RunConfig& c, const json& j, const fs::path& base_dir = {}) {
    require(j.is_object(), ErrorKind::InvalidArgument, "config: top level must be an object");
    for (const auto& [key, v] : j.items()) {
        if (key == "manifest") {
            fs::path p = detail::get_as<std::string>(v, key);
            c.manifest = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        } else if (key == "out") {
            fs::path p = detail::get_as<std::string>(v, key);
            c.out = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        } else if (key == "crop_side") {
            c.crop_side = detail::get_as<int>(v, key);
        } else if (key == "sclera_radius") {
            c.sclera_radius = detail::get_as<double>(v, key);
        } else if (key == "factors") {
            require(v.is_array(), ErrorKind::InvalidArgument, "config: 'factors' must be an array");
            c.factors.clear();
            for (const auto& f : v) {
                require(f.is_object() && f.contains("label") && f.contains("size"), ErrorKind::InvalidArgument,
                        "config: each factor needs 'label' and 'size'");
                c.factors.push_back({detail::get_as<std::string>(f["label"], "factors.label"),
                                     detail::get_as<int>(f["size"], "factors.size")});
            }
        } else if (key == "blur_sigma") {
            if (v.is_null())
                c.blur_sigma.reset();
            else
                c.blur_sigma = detail::get_as<double>(v, key);
        } else if (key == "methods") {
            c.methods = detail::get_as<std::vector<std::string>>(v, key);
        } else if (key == "reproject") {
            require(v.is_object(), ErrorKind::InvalidArgument, "config: 'reproject' must be an object");
            for (const auto& [k, x] : v.items()) {
                if (k == "tau")
                    c.tau = detail::get_as<double>(x, "reproject.tau");
                else if (k == "tol")
                    c.reproject_tol = detail::get_as<double>(x, "reproject.tol");
                else if (k == "max_iter")
                    c.reproject_max_iter = detail::get_as<int>(x, "reproject.max_iter");
                else
                    fail(ErrorKind::InvalidArgument, "config: unknown key 'reproject." + k + "'");
            }
        } else if (key == "comparators") {
            c.comparators = detail::get_as<std::vector<std::string>>(v, key);
        } else if (key == "train_subjects") {
            c.train_subjects = detail::get_as<int>(v, key);
        } else if (key == "fusion_split") {
            c.fusion_split = detail::get_as<bool>(v, key);
        } else if (key == "fsim") {
            c.fsim = detail::get_as<bool>(v, key);
        } else if (key == "backends") {
            c.backends = detail::get_as<std::map<std::string, std::string>>(v, key);
        } else if (key == "patch") {
            require(v.is_object(), ErrorKind::InvalidArgument, "config: 'patch' must be an object");
            for (const auto& [k, x] : v.items()) {
                if (k == "size")
                    c.patch.patch_size = detail::get_as<int>(x, "patch.size");
                else if (k == "stride")
                    c.patch.stride = detail::get_as<int>(x, "patch.stride");
                else if (k == "variance_retention")
                    c.patch.variance_retention = detail::get_as<double>(x, "patch.variance_retention");
                else
                    fail(ErrorKind::InvalidArgument, "config: unknown key 'patch." + k + "'");
            }
        } else if (key == "jobs") {
            c.jobs = detail::get_as<unsigned>(v, key);
        } else {
            fail(ErrorKind::InvalidArgument, "config: unknown key '" + key + "'");
        }
    }
}

inline RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::MissingInput, "cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        fail(ErrorKind::InvalidArgument, "config " + path.string() + ": " + e.what());
    }
    RunConfig c;
    apply_config(c, j, path.parent_path());
    return c;
}

/// Hash of the effective configuration, excluding where it runs and how wide.
inline std::string config_hash(const RunConfig& c) {
    json j = config_to_json(c);
    j.erase("manifest");
    if (!c.manifest.empty() && fs::exists(c.manifest)) j["manifest_content"] = hex64(hash_file(c.manifest));
    Fnv1a h;
    h.update(j.dump());
    return hex64(h.digest());
}

// ------------------------------------------------------------ method labels

struct MethodSpec {
    std::string base; // bilinear | bicubic | eigenpatch | backend:<name> | original
    bool reproject = false;

    std::string label() const { return reproject ? base + "+reproject" : base; }
    bool is_backend() const { return base.rfind("backend:", 0) == 0; }
    std::string backend_name() const { return base.substr(8); }
};

inline MethodSpec parse_method(std::string s, bool reproject_flag = false) {
    MethodSpec m;
    constexpr std::string_view suffix = "+reproject";
    if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
        m.reproject = true;
        s.resize(s.size() - suffix.size());
    }
    m.reproject = m.reproject || reproject_flag;
    m.base = s;
    const bool known = s == "bilinear" || s == "bicubic" || s == "eigenpatch" || s == "original" ||
                       (m.is_backend() && s.size() > 8);
    require(known, ErrorKind::InvalidArgument,
            "unknown method '" + s + "' (expected bilinear, bicubic, eigenpatch or backend:<name>)");
    require(!(s == "original" && m.reproject), ErrorKind::InvalidArgument, "'original' cannot be re-projected");
    return m;
}

inline std::string path_token(std::string s) {
    for (char& ch : s)
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '.')) ch = '_';
    return s;
}

// ------------------------------------------------------------ small file I/O

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    out << text;
    require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

inline json read_json(const fs::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::MissingInput, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Data, path.string() + ": " + e.what());
    }
}

inline void fresh_dir(const fs::path& dir) {
    std::error_code ec;
    fs::remove_all(dir, ec);
    fs::create_directories(dir, ec);
    require(!ec && fs::is_directory(dir), ErrorKind::Io, "cannot create directory " + dir.string());
}

inline std::string fmt(const char* spec, double v) {
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

inline double parse_field(const std::string& s, const std::string& where) {
    if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    require(end && *end == '\0', ErrorKind::Data, where + ": bad number '" + s + "'");
    return v;
}

inline std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::MissingInput, "cannot open " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)) && irissr::detail::trim(line) == header, ErrorKind::Data,
            path.string() + ": expected header '" + header + "'");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (irissr::detail::trim(line).empty()) continue;
        rows.push_back(irissr::detail::split_csv(line));
    }
    return rows;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

// ------------------------------------------------------------------- stamps

inline fs::path stamp_file(const fs::path& dir) { return dir / "stamp.json"; }

/// Hash of a stage's stamp, used as the upstream part of downstream keys.
inline std::string stamp_digest(const fs::path& dir) { return hex64(hash_file(stamp_file(dir))); }

inline bool stamp_files_match(const fs::path& dir, const json& st, std::string* bad = nullptr) {
    for (const auto& [name, h] : st.at("files").items()) {
        const fs::path p = dir / name;
        if (!fs::exists(p) || hex64(hash_file(p)) != h.get<std::string>()) {
            if (bad) *bad = p.string();
            return false;
        }
    }
    return true;
}

/// Loads and verifies the stamp of a finished upstream stage.
inline json require_stage(const fs::path& dir, const std::string& producer) {
    require(fs::exists(stamp_file(dir)), ErrorKind::MissingInput,
            "missing upstream artifacts in " + dir.string() + " (run '" + producer + "' first)");
    json st = detail::read_json(stamp_file(dir));
    require(st.contains("files") && st["files"].is_object(), ErrorKind::Data, "malformed stamp in " + dir.string());
    std::string bad;
    const bool ok = stamp_files_match(dir, st, &bad);
    require(ok, ErrorKind::Data,
            "artifact " + bad + " is missing or differs from its stamp (rerun '" + producer + "')");
    return st;
}

inline bool up_to_date(const fs::path& dir, const std::string& key) {
    if (!fs::exists(stamp_file(dir))) return false;
    try {
        const json st = detail::read_json(stamp_file(dir));
        return st.value("key", "") == key && stamp_files_match(dir, st);
    } catch (const std::exception&) {
        return false;
    }
}

inline void write_stamp(const fs::path& dir, const std::string& stage, const std::string& key, json meta,
                        const std::vector<std::string>& files, double seconds) {
    json st;
    st["stage"] = stage;
    st["key"] = key;
    st["meta"] = std::move(meta);
    json fh = json::object();
    for (const auto& f : files) fh[f] = hex64(hash_file(dir / f));
    st["files"] = fh;
    detail::write_text(stamp_file(dir), st.dump(2) + "\n");
    // Wall-clock time lives beside the stamp so the stamp itself stays reproducible.
    detail::write_text(dir / "timing.json", json{{"stage", stage}, {"seconds", seconds}}.dump() + "\n");
}

inline std::string make_key(const json& parts) {
    Fnv1a h;
    h.update(parts.dump());
    return hex64(h.digest());
}

inline void log(const std::string& msg) { std::cerr << "iris_sr: " << msg << '\n'; }

// ------------------------------------------------------------- directories

inline fs::path prep_dir(const RunConfig& c) { return c.out / "prep"; }
inline fs::path lr_dir(const RunConfig& c, const FactorSpec& f) { return c.out / "lr" / path_token(f.label); }
inline fs::path model_dir(const RunConfig& c, const FactorSpec& f) { return c.out / "models" / path_token(f.label); }
inline fs::path sr_dir(const RunConfig& c, const MethodSpec& m, const FactorSpec& f) {
    return c.out / "sr" / path_token(m.label()) / path_token(f.label);
}
inline fs::path quality_dir(const RunConfig& c, const MethodSpec& m, const FactorSpec& f) {
    return c.out / "quality" / path_token(m.label()) / path_token(f.label);
}
inline fs::path match_dir(const RunConfig& c, const MethodSpec& m, const FactorSpec& f) {
    return c.out / "match" / path_token(m.label()) / path_token(f.label);
}
inline fs::path reports_dir(const RunConfig& c) { return c.out / "reports"; }

/// Pseudo-factor for comparisons on the preprocessed originals.
inline FactorSpec original_factor(const RunConfig& c) { return {"1/1", c.crop_side}; }

// -------------------------------------------------------------------- synth

struct SynthOptions {
    int seeds = 20;
    std::uint64_t seed_base = 1;
    int sessions = 3;
    int size = 260; // raw frame; prep rescales to the crop geometry
    fs::path out = "synth";
    unsigned jobs = 1;
};

/// Writes a synthetic corpus (PGM frames + manifest.csv) and returns the manifest path.
inline fs::path cmd_synth(const SynthOptions& o) {
    require(o.seeds >= 1, ErrorKind::InvalidArgument, "synth: --seeds must be >= 1");
    require(o.sessions >= 1, ErrorKind::InvalidArgument, "synth: --sessions must be >= 1");
    require(o.size >= 64, ErrorKind::InvalidArgument, "synth: --size must be >= 64");
    std::error_code ec;
    fs::create_directories(o.out, ec);
    require(!ec && fs::is_directory(o.out), ErrorKind::Io, "cannot create directory " + o.out.string());

    const std::size_t n = static_cast<std::size_t>(o.seeds) * static_cast<std::size_t>(o.sessions);
    std::vector<ManifestRecord> records(n);
    parallel_for(n, o.jobs, [&](std::size_t i) {
        const auto seed = o.seed_base + i / static_cast<std::size_t>(o.sessions);
        const int session = static_cast<int>(i % static_cast<std::size_t>(o.sessions));
        char subject[32];
        std::snprintf(subject, sizeof subject, "s%04llu", static_cast<unsigned long long>(seed));
        const std::string name = std::string(subject) + "_" + std::to_string(session) + ".pgm";
        const auto eye = synth_iris(seed, o.size, session);
        write_pgm(o.out / name, eye.image);
        records[i] = {name, subject, session, eye.annotation};
    });
    const fs::path manifest = o.out / "manifest.csv";
    detail::write_text(manifest, format_manifest(records));
    return manifest;
}

// --------------------------------------------------------------------- prep

struct PrepRecord {
    std::string id;
    std::string subject;
    int session = 0;
    IrisAnnotation annotation;
};

inline std::string image_id(const ManifestRecord& r) { return fs::path(r.image_path).stem().string(); }

inline void cmd_prep(const RunConfig& c) {
    c.validate();
    require(!c.manifest.empty(), ErrorKind::InvalidArgument, "prep: no manifest given (--manifest or config 'manifest')");
    const auto t0 = std::chrono::steady_clock::now();
    const auto records = load_manifest(c.manifest);
    require(!records.empty(), ErrorKind::Data, "prep: manifest " + c.manifest.string() + " has no records");
    const fs::path dir = prep_dir(c);
    const std::string key = make_key({{"stage", "prep"},
                                      {"manifest", hex64(hash_file(c.manifest))},
                                      {"crop_side", c.crop_side},
                                      {"sclera", c.target_sclera()}});
    if (up_to_date(dir, key)) {
        log("prep: up to date");
        return;
    }

    // Ids are file stems; repeated stems get a numeric suffix in manifest order.
    std::vector<std::string> ids(records.size());
    std::map<std::string, int> seen;
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::string id = path_token(image_id(records[i]));
        const int k = seen[id]++;
        ids[i] = k == 0 ? id : id + "_" + std::to_string(k);
    }
    const fs::path base = c.manifest.parent_path();
    detail::fresh_dir(dir / "images");

    std::vector<std::optional<ManifestRecord>> kept(records.size());
    parallel_for(records.size(), c.jobs, [&](std::size_t i) {
        const auto& r = records[i];
        const fs::path src = fs::path(r.image_path).is_relative() ? base / r.image_path : fs::path(r.image_path);
        const Image img = read_image(src);
        const auto norm = normalize_sclera(img, r.annotation, c.target_sclera());
        const auto crop = crop_square(norm.image, norm.annotation, c.crop_side);
        if (!crop) return;
        write_pgm(dir / "images" / (ids[i] + ".pgm"), crop->image);
        kept[i] = ManifestRecord{"images/" + ids[i] + ".pgm", r.subject_id, r.session, crop->annotation};
    });

    std::vector<ManifestRecord> out;
    std::string discarded = "path,subject,session,reason\n";
    std::vector<std::string> files{"manifest.csv", "discarded.csv"};
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (kept[i]) {
            out.push_back(*kept[i]);
            files.push_back(kept[i]->image_path);
        } else {
            discarded += records[i].image_path + "," + records[i].subject_id + "," +
                         std::to_string(records[i].session) + "," + std::string(kDiscardCropOutOfBounds) + "\n";
        }
    }
    require(!out.empty(), ErrorKind::Data, "prep: every record was discarded (crop leaves the image)");
    detail::write_text(dir / "manifest.csv", format_manifest(out));
    detail::write_text(dir / "discarded.csv", discarded);
    write_stamp(dir, "prep", key,
                {{"records", records.size()}, {"kept", out.size()}, {"discarded", records.size() - out.size()}},
                files, detail::seconds_since(t0));
    log("prep: " + std::to_string(out.size()) + " kept, " + std::to_string(records.size() - out.size()) +
        " discarded");
}

struct Corpus {
    std::vector<PrepRecord> all;
    std::vector<PrepRecord> train;
    std::vector<PrepRecord> target;
    std::string digest; // prep stamp digest
};

inline Corpus load_corpus(const RunConfig& c) {
    const fs::path dir = prep_dir(c);
    require_stage(dir, "prep");
    const auto records = load_manifest(dir / "manifest.csv");
    Corpus k;
    k.digest = stamp_digest(dir);
    auto to_prep = [](const ManifestRecord& r) {
        return PrepRecord{fs::path(r.image_path).stem().string(), r.subject_id, r.session, r.annotation};
    };
    for (const auto& r : records) k.all.push_back(to_prep(r));
    const auto split = split_by_subject(records, static_cast<std::size_t>(c.train_subjects));
    for (const auto& r : split.train) k.train.push_back(to_prep(r));
    for (const auto& r : split.target) k.target.push_back(to_prep(r));
    require(!k.target.empty(), ErrorKind::InvalidArgument,
            "train_subjects = " + std::to_string(c.train_subjects) + " leaves no target subjects");
    return k;
}

inline Image load_hr(const RunConfig& c, const PrepRecord& r) {
    return read_image(prep_dir(c) / "images" / (r.id + ".pgm"));
}

// ------------------------------------------------------------------ degrade

inline void cmd_degrade(const RunConfig& c) {
    c.validate();
    const Corpus k = load_corpus(c);
    for (const auto& f : c.active_factors()) {
        const auto t0 = std::chrono::steady_clock::now();
        const fs::path dir = lr_dir(c, f);
        const double sigma = c.sigma_for(f);
        const std::string key =
            make_key({{"stage", "degrade"}, {"prep", k.digest}, {"size", f.lr_size}, {"sigma", sigma}});
        if (up_to_date(dir, key)) {
            log("degrade " + f.label + ": up to date");
            continue;
        }
        detail::fresh_dir(dir);
        parallel_for(k.all.size(), c.jobs, [&](std::size_t i) {
            write_pgm(dir / (k.all[i].id + ".pgm"), degrade(load_hr(c, k.all[i]), f.lr_size, f.lr_size, sigma));
        });
        std::vector<std::string> files;
        for (const auto& r : k.all) files.push_back(r.id + ".pgm");
        write_stamp(dir, "degrade", key,
                    {{"factor", f.label}, {"lr_size", f.lr_size}, {"sigma", sigma}, {"images", k.all.size()}}, files,
                    detail::seconds_since(t0));
        log("degrade " + f.label + ": " + std::to_string(k.all.size()) + " images at " + std::to_string(f.lr_size) +
            "x" + std::to_string(f.lr_size));
    }
}

// ----------------------------------------------------------------------- sr

namespace detail {

inline std::shared_ptr<const EigenPatchModel> eigen_model(const RunConfig& c, const Corpus& k, const FactorSpec& f,
                                                          double sigma) {
    require(!k.train.empty(), ErrorKind::InvalidArgument,
            "eigenpatch needs a training split (set train_subjects > 0)");
    std::vector<Image> hr(k.train.size());
    parallel_for(hr.size(), c.jobs, [&](std::size_t i) { hr[i] = load_hr(c, k.train[i]); });
    const fs::path dir = model_dir(c, f);
    const fs::path file = dir / "eigenpatch.bin";
    const auto th = training_set_hash(hr);
    if (fs::exists(file)) {
        try {
            auto m = load_model(file);
            const auto& meta = m.meta;
            if (meta.training_hash == th && meta.lr_w == f.lr_size && meta.lr_h == f.lr_size &&
                meta.hr_w == c.crop_side && meta.sigma == sigma && meta.patch == c.patch)
                return std::make_shared<const EigenPatchModel>(std::move(m));
        } catch (const Error&) {
            // stale or foreign file: retrain below
        }
    }
    auto m = train_eigenpatch(hr, f.lr_size, f.lr_size, sigma, c.patch);
    std::error_code ec;
    fs::create_directories(dir, ec);
    save_model(file, m);
    log("eigenpatch " + f.label + ": trained on " + std::to_string(hr.size()) + " images");
    return std::make_shared<const EigenPatchModel>(std::move(m));
}

inline double nominal_factor(const FactorSpec& f, int crop_side) {
    if (f.label.rfind("1/", 0) == 0) {
        char* end = nullptr;
        const double d = std::strtod(f.label.c_str() + 2, &end);
        if (end && *end == '\0' && d >= 1.0) return d;
    }
    return static_cast<double>(crop_side) / f.lr_size;
}

} // namespace detail

inline void cmd_sr(const RunConfig& c, const MethodSpec& m) {
    c.validate();
    require(m.base != "original", ErrorKind::InvalidArgument, "sr: 'original' is not a reconstruction method");
    const Corpus k = load_corpus(c);
    for (const auto& f : c.active_factors()) {
        const auto t0 = std::chrono::steady_clock::now();
        const fs::path in = lr_dir(c, f);
        const json lr_stamp = require_stage(in, "degrade");
        const double sigma = lr_stamp.at("meta").at("sigma").get<double>();

        UpscalerSpec up;
        json params = {{"stage", "sr"}, {"lr", stamp_digest(in)}, {"method", m.label()}};
        if (m.base == "bilinear") {
            up = UpscalerSpec::bilinear();
        } else if (m.base == "bicubic") {
            up = UpscalerSpec::bicubic();
        } else if (m.base == "eigenpatch") {
            params["prep"] = k.digest;
            params["train_subjects"] = c.train_subjects;
            params["patch"] = {c.patch.patch_size, c.patch.stride, c.patch.variance_retention};
        } else {
            const auto it = c.backends.find(m.backend_name());
            require(it != c.backends.end(), ErrorKind::InvalidArgument,
                    "backend '" + m.backend_name() + "' is not defined in the config 'backends' table");
            up = UpscalerSpec::external(m.backend_name(), it->second, default_exchange_dir());
            params["command"] = it->second;
        }
        if (m.reproject) params["reproject"] = {c.tau, c.reproject_tol, c.reproject_max_iter};
        const fs::path dir = sr_dir(c, m, f);
        const std::string key = make_key(params);
        if (up_to_date(dir, key)) {
            log("sr " + m.label() + " " + f.label + ": up to date");
            continue;
        }
        if (m.base == "eigenpatch") up = UpscalerSpec::eigenpatch(detail::eigen_model(c, k, f, sigma));
        detail::fresh_dir(dir);

        const double nominal = detail::nominal_factor(f, c.crop_side);
        std::vector<ReprojectResult> traces(k.target.size());
        std::vector<int> passes(k.target.size());
        parallel_for(k.target.size(), c.jobs, [&](std::size_t i) {
            const Image lr = read_image(in / (k.target[i].id + ".pgm"));
            auto res = super_resolve(lr, c.crop_side, c.crop_side, up, nominal);
            passes[i] = res.passes;
            Image out = std::move(res.image);
            if (m.reproject) {
                ReprojectConfig rc{c.tau, c.reproject_tol, c.reproject_max_iter, sigma, lr.width(), lr.height()};
                traces[i] = reproject(out, lr, rc);
                out = traces[i].image;
                traces[i].image = Image(1, 1);
            }
            write_pgm(dir / (k.target[i].id + ".pgm"), out);
        });

        std::vector<std::string> files;
        for (const auto& r : k.target) files.push_back(r.id + ".pgm");
        json meta = {{"method", m.label()}, {"factor", f.label}, {"lr_size", f.lr_size},
                     {"sigma", sigma},      {"passes", passes.empty() ? 0 : passes.front()}};
        if (m.reproject) {
            std::string csv = "image,iterations,converged,initial_residual,final_residual\n";
            int converged = 0;
            for (std::size_t i = 0; i < k.target.size(); ++i) {
                const auto& t = traces[i];
                converged += t.converged;
                csv += k.target[i].id + "," + std::to_string(t.iterations) + "," + (t.converged ? "1" : "0") + "," +
                       detail::fmt("%.10g", t.initial_residual) + "," + detail::fmt("%.10g", t.final_residual) + "\n";
            }
            detail::write_text(dir / "reproject.csv", csv);
            files.push_back("reproject.csv");
            meta["reproject"] = {{"tau", c.tau},
                                 {"tol", c.reproject_tol},
                                 {"max_iter", c.reproject_max_iter},
                                 {"converged", converged}};
        }
        write_stamp(dir, "sr", key, meta, files, detail::seconds_since(t0));
        log("sr " + m.label() + " " + f.label + ": " + std::to_string(k.target.size()) + " images");
    }
}

// ------------------------------------------------------------------ quality

inline constexpr const char* kQualityHeader = "method,factor,region,psnr,ssim,fsim";
inline constexpr const char* kPerImageHeader = "image,region,psnr,ssim,fsim";

inline void cmd_quality(const RunConfig& c, const MethodSpec& m) {
    c.validate();
    require(m.base != "original", ErrorKind::InvalidArgument, "quality: 'original' has no reconstruction to score");
    const Corpus k = load_corpus(c);
    for (const auto& f : c.active_factors()) {
        const auto t0 = std::chrono::steady_clock::now();
        const fs::path in = sr_dir(c, m, f);
        require_stage(in, "sr --method " + m.label() + " --factor " + f.label);
        const fs::path dir = quality_dir(c, m, f);
        const std::string key = make_key({{"stage", "quality"},
                                          {"sr", stamp_digest(in)},
                                          {"prep", k.digest},
                                          {"fsim", c.fsim},
                                          {"train_subjects", c.train_subjects}});
        if (up_to_date(dir, key)) {
            log("quality " + m.label() + " " + f.label + ": up to date");
            continue;
        }
        detail::fresh_dir(dir);
        std::vector<RegionReports> reps(k.target.size());
        parallel_for(k.target.size(), c.jobs, [&](std::size_t i) {
            const Image ref = load_hr(c, k.target[i]);
            const Image test = read_image(in / (k.target[i].id + ".pgm"));
            reps[i] = region_report(ref, test, k.target[i].annotation, IrisCodeConfig{}, c.fsim);
        });
        std::string csv = std::string(kPerImageHeader) + "\n";
        for (std::size_t i = 0; i < reps.size(); ++i)
            for (const auto* q : {&reps[i].full, &reps[i].iris})
                csv += k.target[i].id + "," + region_name(q->region) + "," + detail::fmt("%.10f", q->psnr) + "," +
                       detail::fmt("%.10f", q->ssim) + "," + detail::fmt("%.10f", q->fsim) + "\n";
        detail::write_text(dir / "per_image.csv", csv);
        write_stamp(dir, "quality", key,
                    {{"method", m.label()}, {"factor", f.label}, {"lr_size", f.lr_size}, {"images", reps.size()}},
                    {"per_image.csv"}, detail::seconds_since(t0));
        log("quality " + m.label() + " " + f.label + ": " + std::to_string(reps.size()) + " images");
    }
}

// -------------------------------------------------------------------- match

inline constexpr const char* kScoreHeader = "probe,gallery,score,comparator";

inline std::vector<ImageRef> image_refs(const std::vector<PrepRecord>& records) {
    std::vector<ImageRef> refs;
    for (const auto& r : records) refs.push_back({r.subject, r.id});
    return refs;
}

/// Normalized Hamming distance, or 1.0 (reject) when no shift leaves
/// comparable bits.
inline double lg_score(const IrisTemplate& a, const IrisTemplate& b) {
    try {
        return hamming(a, b);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Data) throw;
        return 1.0;
    }
}

inline void match_factor(const RunConfig& c, const Corpus& k, const MethodSpec& m, const FactorSpec& f) {
    const auto t0 = std::chrono::steady_clock::now();
    const bool original = m.base == "original";
    const fs::path in = original ? prep_dir(c) / "images" : sr_dir(c, m, f);
    const std::string upstream =
        original ? k.digest : (require_stage(in, "sr --method " + m.label() + " --factor " + f.label), stamp_digest(in));
    const bool lg = c.wants("lg") || c.wants("fused");
    const bool sift = c.wants("sift") || c.wants("fused");
    const fs::path dir = match_dir(c, m, f);
    const std::string key = make_key({{"stage", "match"},
                                      {"input", upstream},
                                      {"prep", k.digest},
                                      {"lg", lg},
                                      {"sift", sift},
                                      {"train_subjects", c.train_subjects}});
    if (up_to_date(dir, key)) {
        log("match " + m.label() + " " + f.label + ": up to date");
        return;
    }
    detail::fresh_dir(dir);
    if (lg) fs::create_directories(dir / "templates");
    if (sift) fs::create_directories(dir / "sift");

    const auto& tg = k.target;
    std::vector<IrisTemplate> tpl(tg.size());
    std::vector<std::vector<Feature>> feats(tg.size());
    parallel_for(tg.size(), c.jobs, [&](std::size_t i) {
        const Image img = read_image(in / (tg[i].id + ".pgm"));
        if (lg) {
            tpl[i] = encode(unwrap(img, tg[i].annotation));
            save_template(dir / "templates" / (tg[i].id + ".tpl"), tpl[i]);
        }
        if (sift) {
            feats[i] = filter_annulus(detect_describe(img), tg[i].annotation);
            save_features(dir / "sift" / (tg[i].id + ".sift"), feats[i]);
        }
    });

    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < tg.size(); ++i) index[tg[i].id] = i;
    const auto trials = make_trials(image_refs(tg));
    std::vector<TrialPair> pairs = trials.genuine;
    pairs.insert(pairs.end(), trials.impostor.begin(), trials.impostor.end());
    std::vector<double> lg_scores(pairs.size());
    std::vector<int> sift_scores(pairs.size());
    parallel_for(pairs.size(), c.jobs, [&](std::size_t t) {
        const auto a = index.at(pairs[t].probe);
        const auto b = index.at(pairs[t].gallery);
        if (lg) lg_scores[t] = lg_score(tpl[a], tpl[b]);
        if (sift) sift_scores[t] = match_score(feats[a], feats[b]);
    });

    std::string csv = std::string(kScoreHeader) + "\n";
    for (std::size_t t = 0; t < pairs.size(); ++t) {
        if (lg) csv += pairs[t].probe + "," + pairs[t].gallery + "," + detail::fmt("%.10f", lg_scores[t]) + ",LG\n";
        if (sift)
            csv += pairs[t].probe + "," + pairs[t].gallery + "," + std::to_string(sift_scores[t]) + ",SIFT\n";
    }
    detail::write_text(dir / "scores.csv", csv);
    std::vector<std::string> files{"scores.csv"};
    for (const auto& r : tg) {
        if (lg) files.push_back("templates/" + r.id + ".tpl");
        if (sift) files.push_back("sift/" + r.id + ".sift");
    }
    write_stamp(dir, "match", key,
                {{"method", m.label()},
                 {"factor", f.label},
                 {"lr_size", f.lr_size},
                 {"genuine", trials.genuine.size()},
                 {"impostor", trials.impostor.size()}},
                files, detail::seconds_since(t0));
    log("match " + m.label() + " " + f.label + ": " + std::to_string(trials.genuine.size()) + " genuine, " +
        std::to_string(trials.impostor.size()) + " impostor");
}

inline void cmd_match(const RunConfig& c, const MethodSpec& m) {
    c.validate();
    const Corpus k = load_corpus(c);
    if (m.base == "original") {
        match_factor(c, k, m, original_factor(c));
        return;
    }
    for (const auto& f : c.active_factors()) match_factor(c, k, m, f);
}

// --------------------------------------------------------------------- eval

struct QualityRow {
    std::string method;
    std::string factor;
    int lr_size = 0;
    std::string region;
    double psnr = 0, ssim = 0, fsim = 0;
};

struct EerRow {
    std::string method;
    std::string factor;
    int lr_size = 0;
    std::string comparator;
    double eer = 0;
    EerResult curve;
};

namespace detail {

// Leaf directories two levels below `root` that carry a stamp, in path order.
inline std::vector<fs::path> stage_leaves(const fs::path& root) {
    std::vector<fs::path> out;
    if (!fs::is_directory(root)) return out;
    for (const auto& a : fs::directory_iterator(root)) {
        if (!a.is_directory()) continue;
        for (const auto& b : fs::directory_iterator(a.path()))
            if (b.is_directory() && fs::exists(stamp_file(b.path()))) out.push_back(b.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

template <class Row>
void sort_rows(std::vector<Row>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.lr_size != b.lr_size) return a.lr_size > b.lr_size;
        return a.method < b.method;
    });
}

} // namespace detail

struct EvalSummary {
    std::vector<QualityRow> quality;
    std::vector<EerRow> eer;
};

inline EvalSummary cmd_eval(const RunConfig& c) {
    c.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const Corpus k = load_corpus(c);
    const fs::path out = reports_dir(c);
    detail::fresh_dir(out);
    fs::create_directories(out / "roc");
    EvalSummary sum;
    json per_config = json::array();

    // Image quality: mean over target images, infinite PSNR capped for the table.
    for (const auto& dir : detail::stage_leaves(c.out / "quality")) {
        const json st = require_stage(dir, "quality");
        const auto& meta = st.at("meta");
        std::map<std::string, std::array<double, 4>> acc; // psnr, ssim, fsim, count
        for (const auto& row : detail::read_csv(dir / "per_image.csv", kPerImageHeader)) {
            require(row.size() == 5, ErrorKind::Data, dir.string() + ": malformed per_image.csv row");
            auto& a = acc[row[1]];
            a[0] += psnr_for_table(detail::parse_field(row[2], "psnr"));
            a[1] += detail::parse_field(row[3], "ssim");
            a[2] += detail::parse_field(row[4], "fsim");
            a[3] += 1;
        }
        for (const char* region : {"full", "iris"}) {
            const auto it = acc.find(region);
            if (it == acc.end()) continue;
            const auto& a = it->second;
            sum.quality.push_back({meta.at("method").get<std::string>(), meta.at("factor").get<std::string>(),
                                   meta.at("lr_size").get<int>(), region, a[0] / a[3],
                                   a[1] / a[3], a[2] / a[3]});
        }
    }
    detail::sort_rows(sum.quality);
    std::string qcsv = std::string(kQualityHeader) + "\n";
    for (const auto& q : sum.quality)
        qcsv += q.method + "," + q.factor + "," + q.region + "," + detail::fmt("%.4f", q.psnr) + "," +
                detail::fmt("%.4f", q.ssim) + "," + detail::fmt("%.4f", q.fsim) + "\n";
    detail::write_text(out / "quality.csv", qcsv);

    // Recognition: trials rebuilt from the target manifest, scores looked up.
    std::map<std::string, std::string> subject_of;
    for (const auto& r : k.target) subject_of[r.id] = r.subject;
    std::set<std::string> first_half;
    {
        std::vector<std::string> subjects;
        for (const auto& r : k.target)
            if (std::find(subjects.begin(), subjects.end(), r.subject) == subjects.end()) subjects.push_back(r.subject);
        std::sort(subjects.begin(), subjects.end());
        for (std::size_t i = 0; i < subjects.size() / 2; ++i) first_half.insert(subjects[i]);
    }
    const auto trial_pairs = make_trials(image_refs(k.target));

    for (const auto& dir : detail::stage_leaves(c.out / "match")) {
        const json st = require_stage(dir, "match");
        const auto& meta = st.at("meta");
        const auto method = meta.at("method").get<std::string>();
        const auto factor = meta.at("factor").get<std::string>();
        const int lr_size = meta.at("lr_size").get<int>();
        std::map<std::string, std::map<std::string, double>> scores; // comparator -> pair -> score
        for (const auto& row : detail::read_csv(dir / "scores.csv", kScoreHeader)) {
            require(row.size() == 4, ErrorKind::Data, dir.string() + ": malformed scores.csv row");
            scores[row[3]][row[0] + "\t" + row[1]] = detail::parse_field(row[2], "score");
        }
        auto column = [&](const std::string& comp, const TrialPair& p) {
            const auto& tab = scores[comp];
            const auto it = tab.find(p.probe + "\t" + p.gallery);
            require(it != tab.end(), ErrorKind::Data,
                    dir.string() + ": no " + comp + " score for " + p.probe + " vs " + p.gallery +
                        " (scores do not match the current manifest; rerun 'match')");
            return it->second;
        };

        std::vector<std::string> comps;
        std::vector<Polarity> pols;
        const std::vector<std::pair<std::string, Polarity>> known{{"lg", Polarity::GenuineLow},
                                                                  {"sift", Polarity::GenuineHigh}};
        for (const auto& [name, pol] : known) {
            const std::string upper = name == "lg" ? "LG" : "SIFT";
            if ((c.wants(name) || c.wants("fused")) && scores.count(upper)) {
                comps.push_back(upper);
                pols.push_back(pol);
            }
        }
        std::vector<Trial> all;
        for (int g = 0; g < 2; ++g)
            for (const auto& p : g == 0 ? trial_pairs.genuine : trial_pairs.impostor) {
                Trial t{p.probe, p.gallery, {}, g == 0};
                for (const auto& comp : comps) t.scores.push_back(column(comp, p));
                all.push_back(std::move(t));
            }
        if (all.empty() || comps.empty()) continue;

        std::vector<Trial> train = all, test = all;
        if (c.fusion_split) {
            train.clear();
            test.clear();
            for (const auto& t : all) {
                const bool a = first_half.count(subject_of.at(t.probe)) > 0;
                const bool b = first_half.count(subject_of.at(t.gallery)) > 0;
                if (a && b) train.push_back(t);
                if (!a && !b) test.push_back(t);
            }
        }
        auto has_both = [](const std::vector<Trial>& v) {
            bool g = false, i = false;
            for (const auto& t : v) (t.genuine ? g : i) = true;
            return g && i;
        };
        require(has_both(test), ErrorKind::Data,
                method + " " + factor + ": evaluation trials need both genuine and impostor comparisons");

        json cfg_json = {{"method", method},
                         {"factor", factor},
                         {"genuine", trial_pairs.genuine.size()},
                         {"impostor", trial_pairs.impostor.size()},
                         {"evaluated_trials", test.size()}};
        for (std::size_t col = 0; col < comps.size(); ++col) {
            const std::string lower = comps[col] == "LG" ? "lg" : "sift";
            if (!c.wants(lower)) continue;
            const auto r = trial_eer(test, col, pols[col]);
            sum.eer.push_back({method, factor, lr_size, comps[col], r.eer, r});
        }
        if (c.wants("fused") && comps.size() == 2) {
            require(has_both(train), ErrorKind::Data,
                    method + " " + factor + ": fusion training trials need both classes");
            const auto model = train_fusion(train, pols);
            const auto fused = fuse_scores(model, test);
            const auto r = trial_eer(fused, comps.size(), Polarity::GenuineHigh);
            sum.eer.push_back({method, factor, lr_size, "fused", r.eer, r});
            cfg_json["fusion"] = {{"weights", model.weights},
                                  {"iterations", model.iterations},
                                  {"converged", model.converged},
                                  {"training_trials", train.size()}};
        }
        per_config.push_back(cfg_json);
    }
    detail::sort_rows(sum.eer);
    std::string ecsv = "method,factor,comparator,eer\n";
    for (const auto& e : sum.eer) {
        ecsv += e.method + "," + e.factor + "," + e.comparator + "," + detail::fmt("%.6f", e.eer) + "\n";
        std::string roc = "threshold,far,frr\n";
        for (const auto& p : e.curve.roc)
            roc += detail::fmt("%.10g", p.threshold) + "," + detail::fmt("%.10g", p.far) + "," +
                   detail::fmt("%.10g", p.frr) + "\n";
        detail::write_text(out / "roc" / (path_token(e.method) + "_" + path_token(e.factor) + "_" + e.comparator + ".csv"),
                           roc);
    }
    detail::write_text(out / "eer.csv", ecsv);

    // Summary: configuration, versions and the wall-clock time of every stage found.
    json timings = json::object();
    for (const auto& p : fs::recursive_directory_iterator(c.out)) {
        if (p.path().filename() != "timing.json") continue;
        const auto rel = fs::relative(p.path().parent_path(), c.out).generic_string();
        timings[rel] = detail::read_json(p.path()).value("seconds", 0.0);
    }
    timings["reports"] = detail::seconds_since(t0);
    const json prep_meta = detail::read_json(stamp_file(prep_dir(c))).at("meta");
    json summary = {
        {"config_hash", config_hash(c)},
        {"config", config_to_json(c)},
        {"versions",
         {{"irissr", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"fftw", std::string(fftw_version)},
          {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                       "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}}},
        {"corpus",
         {{"records", prep_meta.value("records", 0)},
          {"discarded", prep_meta.value("discarded", 0)},
          {"train_images", k.train.size()},
          {"target_images", k.target.size()}}},
        {"recognition", per_config},
        {"timings_seconds", timings},
    };
    detail::write_text(out / "summary.json", summary.dump(2) + "\n");
    log("eval: " + std::to_string(sum.quality.size()) + " quality rows, " + std::to_string(sum.eer.size()) +
        " EER rows -> " + out.string());
    return sum;
}

// ---------------------------------------------------------------------- run

/// Every stage for every configured method and factor, then eval.
inline EvalSummary cmd_run(const RunConfig& c) {
    c.validate();
    std::vector<MethodSpec> methods;
    for (const auto& s : c.methods) methods.push_back(parse_method(s));
    cmd_prep(c);
    cmd_degrade(c);
    const Corpus k = load_corpus(c);
    match_factor(c, k, parse_method("original"), original_factor(c));
    for (const auto& m : methods) {
        if (m.base == "original") continue;
        cmd_sr(c, m);
        cmd_quality(c, m);
        for (const auto& f : c.active_factors()) match_factor(c, k, m, f);
    }
    return cmd_eval(c);
}

// ------------------------------------------------------------ exit codes

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kMissingInput = 3, kUnwritable = 4, kBackend = 5, kDataError = 6 };

inline int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::InvalidArgument: return kConfig;
    case ErrorKind::MissingInput: return kMissingInput;
    case ErrorKind::Io: return kUnwritable;
    case ErrorKind::Backend: return kBackend;
    case ErrorKind::Parse:
    case ErrorKind::Data:
    case ErrorKind::DimensionMismatch: return kDataError;
    }
    return kOther;
}

} // namespace irissr::pipeline
