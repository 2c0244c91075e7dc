// iris_sr: command-line driver for the super-resolution evaluation pipeline.
//
//   iris_sr synth   --seeds 20 --out corpus
//   iris_sr prep    --manifest corpus/manifest.csv --out work
//   iris_sr degrade --out work [--factor 1/16]
//   iris_sr sr      --out work --method bicubic [--reproject] [--factor 1/16]
//   iris_sr quality --out work --method bicubic [--fsim]
//   iris_sr match   --out work --method bicubic [--comparators lg,sift]
//   iris_sr eval    --out work [--fusion-split]
//   iris_sr run     --config run.json
//
// Exit codes: 0 ok, 1 unexpected, 2 bad config/arguments, 3 missing input,
// 4 unwritable output, 5 backend failure, 6 bad data.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "irissr/pipeline.hpp"

namespace pl = irissr::pipeline;

namespace {

struct Flags {
    std::string config;
    std::string out;
    std::string manifest;
    unsigned jobs = 0;
    std::vector<std::string> factors;
    std::vector<std::string> methods;
    bool reproject = false;
    std::optional<double> tau;
    std::optional<double> tol;
    std::optional<int> max_iter;
    std::vector<std::string> comparators;
    std::optional<int> train_subjects;
    std::optional<double> sigma;
    bool fusion_split = false;
    bool fsim = false;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON run configuration (flags override it)");
    cmd->add_option("--out", f.out, "work directory");
    cmd->add_option("--jobs", f.jobs, "worker threads (outputs do not depend on it)")->check(CLI::PositiveNumber);
    cmd->add_option("--manifest", f.manifest, "input manifest CSV (path,subject,session,px,py,pr,ir,sr)");
    cmd->add_option("--factor", f.factors, "factor label(s) from the factor table, e.g. 1/16")->delimiter(',');
    cmd->add_option("--train-subjects", f.train_subjects, "first N sorted subjects form the training split");
    cmd->add_option("--sigma", f.sigma, "degradation blur sigma in HR pixels (default 0.5 * factor)");
    cmd->add_option("--comparators", f.comparators, "lg, sift, fused")->delimiter(',');
    cmd->add_flag("--fsim", f.fsim, "also compute FSIM in quality reports");
    cmd->add_flag("--fusion-split", f.fusion_split, "train fusion on half the subjects, evaluate on the rest");
}

void add_method(CLI::App* cmd, Flags& f, bool required) {
    auto* m = cmd->add_option("--method", f.methods, "bilinear | bicubic | eigenpatch | backend:<name>");
    if (required) m->required();
    cmd->add_flag("--reproject", f.reproject, "post-process with iterative re-projection");
    cmd->add_option("--tau", f.tau, "re-projection step");
    cmd->add_option("--reproject-tol", f.tol, "stop when the mean absolute update falls below this");
    cmd->add_option("--reproject-max-iter", f.max_iter, "iteration cap");
}

pl::RunConfig build_config(const Flags& f) {
    pl::RunConfig c = f.config.empty() ? pl::RunConfig{} : pl::load_config(f.config);
    if (!f.out.empty()) c.out = f.out;
    if (!f.manifest.empty()) c.manifest = f.manifest;
    if (f.jobs) c.jobs = f.jobs;
    if (!f.factors.empty()) c.selected = f.factors;
    if (f.tau) c.tau = *f.tau;
    if (f.tol) c.reproject_tol = *f.tol;
    if (f.max_iter) c.reproject_max_iter = *f.max_iter;
    if (!f.comparators.empty()) c.comparators = f.comparators;
    if (f.train_subjects) c.train_subjects = *f.train_subjects;
    if (f.sigma) c.blur_sigma = *f.sigma;
    if (f.fusion_split) c.fusion_split = true;
    if (f.fsim) c.fsim = true;
    c.validate();
    return c;
}

pl::MethodSpec single_method(const Flags& f) {
    if (f.methods.size() != 1)
        irissr::fail(irissr::ErrorKind::InvalidArgument, "give exactly one --method for this command");
    return pl::parse_method(f.methods.front(), f.reproject);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Iris super-resolution evaluation pipeline"};
    app.require_subcommand(1);
    Flags f;

    pl::SynthOptions so;
    auto* synth = app.add_subcommand("synth", "write a synthetic eye corpus with manifest");
    synth->add_option("--seeds", so.seeds, "number of identities");
    synth->add_option("--seed-base", so.seed_base, "first identity seed");
    synth->add_option("--sessions", so.sessions, "images per identity");
    synth->add_option("--size", so.size, "frame side in pixels");
    std::string synth_out = "synth";
    synth->add_option("--out", synth_out, "corpus directory");
    synth->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);

    auto* prep = app.add_subcommand("prep", "normalize sclera radius and crop around the pupil");
    auto* deg = app.add_subcommand("degrade", "simulate low-resolution images for each factor");
    auto* sr = app.add_subcommand("sr", "reconstruct the LR images");
    auto* qual = app.add_subcommand("quality", "PSNR/SSIM(/FSIM) of reconstructions, full image and iris");
    auto* match = app.add_subcommand("match", "LG and SIFT comparison scores");
    auto* eval = app.add_subcommand("eval", "quality and EER tables, ROC points, run summary");
    auto* run = app.add_subcommand("run", "all stages for the configured methods and factors");
    for (auto* cmd : {prep, deg, sr, qual, match, eval, run}) add_common(cmd, f);
    add_method(sr, f, true);
    add_method(qual, f, true);
    add_method(match, f, false);
    add_method(run, f, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : pl::kConfig;
    }

    try {
        if (synth->parsed()) {
            so.out = synth_out;
            so.jobs = f.jobs ? f.jobs : 1;
            std::cout << pl::cmd_synth(so).string() << '\n';
            return 0;
        }
        const pl::RunConfig c = build_config(f);
        if (prep->parsed()) {
            pl::cmd_prep(c);
        } else if (deg->parsed()) {
            pl::cmd_degrade(c);
        } else if (sr->parsed()) {
            pl::cmd_sr(c, single_method(f));
        } else if (qual->parsed()) {
            pl::cmd_quality(c, single_method(f));
        } else if (match->parsed()) {
            pl::cmd_match(c, f.methods.empty() ? pl::parse_method("original") : single_method(f));
        } else if (eval->parsed()) {
            pl::cmd_eval(c);
        } else if (run->parsed()) {
            pl::RunConfig rc = c;
            if (!f.methods.empty()) {
                rc.methods.clear();
                for (const auto& m : f.methods) rc.methods.push_back(pl::parse_method(m, f.reproject).label());
            }
            pl::cmd_run(rc);
        }
    } catch (const irissr::Error& e) {
        std::cerr << "iris_sr: error: " << e.what() << '\n';
        return pl::exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "iris_sr: error: " << e.what() << '\n';
        return pl::kUnwritable;
    } catch (const std::exception& e) {
        std::cerr << "iris_sr: unexpected error: " << e.what() << '\n';
        return pl::kOther;
    }
    return 0;
}
