#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "irissr/rng.hpp"
#include "irissr/sr.hpp"
#include "irissr/synth.hpp"

using namespace irissr;
namespace fs = std::filesystem;

namespace {

struct ScratchDir {
    fs::path path;
    explicit ScratchDir(const std::string& name)
        : path(fs::temp_directory_path() / ("irissr_sr_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~ScratchDir() { fs::remove_all(path); }
};

// Counts backend invocations by appending a line per call.
UpscalerSpec counting_backend(const fs::path& dir, const std::string& extra = "") {
    const std::string counter = (dir / "calls.txt").string();
    const std::string cmd = "echo x >> '" + counter + "' && '" IRISSR_NN2X_PATH "' {in} {out}" + extra;
    return UpscalerSpec::external("nn2x", cmd, dir / "exchange");
}

int call_count(const fs::path& dir) {
    std::ifstream in(dir / "calls.txt");
    int n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

Image random_image(std::uint64_t seed, int w, int h) {
    Rng rng(seed);
    Image img(w, h);
    for (double& v : img.pixels()) v = rng.uniform();
    return img;
}

} // namespace

TEST(Sr, DoublingPasses) {
    EXPECT_EQ(doubling_passes(1.0), 0);
    EXPECT_EQ(doubling_passes(2.0), 1);
    EXPECT_EQ(doubling_passes(4.0), 2);
    EXPECT_EQ(doubling_passes(16.0), 4);
    EXPECT_EQ(doubling_passes(319.0 / 13.0), 5);
    EXPECT_EQ(doubling_passes(18.0), 5);
    EXPECT_EQ(doubling_passes(3.0), 2);
    // Rounded crop sizes from a 231 side keep the nominal pass count.
    EXPECT_EQ(doubling_passes(231.0 / 115.0), 1);
    EXPECT_EQ(doubling_passes(231.0 / 57.0), 2);
    EXPECT_EQ(doubling_passes(231.0 / 29.0), 3);
    EXPECT_EQ(doubling_passes(231.0 / 15.0), 4);
    EXPECT_THROW(doubling_passes(0.5), Error);
}

TEST(Sr, BicubicKindIsPlainResize) {
    const Image lr = random_image(1, 15, 15);
    const auto r = super_resolve(lr, 231, 231, UpscalerSpec::bicubic());
    EXPECT_EQ(r.passes, 1);
    EXPECT_EQ(r.image, resize_bicubic(lr, 231, 231));
    const auto b = super_resolve(lr, 231, 231, UpscalerSpec::bilinear());
    EXPECT_EQ(b.image, resize_bilinear(lr, 231, 231));
}

TEST(Sr, TargetSmallerThanInputRejected) {
    EXPECT_THROW(super_resolve(Image(20, 20), 10, 10, UpscalerSpec::bicubic()), Error);
}

TEST(Sr, ExternalSpecValidation) {
    EXPECT_THROW(super_resolve(Image(4, 4), 8, 8, UpscalerSpec::external("x", "", "/tmp")), Error);
    EXPECT_THROW(super_resolve(Image(4, 4), 8, 8, UpscalerSpec::external("x", "true", "")), Error);
    EXPECT_THROW(apply_backend(Image(4, 4), UpscalerSpec::bicubic()), Error);
    EXPECT_THROW(super_resolve(Image(4, 4), 8, 8, UpscalerSpec::eigenpatch(nullptr)), Error);
}

TEST(Sr, ReferenceBackendDoublesBlockwise) {
    ScratchDir dir("blockwise");
    const Image lr = quantize8(random_image(2, 7, 5));
    const Image out = apply_backend(lr, counting_backend(dir.path));
    ASSERT_EQ(dims_string(out), "14x10");
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 14; ++x) EXPECT_DOUBLE_EQ(out(x, y), lr(x / 2, y / 2));
    EXPECT_EQ(call_count(dir.path), 1);
}

TEST(Sr, BackendWrongDimsReported) {
    ScratchDir dir("baddims");
    try {
        apply_backend(Image(6, 6, 0.5), counting_backend(dir.path, " --bad-dims"));
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.failure(), BackendFailure::DimensionMismatch);
    }
}

TEST(Sr, BackendNonzeroExitReported) {
    ScratchDir dir("exit");
    try {
        apply_backend(Image(6, 6, 0.5), UpscalerSpec::external("bad", "exit 3", dir.path));
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.failure(), BackendFailure::ProcessFailed);
        EXPECT_EQ(e.exit_status(), 3);
    }
}

TEST(Sr, BackendMissingOutputReported) {
    ScratchDir dir("missing");
    try {
        apply_backend(Image(6, 6, 0.5), UpscalerSpec::external("lazy", "true {in} {out}", dir.path));
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.failure(), BackendFailure::MissingOutput);
    }
}

TEST(Sr, ChainedPassCounts) {
    struct Case {
        int lr;
        int hr;
        double nominal;
        int passes;
    };
    for (const Case c : {Case{16, 32, 0.0, 1}, Case{15, 240, 0.0, 4}, Case{13, 319, 0.0, 5},
                         Case{115, 231, 2.0, 1}, Case{15, 231, 16.0, 4}}) {
        ScratchDir dir("chain" + std::to_string(c.lr) + "_" + std::to_string(c.hr));
        const Image lr = random_image(c.lr, c.lr, c.lr);
        const auto r = super_resolve(lr, c.hr, c.hr, counting_backend(dir.path), c.nominal);
        EXPECT_EQ(r.passes, c.passes) << c.lr << "->" << c.hr;
        EXPECT_EQ(call_count(dir.path), c.passes);
        EXPECT_EQ(r.image.width(), c.hr);
        EXPECT_EQ(r.image.height(), c.hr);
        for (double v : r.image.pixels()) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(Sr, ExchangeDirectoriesAreCleanedUp) {
    ScratchDir dir("cleanup");
    const auto up = counting_backend(dir.path);
    super_resolve(random_image(3, 8, 8), 32, 32, up);
    EXPECT_TRUE(fs::is_empty(up.exchange_dir));
}
