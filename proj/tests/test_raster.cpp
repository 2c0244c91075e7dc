#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "irissr/image_io.hpp"
#include "irissr/raster.hpp"
#include "irissr/rng.hpp"
#include "irissr/synth.hpp"

using namespace irissr;

namespace {

Image random_image(std::uint64_t seed, int w, int h) {
    Rng rng(seed);
    Image img(w, h);
    for (double& v : img.pixels()) v = rng.uniform();
    return img;
}

bool all_equal(const Image& img, double c, double tol) {
    for (double v : img.pixels())
        if (std::abs(v - c) > tol) return false;
    return true;
}

} // namespace

TEST(Raster, ImageRejectsZeroDims) {
    EXPECT_THROW(Image(0, 3), Error);
    EXPECT_THROW(Image(3, 0), Error);
    EXPECT_THROW(Image(2, 2, std::vector<double>(3)), Error);
}

TEST(Raster, BlurKernelShape) {
    for (double sigma : {0.3, 1.0, 2.5, 7.7}) {
        BlurKernel k(sigma);
        EXPECT_EQ(k.radius(), std::max(1, static_cast<int>(std::ceil(3 * sigma))));
        double sum = 0.0;
        for (double t : k.taps()) sum += t;
        EXPECT_NEAR(sum, 1.0, 1e-9);
        for (int i = 1; i <= k.radius(); ++i) EXPECT_EQ(k.tap(i), k.tap(-i));
    }
    EXPECT_THROW(BlurKernel(0.0), Error);
    EXPECT_THROW(BlurKernel(-1.0), Error);
}

TEST(Raster, ConstantImagesStayConstant) {
    const Image c(17, 11, 0.37);
    EXPECT_TRUE(all_equal(resize_bilinear(c, 40, 5), 0.37, 1e-12));
    EXPECT_TRUE(all_equal(resize_bicubic(c, 5, 40), 0.37, 1e-12));
    EXPECT_TRUE(all_equal(gaussian_blur(c, 2.0), 0.37, 1e-12));
    for (double sigma : {0.0, 0.5, 3.0}) EXPECT_TRUE(all_equal(degrade(c, 7, 3, sigma), 0.37, 1e-12));
    EXPECT_TRUE(all_equal(upsample(c, 30, 30), 0.37, 1e-12));
}

TEST(Raster, IdentityResizeIsExact) {
    const Image img = random_image(3, 13, 9);
    EXPECT_EQ(resize_bilinear(img, 13, 9), img);
    EXPECT_EQ(resize_bicubic(img, 13, 9), img);
    EXPECT_EQ(upsample(img, 13, 9), img);
}

TEST(Raster, ZeroTargetRejected) {
    const Image img(4, 4);
    EXPECT_THROW(resize_bilinear(img, 0, 4), Error);
    EXPECT_THROW(resize_bicubic(img, 4, 0), Error);
    EXPECT_THROW(degrade(img, 5, 4, 1.0), Error);
    EXPECT_THROW(upsample(img, 3, 4), Error);
    EXPECT_THROW(gaussian_blur(img, 0.0), Error);
}

TEST(Raster, BilinearCheckerboardMatchesHandWeights) {
    Image img(2, 2, std::vector<double>{0, 1, 1, 0});
    const Image out = resize_bilinear(img, 4, 4);
    // Output i samples source (i + 0.5) / 2 - 0.5; interior weights are
    // f(u, v) = u + v - 2uv for this pattern.
    auto oracle = [](int i, int j) {
        const double u = std::clamp((i + 0.5) * 0.5 - 0.5, 0.0, 1.0);
        const double v = std::clamp((j + 0.5) * 0.5 - 0.5, 0.0, 1.0);
        return u + v - 2 * u * v;
    };
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) EXPECT_NEAR(out(x, y), oracle(x, y), 1e-12) << x << "," << y;
    EXPECT_NEAR(out(1, 1), 0.375, 1e-12);
    EXPECT_NEAR(out(2, 1), 0.625, 1e-12);
}

TEST(Raster, BicubicReproducesLinearRamp) {
    const int w = 16;
    Image ramp(w, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < w; ++x) ramp(x, y) = x / double(w - 1);
    const Image up = resize_bicubic(ramp, 2 * w, 5);
    for (int x = 0; x < 2 * w; ++x) {
        const double s = (x + 0.5) / 2.0 - 0.5;
        if (s < 1.0 || s > w - 2.0) continue; // border replication bends the ramp
        EXPECT_NEAR(up(x, 2), s / (w - 1), 1e-6) << x;
    }
}

TEST(Raster, BicubicClampsOvershoot) {
    Image step(8, 1);
    for (int x = 4; x < 8; ++x) step(x, 0) = 1.0;
    const Image up = resize_bicubic(step, 64, 1);
    const Image raw = detail::resample_bicubic(step, 64, 1);
    double raw_min = 1.0;
    double raw_max = 0.0;
    for (double v : raw.pixels()) raw_min = std::min(raw_min, v), raw_max = std::max(raw_max, v);
    EXPECT_LT(raw_min, 0.0);
    EXPECT_GT(raw_max, 1.0);
    for (double v : up.pixels()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Raster, BlurOfImpulseIsKernelProduct) {
    const double sigma = 1.7;
    Image img(41, 41);
    img(20, 20) = 1.0;
    const Image out = gaussian_blur(img, sigma);
    const int r = static_cast<int>(std::ceil(3 * sigma));
    double norm = 0.0;
    for (int i = -r; i <= r; ++i) norm += std::exp(-i * i / (2 * sigma * sigma));
    for (int dy = -r - 2; dy <= r + 2; ++dy)
        for (int dx = -r - 2; dx <= r + 2; ++dx) {
            double expected = 0.0;
            if (std::abs(dx) <= r && std::abs(dy) <= r)
                expected = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) / (norm * norm);
            EXPECT_NEAR(out(20 + dx, 20 + dy), expected, 1e-15);
        }
}

TEST(Raster, SmallSigmaBarelyChangesSmoothImage) {
    Image img(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            img(x, y) = 0.5 + 0.3 * std::sin(0.2 * x) * std::cos(0.15 * y);
    EXPECT_LT(mean_abs_diff(gaussian_blur(img, 0.3), img), 1e-3);
    const Image blurred = gaussian_blur(img, 0.3);
    for (std::size_t i = 0; i < img.size(); ++i)
        EXPECT_NEAR(blurred.pixels()[i], img.pixels()[i], 1e-3);
}

TEST(Raster, BlurIsLinear) {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const Image a = random_image(100 + trial, 23, 19);
        const Image b = random_image(200 + trial, 23, 19);
        const double wa = rng.uniform(0.0, 0.6);
        const double wb = rng.uniform(0.0, 1.0 - wa);
        Image mix(23, 19);
        for (std::size_t i = 0; i < mix.size(); ++i)
            mix.pixels()[i] = wa * a.pixels()[i] + wb * b.pixels()[i];
        const double sigma = rng.uniform(0.4, 4.0);
        const Image lhs = gaussian_blur(mix, sigma);
        const Image ba = gaussian_blur(a, sigma);
        const Image bb = gaussian_blur(b, sigma);
        for (std::size_t i = 0; i < mix.size(); ++i)
            EXPECT_NEAR(lhs.pixels()[i], wa * ba.pixels()[i] + wb * bb.pixels()[i], 1e-9);
    }
}

TEST(Raster, ResamplersStayInUnitRange) {
    for (int trial = 0; trial < 8; ++trial) {
        const Image img = random_image(trial, 12 + trial, 9 + 2 * trial);
        for (const Image& out : {resize_bilinear(img, 31, 7), resize_bicubic(img, 31, 7),
                                 resize_bicubic(img, 5, 40), degrade(img, 6, 5, 1.2),
                                 upsample(img, 50, 50)}) {
            for (double v : out.pixels()) {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
            }
        }
    }
}

TEST(Raster, DegradeTargetSizes) {
    const auto eye = synth_iris(1, 231);
    EXPECT_EQ(dims_string(degrade(eye.image, 115, 115, 1.0)), "115x115");
    const Image small(13, 13, 0.4);
    EXPECT_EQ(dims_string(upsample(small, 319, 319)), "319x319");
}

TEST(Raster, DegradeUndoesBicubicUpscale) {
    // x -> bicubic x4 -> degrade without blur returns close to x.
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Image x = resize_bicubic(synth_iris(seed, 128).image, 32, 32);
        const Image up = resize_bicubic(x, 128, 128);
        EXPECT_LT(mean_abs_diff(degrade(up, 32, 32, 0.0), x), 0.02) << seed;
    }
}

TEST(Raster, FoldedDegradeMatchesBlurThenResample) {
    for (int trial = 0; trial < 6; ++trial) {
        const Image img = random_image(50 + trial, 40 + 7 * trial, 33 + 5 * trial);
        const double sigma = 0.4 + 1.3 * trial;
        const int ow = 5 + 3 * trial;
        const int oh = 4 + 2 * trial;
        const Image folded = detail::degrade_linear(img, ow, oh, sigma);
        const Image direct =
            detail::resample_bicubic(detail::convolve_separable(img, BlurKernel(sigma)), ow, oh);
        for (std::size_t i = 0; i < folded.size(); ++i)
            EXPECT_NEAR(folded.pixels()[i], direct.pixels()[i], 1e-12);
    }
}

TEST(Raster, Deterministic) {
    const Image img = random_image(9, 40, 33);
    EXPECT_EQ(degrade(img, 11, 9, 1.3), degrade(img, 11, 9, 1.3));
    EXPECT_EQ(resize_bicubic(img, 77, 61), resize_bicubic(img, 77, 61));
}

TEST(ImageIo, PgmRoundTripQuantizes) {
    const Image img = random_image(4, 9, 7);
    std::istringstream in(encode_pgm(img));
    const Image back = decode_pnm(in);
    ASSERT_TRUE(back.same_dims(img));
    for (std::size_t i = 0; i < img.size(); ++i)
        EXPECT_NEAR(back.pixels()[i], img.pixels()[i], 0.5 / 255 + 1e-12);
    EXPECT_EQ(back, quantize8(img));
}

TEST(ImageIo, ColorConvertsToLuma) {
    std::string ppm = "P6\n2 1\n255\n";
    ppm += std::string{char(255), char(0), char(0), char(0), char(0), char(255)};
    std::istringstream in(ppm);
    const Image img = decode_pnm(in);
    EXPECT_NEAR(img(0, 0), 0.299, 1e-12);
    EXPECT_NEAR(img(1, 0), 0.114, 1e-12);
}

TEST(ImageIo, AsciiAndSixteenBit) {
    std::istringstream ascii("P2\n# comment\n2 2\n10\n0 5\n10 2\n");
    const Image a = decode_pnm(ascii);
    EXPECT_NEAR(a(1, 0), 0.5, 1e-12);
    EXPECT_NEAR(a(0, 1), 1.0, 1e-12);

    std::string p5 = "P5 1 1 65535\n";
    p5 += std::string{char(0x80), char(0x00)};
    std::istringstream wide(p5);
    EXPECT_NEAR(decode_pnm(wide)(0, 0), 32768.0 / 65535.0, 1e-12);
}

TEST(ImageIo, RejectsGarbage) {
    std::istringstream bad("P7\n1 1\n255\n");
    EXPECT_THROW(decode_pnm(bad), Error);
    std::istringstream truncated("P5\n4 4\n255\nab");
    EXPECT_THROW(decode_pnm(truncated), Error);
}
