#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "irissr/iriscode.hpp"
#include "irissr/rng.hpp"
#include "irissr/synth.hpp"

using namespace irissr;

namespace {

IrisAnnotation centred(double size, double pr, double ir) {
    IrisAnnotation a;
    a.pupil_center = {(size - 1) / 2, (size - 1) / 2};
    a.pupil_radius = pr;
    a.iris_radius = ir;
    a.sclera_radius = ir;
    return a;
}

// Draws f(rho, theta) over the annulus of `ann`, with rho the normalized
// radius between the circles.
template <class F>
Image polar_image(int size, const IrisAnnotation& ann, F f) {
    Image img(size, size, 0.5);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dx = x - ann.pupil_center.x;
            const double dy = y - ann.pupil_center.y;
            const double r = std::hypot(dx, dy);
            const double rho = (r - ann.pupil_radius) / (ann.iris_radius - ann.pupil_radius);
            img(x, y) = f(rho, std::atan2(dy, dx));
        }
    return img;
}

IrisTemplate random_template(std::uint64_t seed, int R = 20, int A = 240, double mask_density = 0.8) {
    Rng rng(seed);
    IrisTemplate t{R, A, std::vector<std::uint64_t>(A), std::vector<std::uint64_t>(A)};
    const std::uint64_t used = R == 32 ? ~std::uint64_t{0} : ((std::uint64_t{1} << (2 * R)) - 1);
    for (int j = 0; j < A; ++j) {
        t.code[j] = rng.bits() & used;
        std::uint64_t m = 0;
        for (int b = 0; b < 2 * R; b += 2)
            if (rng.uniform() < mask_density) m |= std::uint64_t{3} << b;
        t.mask[j] = m;
    }
    return t;
}

IrisTemplate template_of(const SynthIris& eye) { return encode(unwrap(eye.image, eye.annotation)); }

} // namespace

TEST(Unwrap, RadialBandsGiveFlatRows) {
    const auto ann = centred(201, 25, 90);
    const Image img = polar_image(201, ann, [](double rho, double) { return 0.5 + 0.3 * std::sin(6.0 * rho); });
    const auto norm = unwrap(img, ann);
    ASSERT_EQ(norm.radial(), 20);
    ASSERT_EQ(norm.angular(), 240);
    for (int i = 0; i < 20; ++i) {
        double s = 0, ss = 0;
        for (int j = 0; j < 240; ++j) {
            EXPECT_TRUE(norm.valid(j, i));
            s += norm.values(j, i);
            ss += norm.values(j, i) * norm.values(j, i);
        }
        const double mean = s / 240;
        EXPECT_LT(ss / 240 - mean * mean, 1e-4) << i;
        EXPECT_NEAR(mean, 0.5 + 0.3 * std::sin(6.0 * (i + 0.5) / 20), 5e-3);
    }
}

TEST(Unwrap, RotationShiftsColumns) {
    const auto ann = centred(201, 25, 90);
    auto texture = [](double dtheta) {
        return [dtheta](double rho, double th) {
            return 0.5 + 0.2 * std::sin(5 * (th - dtheta)) * std::cos(3 * rho) + 0.1 * std::cos(11 * (th - dtheta));
        };
    };
    const int k = 6;
    const double dtheta = 2 * std::numbers::pi * k / 240;
    const auto a = unwrap(polar_image(201, ann, texture(0.0)), ann);
    const auto b = unwrap(polar_image(201, ann, texture(dtheta)), ann);
    EXPECT_EQ(std::lround(dtheta * 240 / (2 * std::numbers::pi)), k);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 240; ++j) EXPECT_NEAR(b.values(j, i), a.values((j - k + 240) % 240, i), 0.02);
}

TEST(Unwrap, MasksOutsideImage) {
    auto ann = centred(64, 10, 40); // iris circle leaves the 64x64 frame
    const auto norm = unwrap(Image(64, 64, 0.3), ann);
    int masked = 0;
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 240; ++j) masked += !norm.valid(j, i);
    EXPECT_GT(masked, 0);
    EXPECT_TRUE(norm.valid(0, 0));
}

TEST(Unwrap, DegenerateAnnotation) {
    auto ann = centred(64, 20, 20);
    EXPECT_THROW(unwrap(Image(64, 64), ann), Error);
}

TEST(Encode, ConstantRowIsMasked) {
    NormalizedIris norm{Image(240, 20, 0.5), std::vector<std::uint8_t>(20 * 240, 1)};
    const auto t = encode(norm);
    EXPECT_EQ(t.valid_bits(), 0u);
}

TEST(Encode, PureToneFollowsAnalyticPhase) {
    // wavelength 16 divides 240, so the tone sits exactly on one bin and the
    // filtered row is the analytic signal 0.5 G(f0) exp(i 2 pi t / 16).
    IrisCodeConfig cfg;
    cfg.radial = 1;
    cfg.wavelength = 16;
    NormalizedIris norm{Image(240, 1), std::vector<std::uint8_t>(240, 1)};
    for (int t = 0; t < 240; ++t) norm.values(t, 0) = 0.5 + 0.25 * std::cos(2 * std::numbers::pi * t / 16);
    const auto resp = log_gabor_filter(norm, cfg.wavelength, cfg.sigma_ratio);
    const auto code = encode(norm, cfg);
    for (int t = 0; t < 240; ++t) {
        const double phase = 2 * std::numbers::pi * t / 16;
        double diff = std::arg(resp[t]) - std::remainder(phase, 2 * std::numbers::pi);
        diff = std::remainder(diff, 2 * std::numbers::pi);
        EXPECT_LT(std::abs(diff), 2 * std::numbers::pi / 16) << t;
        if (std::abs(std::cos(phase)) > 1e-9) EXPECT_EQ(code.bit(0, t, 0), std::cos(phase) > 0) << t;
        if (std::abs(std::sin(phase)) > 1e-9) EXPECT_EQ(code.bit(0, t, 1), std::sin(phase) > 0) << t;
        EXPECT_TRUE(code.usable(0, t, 0));
    }
}

TEST(Encode, Deterministic) {
    const auto eye = synth_iris(3, 231);
    EXPECT_EQ(template_of(eye), template_of(eye));
}

TEST(Hamming, IdentityComplementAndRotation) {
    const auto t = template_of(synth_iris(8, 231));
    ASSERT_GT(t.valid_bits(), 0u);
    EXPECT_EQ(hamming(t, t, 8), 0.0);

    IrisTemplate inv = t;
    for (auto& w : inv.code) w = ~w & ((std::uint64_t{1} << 40) - 1);
    EXPECT_EQ(hamming(t, inv, 0), 1.0);

    for (int k : {-8, -3, 1, 5, 8}) EXPECT_EQ(hamming(t, rotate_columns(t, k), 8), 0.0) << k;
    EXPECT_GT(hamming(t, rotate_columns(t, 20), 8), 0.2);
}

TEST(Hamming, SymmetricAndBounded) {
    for (std::uint64_t s = 0; s < 40; ++s) {
        const auto a = random_template(2 * s + 1, 4 + static_cast<int>(s % 5), 16 + static_cast<int>(s % 7));
        auto b = random_template(2 * s + 2, a.radial, a.angular);
        for (int S = 0; S <= 4; ++S) {
            const double ab = hamming(a, b, S);
            EXPECT_EQ(ab, hamming(b, a, S));
            EXPECT_GE(ab, 0.0);
            EXPECT_LE(ab, 1.0);
        }
    }
}

TEST(Hamming, NoComparableBits) {
    auto a = random_template(1, 4, 16);
    auto b = random_template(2, 4, 16);
    for (auto& m : b.mask) m = 0;
    EXPECT_THROW(hamming(a, b, 3), Error);
    EXPECT_THROW(hamming(a, random_template(3, 5, 16), 3), Error);
}

TEST(Hamming, SyntheticIdentitiesSeparate) {
    std::vector<std::vector<IrisTemplate>> t(20);
    for (int s = 0; s < 20; ++s)
        for (int session = 0; session < 3; ++session) t[s].push_back(template_of(synth_iris(1000 + s, 231, session)));
    double worst_genuine = 0.0;
    double best_impostor = 1.0;
    for (int s = 0; s < 20; ++s) {
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b) worst_genuine = std::max(worst_genuine, hamming(t[s][a], t[s][b]));
        for (int u = s + 1; u < 20; ++u) best_impostor = std::min(best_impostor, hamming(t[s][0], t[u][1]));
    }
    EXPECT_LT(worst_genuine, 0.15);
    EXPECT_GT(best_impostor, 0.35);
}

TEST(TemplateIo, RoundTripAndRejects) {
    const auto t = random_template(77, 20, 240);
    EXPECT_EQ(deserialize_template(serialize_template(t)), t);
    const auto path = std::filesystem::temp_directory_path() / "irissr_tpl_test.bin";
    save_template(path, t);
    EXPECT_EQ(load_template(path), t);
    std::filesystem::remove(path);
    std::string s = serialize_template(t);
    EXPECT_THROW(deserialize_template(s.substr(0, s.size() - 3)), Error);
    s[0] = 'X';
    EXPECT_THROW(deserialize_template(s), Error);
    EXPECT_THROW(load_template(path), Error);
}
