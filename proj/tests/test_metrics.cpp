#include <doctest.h>

#include <cmath>

#include "cscl4/error.hpp"
#include "cscl4/metrics.hpp"
#include "cscl4/phantom.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"

using namespace cscl4;

namespace {

LabelMask mask(int h, int w, const std::vector<int>& v) {
    LabelMask m;
    m.height = h;
    m.width = w;
    m.labels.assign(v.begin(), v.end());
    return m;
}

PhantomPair standard_phantom(std::uint64_t seed) {
    PhantomSpec s;
    s.map = ModalityMap::parse("identity");
    s.noise_sigma = 0.0;
    s.seed = seed;
    return gen_phantom_pair(s);
}

} // namespace

TEST_CASE("psnr cap, forced value and loop oracle") {
    testgen::Gen g(1);
    const Image2 a = g.image(9, 7);
    CHECK(psnr(a, a) == kPsnrCap);
    Image2 b = a;
    for (double& v : b.data) v += 0.1;
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
    for (int trial = 0; trial < 20; ++trial) {
        const Image2 x = g.image(8, 8), y = g.image(8, 8);
        CHECK(psnr(x, y) == doctest::Approx(oracle::psnr(x, y)).epsilon(1e-12));
        CHECK(psnr(x, y) == psnr(y, x));
    }
    CHECK_THROWS_AS(psnr(Image2(3, 3), Image2(3, 4)), DimensionError);
}

TEST_CASE("ssim of identical images is one and never exceeds one") {
    testgen::Gen g(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Image2 a = g.image(16, 16), b = g.image(16, 16);
        CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ssim(a, b) <= 1.0);
        CHECK(ssim(a, b) >= -1.0);
        SsimOptions o;
        o.overlapping = true;
        CHECK(ssim(a, a, o) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("ssim of a phantom against its negative is low") {
    const PhantomPair p = standard_phantom(3);
    Image2 neg = p.a;
    for (double& v : neg.data) v = 1.0 - v;
    CHECK(ssim(p.a, neg) < 0.2);
}

TEST_CASE("ssim of shifted constants matches the luminance closed form") {
    const Image2 a(16, 16, 0.2), b(16, 16, 0.7);
    const double c1 = 0.01 * 0.01;
    const double expect = (2.0 * 0.2 * 0.7 + c1) / (0.2 * 0.2 + 0.7 * 0.7 + c1);
    CHECK(ssim(a, b) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(ssim(a, b) < 1.0);
    CHECK_THROWS_AS(ssim(Image2(7, 7), Image2(7, 7)), DimensionError);
}

TEST_CASE("segmentation of level and gradient images") {
    Image2 levels(6, 6);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) levels(r, c) = r < 2 ? 0.1 : r < 4 ? 0.5 : 0.9;
    const LabelMask m = segment_threshold(levels, 3);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) CHECK(m.labels[static_cast<std::size_t>(r * 6 + c)] == r / 2);

    Image2 ramp(6, 6);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp.data[i] = static_cast<double>(i) / 36.0;
    const LabelMask g = segment_threshold(ramp, 3);
    for (std::size_t i = 0; i < ramp.size(); ++i) CHECK(g.labels[i] == i / 12);

    CHECK_THROWS_AS(segment_threshold(Image2(4, 4, 0.3), 3), DegenerateInputError);
    CHECK_THROWS_AS(segment_threshold(ramp, 1), PreconditionError);
}

TEST_CASE("segmentation recovers the phantom mask") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const PhantomPair p = standard_phantom(s);
        CHECK(segment_threshold(p.b, 3).labels == p.labels.labels);
    }
}

TEST_CASE("dice examples") {
    const LabelMask a = mask(2, 4, {1, 1, 1, 1, 0, 0, 0, 0});
    const LabelMask b = mask(2, 4, {0, 0, 0, 0, 1, 1, 1, 1});
    const LabelMask c = mask(2, 4, {1, 1, 0, 0, 1, 1, 0, 0});
    CHECK(dice(a, a, 1).value == 1.0);
    CHECK(dice(a, b, 1).value == 0.0);
    CHECK(dice(a, c, 1).value == 0.5);
    const DiceResult v = dice(a, b, 2);
    CHECK(v.vacuous);
    CHECK(v.value == 1.0);
    CHECK(dice_macro(a, a, 2) == 1.0);
    CHECK_THROWS_AS(dice(a, mask(1, 4, {0, 0, 0, 0}), 1), DimensionError);
}

TEST_CASE("dice stays in the unit interval") {
    testgen::Gen g(4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> x(30), y(30);
        for (auto& v : x) v = g.integer(0, 2);
        for (auto& v : y) v = g.integer(0, 2);
        const LabelMask a = mask(5, 6, x), b = mask(5, 6, y);
        for (int c = 0; c < 3; ++c) {
            const double d = dice(a, b, c).value;
            CHECK((d >= 0.0 && d <= 1.0));
        }
        CHECK(dice_macro(a, a) == 1.0);
    }
}

TEST_CASE("psnr and ssim fall as noise grows") {
    const Image2 ref = standard_phantom(8).a;
    double mp[3] = {0, 0, 0}, ms[3] = {0, 0, 0};
    const double sigmas[3] = {0.01, 0.05, 0.1};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        testgen::Gen g(seed);
        for (int k = 0; k < 3; ++k) {
            Image2 n = ref;
            for (double& v : n.data) v += sigmas[k] * g.normal();
            mp[k] += psnr(ref, n) / 20.0;
            ms[k] += ssim(ref, n) / 20.0;
        }
    }
    CHECK(mp[0] > mp[1]);
    CHECK(mp[1] > mp[2]);
    CHECK(ms[0] > ms[1]);
    CHECK(ms[1] > ms[2]);
}
