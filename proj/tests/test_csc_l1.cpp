#include <doctest.h>

#include <cmath>

#include "cscl4/csc_l1.hpp"
#include "cscl4/error.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"

using namespace cscl4;

namespace {

Image2 loop_reconstruct(const FilterBank& f, const Tensor3& z) {
    Image2 out(z.height, z.width);
    for (int k = 0; k < f.count; ++k) {
        const Image2 full = oracle::conv_full(z.channel(k), f.filter(k));
        const int r0 = (f.fh - 1) / 2, c0 = (f.fw - 1) / 2;
        for (int r = 0; r < z.height; ++r)
            for (int c = 0; c < z.width; ++c) out(r, c) += full(r + r0, c + c0);
    }
    return out;
}

FilterBank random_bank(testgen::Gen& g, int K, int fh, int fw, double norm) {
    FilterBank b(K, fh, fw, 1, false);
    for (int k = 0; k < K; ++k) {
        Image2 f = g.gaussian_image(fh, fw);
        const double n = std::sqrt(oracle::mse(f, Image2(fh, fw)) * fh * fw);
        for (double& v : f.data) v *= norm / n;
        b.set_filter(k, f);
    }
    return b;
}

Tensor3 sparse_codes(testgen::Gen& g, int K, int h, int w, double p) {
    Tensor3 z(K, h, w);
    for (double& v : z.data) v = g.coin(p) ? g.normal() : 0.0;
    return z;
}

double corr(const Image2& a, const Image2& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a.data[i] * b.data[i];
        aa += a.data[i] * a.data[i];
        bb += b.data[i] * b.data[i];
    }
    return ab / std::sqrt(aa * bb);
}

} // namespace

TEST_CASE("reconstruct examples") {
    testgen::Gen g(1);
    FilterBank one(1, 1, 1, 1, false);
    one.weights(0, 0) = 1.0;
    const Tensor3 z = g.tensor(1, 5, 6);
    CHECK(reconstruct(one, z).data == z.channel(0).data);
    const FilterBank b = random_bank(g, 3, 3, 2, 1.0);
    for (double v : reconstruct(b, Tensor3(3, 6, 6)).data) CHECK(v == 0.0);
    for (int i = 0; i < 10; ++i) {
        const FilterBank r = random_bank(g, 3, 3, 3, 0.8);
        const Tensor3 c = g.tensor(3, 7, 8);
        CHECK(oracle::max_abs_diff(reconstruct(r, c).data, loop_reconstruct(r, c).data) <= 1e-12);
    }
    CHECK_THROWS_AS(reconstruct(b, Tensor3(2, 6, 6)), DimensionError);
}

TEST_CASE("csc_objective examples") {
    testgen::Gen g(2);
    CscProblem p;
    p.images = {g.image(6, 6), g.image(6, 6)};
    p.K = 2;
    p.fh = p.fw = 3;
    p.lambda = 0.3;
    const FilterBank f = random_bank(g, 2, 3, 3, 1.0);
    const std::vector<Tensor3> zero{Tensor3(2, 6, 6), Tensor3(2, 6, 6)};
    double half = 0.0;
    for (const auto& x : p.images)
        for (double v : x.data) half += 0.5 * v * v;
    CHECK(csc_objective(p, f, zero) == doctest::Approx(half).epsilon(1e-14));

    const Tensor3 z = sparse_codes(g, 2, 6, 6, 0.2);
    CscProblem exact = p;
    exact.lambda = 0.0;
    exact.images = {reconstruct(f, z)};
    CHECK(std::abs(csc_objective(exact, f, {z})) <= 1e-24);

    const std::vector<Tensor3> codes{g.tensor(2, 6, 6), g.tensor(2, 6, 6)};
    double loop = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        const Image2 r = loop_reconstruct(f, codes[i]);
        for (std::size_t k = 0; k < r.size(); ++k) loop += 0.5 * std::pow(p.images[i].data[k] - r.data[k], 2);
        for (double v : codes[i].data) loop += p.lambda * std::abs(v);
    }
    CHECK(csc_objective(p, f, codes) == doctest::Approx(loop).epsilon(1e-12));
    CHECK_THROWS_AS(csc_objective(p, f, {codes[0]}), DimensionError);
}

TEST_CASE("soft threshold matches the closed form") {
    testgen::Gen g(3);
    for (int i = 0; i < 1000; ++i) {
        const double v = 3.0 * g.normal(), t = g.uniform(0.0, 2.0);
        const double expect = (v > 0 ? 1.0 : v < 0 ? -1.0 : 0.0) * std::max(std::abs(v) - t, 0.0);
        CHECK(soft_threshold(v, t) == expect);
    }
}

TEST_CASE("solve_codes_l1 examples") {
    testgen::Gen g(4);
    CscProblem p;
    p.images = {g.image(8, 8)};
    p.K = 2;
    p.fh = p.fw = 3;
    const FilterBank f = random_bank(g, 2, 3, 3, 1.0);
    // Correlation of x with each filter bounds the useful threshold.
    double cmax = 0.0;
    for (int k = 0; k < 2; ++k) {
        FilterBank single(1, 3, 3, 1, false);
        single.set_filter(0, f.filter(k));
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c) {
                Tensor3 e(1, 8, 8);
                e(0, r, c) = 1.0;
                const Image2 col = loop_reconstruct(single, e);
                double dot = 0.0;
                for (std::size_t i = 0; i < col.size(); ++i) dot += col.data[i] * p.images[0].data[i];
                cmax = std::max(cmax, std::abs(dot));
            }
    }
    p.lambda = cmax * 1.001;
    const auto z = solve_codes_l1(p, f, {Tensor3(2, 8, 8)});
    for (double v : z[0].data) CHECK(v == 0.0);

    CscProblem px;
    px.images = {Image2(1, 1, 0.625)};
    px.K = 1;
    px.fh = px.fw = 1;
    px.lambda = 0.0;
    FilterBank unit(1, 1, 1, 1, false);
    unit.weights(0, 0) = 1.0;
    const auto zx = solve_codes_l1(px, unit, {Tensor3(1, 1, 1)});
    CHECK(zx[0].data[0] == doctest::Approx(0.625).epsilon(1e-9));
}

TEST_CASE("planted codes are recovered to > 40 dB at tiny lambda") {
    testgen::Gen g(5);
    const FilterBank f = random_bank(g, 2, 3, 3, 1.0);
    CscProblem p;
    p.K = 2;
    p.fh = p.fw = 3;
    p.lambda = 1e-6;
    const Tensor3 z = sparse_codes(g, 2, 12, 12, 0.1);
    p.images = {reconstruct(f, z)};
    CscOptions o;
    o.code_max_iter = 2000;
    o.code_tol = 1e-12;
    const auto codes = solve_codes_l1(p, f, {Tensor3(2, 12, 12)}, o);
    CHECK(oracle::psnr(p.images[0], reconstruct(f, codes[0])) > 40.0);
}

TEST_CASE("solve_filters examples") {
    testgen::Gen g(6);
    CscProblem p;
    p.K = 1;
    p.fh = p.fw = 3;
    p.lambda = 0.0;
    p.images = {g.image(8, 8, 0.0, 0.2)};
    Tensor3 delta(1, 8, 8);
    delta(0, 4, 3) = 1.0;
    const FilterBank f0 = random_bank(g, 1, 3, 3, 0.5);
    const FilterBank f = solve_filters(p, {delta}, f0);
    // Same framing puts filter tap (i, j) at pixel (4 - 1 + i, 3 - 1 + j).
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(f.filter(0)(i, j) == doctest::Approx(p.images[0](3 + i, 2 + j)).epsilon(1e-6));

    CscProblem big = p;
    big.images = {g.image(8, 8, 1.0, 2.0)};
    const FilterBank fb = solve_filters(big, {delta}, f0);
    double n2 = 0.0;
    for (double v : fb.weights.row(0)) n2 += v * v;
    CHECK(n2 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fb.filter(0)(1, 1) / fb.filter(0)(0, 0) == doctest::Approx(big.images[0](4, 3) / big.images[0](3, 2)));

    const FilterBank same = solve_filters(p, {Tensor3(1, 8, 8)}, f0);
    CHECK(same.weights == f0.weights);
}

TEST_CASE("planted filters are recovered from known codes") {
    testgen::Gen g(7);
    const FilterBank truth = random_bank(g, 2, 3, 3, 0.9);
    CscProblem p;
    p.K = 2;
    p.fh = p.fw = 3;
    p.lambda = 0.0;
    std::vector<Tensor3> codes;
    for (int i = 0; i < 3; ++i) {
        codes.push_back(sparse_codes(g, 2, 14, 14, 0.15));
        p.images.push_back(reconstruct(truth, codes.back()));
    }
    const FilterBank f = solve_filters(p, codes, random_bank(g, 2, 3, 3, 1.0));
    for (int k = 0; k < 2; ++k) CHECK(corr(f.filter(k), truth.filter(k)) >= 0.99);
    for (int k = 0; k < 2; ++k) CHECK(f.weights.row(k).squaredNorm() <= 1.0 + 1e-9);
}

TEST_CASE("solve_csc objective is non-increasing across a grid") {
    for (double lambda : {0.0, 0.02, 0.3})
        for (int K : {1, 3})
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                testgen::Gen g(70 + seed);
                CscProblem p;
                p.images = {g.image(10, 10), g.image(10, 10)};
                p.K = K;
                p.fh = p.fw = 3;
                p.lambda = lambda;
                CscOptions o;
                o.seed = seed;
                const CscSolution s = solve_csc(p, o);
                REQUIRE_FALSE(s.objective_trace.empty());
                for (std::size_t i = 1; i < s.objective_trace.size(); ++i)
                    CHECK(s.objective_trace[i] <= s.objective_trace[i - 1] + 1e-9);
                for (double v : s.objective_trace) CHECK(std::isfinite(v));
                for (int k = 0; k < K; ++k) CHECK(s.filters.weights.row(k).squaredNorm() <= 1.0 + 1e-9);
            }
}

TEST_CASE("complete bank at vanishing lambda reconstructs below 1e-3 RMSE") {
    testgen::Gen g(8);
    CscProblem p;
    p.images = {g.image(16, 16)};
    p.K = 4;
    p.fh = p.fw = 2;
    p.lambda = 1e-8;
    const CscSolution s = solve_csc(p);
    const double rmse = std::sqrt(oracle::mse(p.images[0], reconstruct(s.filters, s.codes[0])));
    CHECK(rmse < 1e-3);
}

TEST_CASE("solve_csc is deterministic and validates input") {
    testgen::Gen g(9);
    CscProblem p;
    p.images = {g.image(8, 8)};
    p.K = 2;
    p.fh = p.fw = 3;
    p.lambda = 0.05;
    const CscSolution a = solve_csc(p), b = solve_csc(p);
    CHECK(a.objective_trace == b.objective_trace);
    CHECK(a.filters.weights == b.filters.weights);
    CscProblem bad = p;
    bad.lambda = -1.0;
    CHECK_THROWS_AS(validate(bad), PreconditionError);
    bad = p;
    bad.K = 0;
    CHECK_THROWS_AS(validate(bad), PreconditionError);
    bad = p;
    bad.fh = 9;
    CHECK_THROWS_AS(validate(bad), DimensionError);
}
