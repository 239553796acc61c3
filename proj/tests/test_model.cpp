#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "adaptation.hpp"
#include "cscl4/error.hpp"
#include "cscl4/l4.hpp"
#include "cscl4/linalg.hpp"
#include "cscl4/metrics.hpp"
#include "cscl4/model.hpp"
#include "cscl4/phantom.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"

using namespace cscl4;

namespace {

ModelState make_state(const ModelConfig& c, int h, int w, std::uint64_t seed) {
    ModelState st;
    st.config = c;
    st.height = h;
    st.width = w;
    const auto geoms = layer_geometries(c, h, w);
    const auto specs = expand_layers(c.layers);
    for (std::size_t l = 0; l < geoms.size(); ++l) {
        ModelLayer layer;
        layer.geometry = geoms[l];
        layer.filter_x = FilterBank(specs[l].filters, geoms[l].fh, geoms[l].fw, geoms[l].channels, true);
        layer.filter_x.weights = random_orthogonal(specs[l].filters, geoms[l].dim(), seed + l);
        layer.filter_y = layer.filter_x;
        layer.filter_y.weights = random_orthogonal(specs[l].filters, geoms[l].dim(), seed + 100 + l);
        layer.P = Matrix::Identity(specs[l].filters, specs[l].filters);
        st.layers.push_back(std::move(layer));
    }
    st.trained = true;
    return st;
}

FilterBank bank(const Matrix& A, int fh, int fw, int channels) {
    FilterBank f(static_cast<int>(A.rows()), fh, fw, channels, true);
    f.weights = A;
    return f;
}

// Channel k at grid position p holds (A * patches)(k, p).
Tensor3 relayout(const Matrix& codes, const PatchGeometry& g) {
    Tensor3 t(static_cast<int>(codes.rows()), g.grid_h(), g.grid_w());
    for (Eigen::Index k = 0; k < codes.rows(); ++k)
        for (Eigen::Index p = 0; p < codes.cols(); ++p) t.data[k * t.plane() + p] = codes(k, p);
    return t;
}

std::vector<Image2> phantoms(const std::string& map, int n, std::uint64_t seed, bool source, int size = 16) {
    std::vector<Image2> out;
    for (int i = 0; i < n; ++i) {
        PhantomSpec s;
        s.size = size;
        s.n_shapes = size >= 32 ? 6 : 4;
        s.map = ModalityMap::parse(map);
        s.noise_sigma = 0.0;
        s.seed = seed + static_cast<std::uint64_t>(i);
        const PhantomPair p = gen_phantom_pair(s);
        out.push_back(source ? p.a : p.b);
    }
    return out;
}

ModelConfig small_config() {
    ModelConfig c;
    c.layers = {{9, 3, 3, 1, 1}, {4, 2, 2, 2, 1}};
    c.epochs = 3;
    c.batch_size = 4;
    c.seed = 5;
    return c;
}

} // namespace

TEST_CASE("forward with identity filters is IUN of the patch layout") {
    testgen::Gen g(1);
    const PatchGeometry geo{1, 8, 8, 3, 3, 1};
    const Matrix A = Matrix::Identity(9, 9);
    std::vector<Tensor3> in{to_tensor(g.image(8, 8)), to_tensor(g.image(8, 8)), to_tensor(g.image(8, 8))};
    const IunParams p;
    const auto out = forward(in, bank(A, 3, 3, 1), geo, &p);
    std::vector<Tensor3> expect;
    for (const auto& t : in) expect.push_back(relayout(extract_patches(t, geo), geo));
    expect = iun(expect, p);
    REQUIRE(out.size() == expect.size());
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(oracle::max_abs_diff(out[i].data, expect[i].data) <= 1e-12);
}

TEST_CASE("two forward layers match manual encode and IUN") {
    testgen::Gen g(2);
    const PatchGeometry g1{1, 10, 10, 3, 3, 1};
    const PatchGeometry g2{6, 8, 8, 2, 2, 2};
    const Matrix A1 = random_orthogonal(6, 9, 11), A2 = random_orthogonal(12, 24, 12);
    std::vector<Tensor3> in{to_tensor(g.image(10, 10)), to_tensor(g.image(10, 10))};
    const IunParams p;
    const auto out = forward(forward(in, bank(A1, 3, 3, 1), g1, &p), bank(A2, 2, 2, 6), g2, &p);
    std::vector<Tensor3> mid;
    for (const auto& t : in) mid.push_back(relayout(A1 * extract_patches(t, g1), g1));
    mid = iun(mid, p);
    std::vector<Tensor3> top;
    for (const auto& t : mid) top.push_back(relayout(A2 * extract_patches(t, g2), g2));
    top = iun(top, p);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(oracle::max_abs_diff(out[i].data, top[i].data) <= 1e-12);
}

TEST_CASE("forward of a zero image is degenerate under IUN") {
    const PatchGeometry geo{1, 6, 6, 2, 2, 1};
    const IunParams p;
    CHECK_THROWS_AS(forward({Tensor3(1, 6, 6)}, bank(Matrix::Identity(4, 4), 2, 2, 1), geo, &p), DegenerateInputError);
}

TEST_CASE("associator recovers identity, planted maps and scalars") {
    testgen::Gen g(3);
    std::vector<Tensor3> zx;
    for (int i = 0; i < 4; ++i) zx.push_back(g.tensor(3, 4, 4));

    SUBCASE("identical codes give the identity") {
        const Associator a = update_associator(zx, zx, Matrix::Identity(4, 4), 1e-14);
        CHECK((a.P - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK(a.residual <= 1e-12);
    }
    SUBCASE("planted map") {
        const Matrix R = g.gaussian(3, 3);
        std::vector<Tensor3> zy;
        for (const auto& z : zx) zy.push_back(mix_channels(R, z));
        const Associator a = update_associator(zx, zy, Matrix::Identity(4, 4), 1e-10);
        CHECK((a.P - R).cwiseAbs().maxCoeff() <= 1e-6);
    }
    SUBCASE("scalar regression") {
        const Associator a = update_associator({Tensor3(1, 1, 1, 2.0)}, {Tensor3(1, 1, 1, 6.0)}, Matrix::Ones(1, 1), 0.0);
        CHECK(std::abs(a.P(0, 0) - 3.0) <= 1e-12);
    }
    SUBCASE("all-zero weights are rejected") {
        CHECK_THROWS_AS(update_associator(zx, zx, Matrix::Zero(4, 4), 0.0), PreconditionError);
    }
}

TEST_CASE("orthonormal round trip has zero reconstruction loss") {
    testgen::Gen g(4);
    ModelConfig c;
    c.layers = {{9, 3, 3, 1, 1}};
    c.mmd_weight = 0.0;
    c.manifold_weight = 0.0;
    const ModelState st = make_state(c, 8, 8, 7);
    const std::vector<Image2> bx{g.image(8, 8), g.image(8, 8)}, by{g.image(8, 8), g.image(8, 8)};
    const LossComponents lc = total_loss(st, bx, by);
    CHECK(lc.recon_x <= 1e-10);
    CHECK(lc.recon_y <= 1e-10);
}

TEST_CASE("identical batches with P = I have no discrepancy") {
    testgen::Gen g(5);
    ModelConfig c = small_config();
    c.correspondence = Correspondence::fixed_pairs;
    ModelState st = make_state(c, 12, 12, 9);
    for (auto& l : st.layers) l.filter_y = l.filter_x;
    const std::vector<Image2> b{g.image(12, 12), g.image(12, 12), g.image(12, 12)};
    const LossComponents lc = total_loss(st, b, b);
    CHECK(std::abs(lc.mmd) <= 1e-12);
    CHECK(std::abs(lc.manifold) <= 1e-9);
}

TEST_CASE("total loss components match standalone module calls") {
    testgen::Gen g(6);
    ModelConfig c;
    c.layers = {{4, 2, 2, 1, 1}};
    c.mmd_weight = 0.7;
    c.manifold_weight = 0.3;
    ModelState st = make_state(c, 6, 6, 13);
    st.layers[0].P = g.orthogonal(4) + 0.1 * g.gaussian(4, 4);
    const std::vector<Image2> bx{g.image(6, 6), g.image(6, 6)}, by{g.image(6, 6), g.image(6, 6)};
    const LossComponents lc = total_loss(st, bx, by);

    const ModelLayer& layer = st.layers[0];
    std::vector<Tensor3> zx, zy;
    for (const auto& i : bx) zx.push_back(encode_l4(to_tensor(i), layer.filter_x.weights, layer.geometry));
    for (const auto& i : by) zy.push_back(encode_l4(to_tensor(i), layer.filter_y.weights, layer.geometry));
    const auto sx = iun_scalars(zx, c.iun), sy = iun_scalars(zy, c.iun);
    const auto nx = iun(zx, c.iun), ny = iun(zy, c.iun);

    double spx = 0.0, spy = 0.0;
    for (const auto& z : nx) spx += l4_norm4(z.as_matrix());
    for (const auto& z : ny) spy += l4_norm4(z.as_matrix());
    CHECK(lc.sparsity_x == doctest::Approx(spx).epsilon(1e-12));
    CHECK(lc.sparsity_y == doctest::Approx(spy).epsilon(1e-12));

    auto recon = [&](const std::vector<Image2>& imgs, const std::vector<Tensor3>& z, const std::vector<double>& s,
                     const Matrix& A) {
        double r = 0.0;
        for (std::size_t i = 0; i < imgs.size(); ++i) {
            Tensor3 t = z[i];
            for (double& v : t.data) v /= s[i];
            const Image2 back = to_image(decode_l4(t, A, layer.geometry));
            r += 0.5 * oracle::mse(imgs[i], back) * static_cast<double>(back.size());
        }
        return r;
    };
    CHECK(lc.recon_x == doctest::Approx(recon(bx, nx, sx, layer.filter_x.weights)).epsilon(1e-10));
    CHECK(lc.recon_y == doctest::Approx(recon(by, ny, sy, layer.filter_y.weights)).epsilon(1e-10));

    std::vector<std::vector<Vector>> vx(1), vy(1);
    for (const auto& z : nx) vx[0].push_back(vectorize(mix_channels(layer.P, z)));
    for (const auto& z : ny) vy[0].push_back(vectorize(z));
    std::vector<Vector> pooled = vx[0];
    pooled.insert(pooled.end(), vy[0].begin(), vy[0].end());
    const double mmd = oracle::multilayer_mmd(vx, vy, {oracle::median_sqdist(pooled)});
    CHECK(lc.mmd == doctest::Approx(c.mmd_weight * mmd).epsilon(1e-10));

    const Matrix w = pair_weights(nx, ny, layer.P, c);
    double man = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int j = 0; j < 2; ++j) {
            Matrix B = layer.P * oracle::covariance(nx[a].as_matrix(), false, 0.0) * layer.P.transpose();
            B.diagonal().array() += c.manifold.ridge;
            const Matrix Cy = oracle::covariance(ny[j].as_matrix(), false, c.manifold.ridge);
            man += w(a, j) * oracle::spd_distance(Cy, B);
        }
    CHECK(lc.manifold == doctest::Approx(c.manifold_weight * man).epsilon(1e-8));
    CHECK(std::abs(w.sum() - 1.0) <= 1e-12);
}

TEST_CASE("adaptation gradient matches central differences") {
    testgen::Gen g(7);
    ModelConfig c;
    c.ls_weight = 0.6;
    c.mmd_weight = 1.3;
    c.manifold_weight = 0.4;
    c.kernel.policy = BandwidthPolicy::fixed;
    c.kernel.bandwidth = 20.0;
    std::vector<detail::LayerBlocks> blocks;
    std::vector<Matrix> P;
    for (int l = 0; l < 2; ++l) {
        std::vector<Tensor3> zx, zy;
        for (int i = 0; i < 3; ++i) zx.push_back(g.tensor(3, 4, 4));
        for (int i = 0; i < 4; ++i) zy.push_back(g.tensor(3, 4, 4));
        blocks.push_back(detail::make_blocks(zx, zy, &c.manifold));
        P.push_back(Matrix::Identity(3, 3) + 0.2 * g.gaussian(3, 3));
    }
    std::vector<const detail::LayerBlocks*> bp{&blocks[0], &blocks[1]};
    Matrix w(3, 4);
    for (int a = 0; a < 3; ++a)
        for (int j = 0; j < 4; ++j) w(a, j) = g.uniform(0.1, 1.0);
    w /= w.sum();
    auto value = [&](const std::vector<Matrix>& Q) {
        const detail::AdaptTerms t = detail::adaptation_objective(bp, Q, w, c, nullptr);
        return c.ls_weight * t.ls + c.mmd_weight * t.mmd + c.manifold_weight * t.manifold;
    };
    std::vector<Matrix> grads;
    detail::adaptation_objective(bp, P, w, c, &grads);
    const double h = 1e-6;
    double worst = 0.0;
    for (int l = 0; l < 2; ++l)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                auto plus = P, minus = P;
                plus[l](i, j) += h;
                minus[l](i, j) -= h;
                const double fd = (value(plus) - value(minus)) / (2.0 * h);
                worst = std::max(worst, std::abs(fd - grads[l](i, j)) / std::max(1.0, std::abs(fd)));
            }
    CHECK(worst <= 1e-5);
}

TEST_CASE("one-epoch smoke run logs finite components") {
    ModelConfig c;
    c.layers = {{4, 2, 2, 1, 1}};
    c.epochs = 1;
    const auto x = phantoms("gamma:2.0", 4, 10, true), y = phantoms("gamma:2.0", 4, 20, false);
    const ModelState st = train(x, y, c);
    REQUIRE(st.training_log.size() == 1);
    const LossComponents& e = st.training_log[0];
    for (double v : {e.sparsity_x, e.sparsity_y, e.recon_x, e.recon_y, e.mmd, e.manifold, e.combined})
        CHECK(std::isfinite(v));
    CHECK(st.trained);
}

TEST_CASE("empty dataset is rejected") {
    const auto x = phantoms("identity", 2, 1, true);
    CHECK_THROWS_AS(train({}, x, ModelConfig{}), PreconditionError);
    CHECK_THROWS_AS(train(x, {}, ModelConfig{}), PreconditionError);
}

TEST_CASE("training log sums, orthogonality and determinism") {
    const ModelConfig c = small_config();
    const auto x = phantoms("gamma:2.0", 8, 30, true), y = phantoms("gamma:2.0", 8, 40, false);
    const ModelState a = train(x, y, c);
    const ModelState b = train(x, y, c);
    REQUIRE(a.training_log.size() == 3);
    for (const auto& e : a.training_log) {
        const double sum = e.recon_x + e.recon_y + e.mmd + e.manifold - c.lambda * (e.sparsity_x + e.sparsity_y);
        CHECK(std::abs(e.combined - sum) <= 1e-12 * std::max(1.0, std::abs(sum)));
        for (double v : {e.sparsity_x, e.sparsity_y, e.recon_x, e.recon_y, e.mmd, e.manifold}) CHECK(v >= 0.0);
    }
    for (const auto& l : a.layers) {
        CHECK(orthogonality_error(l.filter_x.weights) <= 1e-8);
        CHECK(orthogonality_error(l.filter_y.weights) <= 1e-8);
    }
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        CHECK(a.layers[l].filter_x.weights == b.layers[l].filter_x.weights);
        CHECK(a.layers[l].filter_y.weights == b.layers[l].filter_y.weights);
        CHECK(a.layers[l].P == b.layers[l].P);
    }
    for (std::size_t e = 0; e < a.training_log.size(); ++e) CHECK(a.training_log[e].combined == b.training_log[e].combined);
}

TEST_CASE("identity task synthesizes its input") {
    ModelConfig c;
    c.layers = {{25, 5, 5, 1, 1}};
    c.correspondence = Correspondence::fixed_pairs;
    c.mmd_weight = 0.0;
    c.manifold_weight = 0.0;
    c.epochs = 2;
    c.batch_size = 8;
    const auto x = phantoms("identity", 8, 50, true);
    const ModelState st = train(x, x, c);
    const auto test = phantoms("identity", 3, 90, true);
    for (const auto& img : test) CHECK(oracle::psnr(img, synthesize(img, st)) > 40.0);
}

TEST_CASE("a zero associator gives a constant output") {
    ModelConfig c = small_config();
    ModelState st = make_state(c, 16, 16, 3);
    st.layers.back().P.setZero();
    const auto img = phantoms("identity", 1, 7, true)[0];
    const Image2 out = synthesize(img, st);
    const auto [lo, hi] = std::minmax_element(out.data.begin(), out.data.end());
    CHECK(*lo == *hi);
}

TEST_CASE("untrained state cannot synthesize") {
    ModelState st = make_state(small_config(), 16, 16, 3);
    st.trained = false;
    CHECK_THROWS_AS(synthesize(Image2(16, 16, 0.5), st), PreconditionError);
}

TEST_CASE("intensity remap task keeps rank order") {
    ModelConfig c;
    const auto x = phantoms("gamma:2.0", 20, 100, true, 32), y = phantoms("gamma:2.0", 20, 200, false, 32);
    const ModelState st = train(x, y, c);
    std::vector<double> in, out;
    for (const auto& img : phantoms("gamma:2.0", 4, 300, true, 32)) {
        const Image2 o = synthesize(img, st);
        in.insert(in.end(), img.data.begin(), img.data.end());
        out.insert(out.end(), o.data.begin(), o.data.end());
    }
    CHECK(oracle::spearman(in, out) > 0.9);
}
