#include "cscl4/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "adaptation.hpp"
#include "cscl4/error.hpp"
#include "cscl4/l4.hpp"
#include "cscl4/linalg.hpp"
#include "cscl4/parallel.hpp"

namespace cscl4 {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::vector<Tensor3> as_tensors(const std::vector<Image2>& imgs) {
    std::vector<Tensor3> out;
    out.reserve(imgs.size());
    for (const auto& i : imgs) out.push_back(to_tensor(i));
    return out;
}

std::vector<Tensor3> encode_all(const std::vector<Tensor3>& inputs, const Matrix& A, const PatchGeometry& g) {
    std::vector<Tensor3> out(inputs.size());
    parallel_for(inputs.size(), [&](std::size_t i) { out[i] = encode_l4(inputs[i], A, g); });
    return out;
}

Matrix stacked_patches(const std::vector<Tensor3>& inputs, const PatchGeometry& g) {
    Matrix Y(g.dim(), static_cast<Eigen::Index>(g.count()) * static_cast<Eigen::Index>(inputs.size()));
    for (std::size_t i = 0; i < inputs.size(); ++i)
        Y.middleCols(static_cast<Eigen::Index>(i) * g.count(), g.count()) = extract_patches(inputs[i], g);
    const double rms = std::sqrt(Y.squaredNorm() / static_cast<double>(Y.size()));
    if (!(rms > 0.0)) throw DegenerateInputError("all patches are zero");
    return Y / rms;
}

std::size_t adapt_begin(const ModelConfig& c, std::size_t L) {
    return L > static_cast<std::size_t>(c.adapt_top) ? L - static_cast<std::size_t>(c.adapt_top) : 0;
}

[[noreturn]] void rethrow_with(const std::string& ctx) {
    try {
        throw;
    } catch (const DegenerateInputError& e) {
        throw DegenerateInputError(ctx + ": " + e.what(), e.index());
    } catch (const SolverError& e) {
        throw SolverError(ctx + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError(ctx + ": " + e.what());
    } catch (const DimensionError& e) {
        throw DimensionError(ctx + ": " + e.what());
    }
}

struct Adam {
    Matrix m, v;
    int t = 0;

    void step(Matrix& P, const Matrix& g, double lr) {
        if (m.size() == 0) {
            m = Matrix::Zero(P.rows(), P.cols());
            v = Matrix::Zero(P.rows(), P.cols());
        }
        ++t;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g.cwiseProduct(g);
        const double c1 = 1.0 - std::pow(0.9, t), c2 = 1.0 - std::pow(0.999, t);
        P.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + 1e-8);
    }
};

} // namespace

void ModelState::check_invariants() const {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        try {
            layers[l].filter_x.check_invariants();
            layers[l].filter_y.check_invariants();
        } catch (const Error& e) {
            throw NumericError("layer " + std::to_string(l) + ": " + e.what());
        }
        if (!layers[l].P.allFinite()) throw NumericError("layer " + std::to_string(l) + ": non-finite associator");
    }
    for (const auto& e : training_log)
        for (double v : {e.sparsity_x, e.sparsity_y, e.recon_x, e.recon_y, e.mmd, e.manifold, e.combined})
            if (!std::isfinite(v)) throw NumericError("non-finite training log entry");
}

std::vector<Tensor3> forward(const std::vector<Tensor3>& inputs, const FilterBank& filters, const PatchGeometry& g,
                             const IunParams* iun_params) {
    if (inputs.empty()) throw PreconditionError("forward needs at least one input");
    std::vector<Tensor3> codes = encode_all(inputs, filters.weights, g);
    if (iun_params) codes = iun(codes, *iun_params);
    return codes;
}

EncodedStack encode_stack(const std::vector<Image2>& images, const ModelState& state, bool source) {
    if (images.empty()) throw PreconditionError("no images to encode");
    EncodedStack out;
    std::vector<Tensor3> cur = as_tensors(images);
    for (const auto& layer : state.layers) {
        const FilterBank& f = source ? layer.filter_x : layer.filter_y;
        cur = encode_all(cur, f.weights, layer.geometry);
        std::vector<double> s(cur.size(), 1.0);
        if (state.config.use_iun) {
            s = iun_scalars(cur, state.config.iun);
            for (std::size_t i = 0; i < cur.size(); ++i)
                for (double& v : cur[i].data) v *= s[i];
        }
        out.codes.push_back(cur);
        out.scalars.push_back(std::move(s));
    }
    return out;
}

Associator update_associator(const std::vector<Tensor3>& codes_x, const std::vector<Tensor3>& codes_y,
                             const Matrix& weights, double ridge) {
    const auto S = static_cast<Eigen::Index>(codes_x.size()), T = static_cast<Eigen::Index>(codes_y.size());
    if (S == 0 || T == 0) throw PreconditionError("associator needs codes from both modalities");
    if (weights.rows() != S || weights.cols() != T) throw DimensionError("pair weights must be S x T");
    if (!(ridge >= 0.0)) throw PreconditionError("ridge must be >= 0");
    if ((weights.array() < 0.0).any() || !(weights.sum() > 0.0))
        throw PreconditionError("pair weights are degenerate (all zero or negative)");
    const int Kx = codes_x[0].channels, Ky = codes_y[0].channels;
    const std::size_t n = codes_x[0].plane();
    for (const auto& z : codes_x)
        if (z.channels != Kx || z.plane() != n) throw DimensionError("ragged source codes");
    for (const auto& z : codes_y)
        if (z.channels != Ky || z.plane() != n) throw DimensionError("target codes do not match source positions");

    Matrix G = Matrix::Zero(Kx, Kx), H = Matrix::Zero(Ky, Kx);
    for (Eigen::Index a = 0; a < S; ++a) {
        const Matrix X = codes_x[a].as_matrix();
        const double r = weights.row(a).sum();
        if (r == 0.0) continue;
        G += r * X * X.transpose();
        Matrix Yw = Matrix::Zero(Ky, static_cast<Eigen::Index>(n));
        for (Eigen::Index j = 0; j < T; ++j)
            if (weights(a, j) != 0.0) Yw += weights(a, j) * codes_y[j].as_matrix();
        H += Yw * X.transpose();
    }
    G = 0.5 * (G + G.transpose());
    Matrix A = G;
    A.diagonal().array() += ridge;

    Associator out;
    out.ridge = ridge;
    const SymEig e = sym_eig(A);
    const double lo = std::abs(e.values(0)), hi = std::abs(e.values(e.values.size() - 1));
    out.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    out.ill_conditioned = out.condition > 1e10;
    // P A = H  <=>  A P^T = H^T
    out.P = A.completeOrthogonalDecomposition().solve(H.transpose()).transpose();
    if (!out.P.allFinite()) throw NumericError("associator solve produced non-finite entries");

    double res = 0.0;
    for (Eigen::Index a = 0; a < S; ++a) {
        const Matrix PX = out.P * codes_x[a].as_matrix();
        for (Eigen::Index j = 0; j < T; ++j)
            if (weights(a, j) != 0.0) res += weights(a, j) * (codes_y[j].as_matrix() - PX).squaredNorm();
    }
    out.residual = res;
    return out;
}

Matrix pair_weights(const std::vector<Tensor3>& top_x, const std::vector<Tensor3>& top_y, const Matrix& P_top,
                    const ModelConfig& c) {
    const auto S = static_cast<Eigen::Index>(top_x.size()), T = static_cast<Eigen::Index>(top_y.size());
    if (S == 0 || T == 0) throw PreconditionError("pair weights need both modalities");
    if (c.correspondence == Correspondence::fixed_pairs) {
        if (S != T) throw PreconditionError("fixed pairs need equally many source and target samples");
        return Matrix::Identity(S, T) / static_cast<double>(S);
    }
    const detail::LayerBlocks b = detail::make_blocks(top_x, top_y, nullptr);
    Matrix dxx, dxy;
    detail::pair_distances(b, P_top, dxx, dxy);
    const double p = c.kernel.policy == BandwidthPolicy::fixed ? c.kernel.bandwidth
                                                                 : detail::pooled_median(dxx, dxy, b.dyy);
    Matrix w = (-dxy.array() / p).exp().matrix();
    for (Eigen::Index a = 0; a < S; ++a) {
        const double r = w.row(a).sum();
        if (r > 0.0) {
            w.row(a) /= r;
        } else {
            w.row(a).setConstant(1.0 / static_cast<double>(T));
        }
    }
    return w / static_cast<double>(S);
}

LossComponents total_loss(const ModelState& state, const std::vector<Image2>& batch_x,
                          const std::vector<Image2>& batch_y) {
    if (state.layers.empty()) throw PreconditionError("model has no layers");
    const ModelConfig& c = state.config;
    const EncodedStack ex = encode_stack(batch_x, state, true);
    const EncodedStack ey = encode_stack(batch_y, state, false);
    const std::size_t L = state.layers.size();

    LossComponents out;
    for (std::size_t l = 0; l < L; ++l) {
        for (const auto& z : ex.codes[l]) out.sparsity_x += l4_norm4(z.as_matrix());
        for (const auto& z : ey.codes[l]) out.sparsity_y += l4_norm4(z.as_matrix());
    }

    auto recon = [&](const EncodedStack& e, const std::vector<Image2>& imgs, bool source) {
        std::vector<double> r(imgs.size());
        parallel_for(imgs.size(), [&](std::size_t i) {
            Tensor3 z = e.codes[L - 1][i];
            for (std::size_t l = L; l-- > 0;) {
                const double s = e.scalars[l][i];
                for (double& v : z.data) v /= s;
                const auto& layer = state.layers[l];
                z = decode_l4(z, (source ? layer.filter_x : layer.filter_y).weights, layer.geometry);
            }
            double acc = 0.0;
            for (std::size_t k = 0; k < z.size(); ++k) acc += (imgs[i].data[k] - z.data[k]) * (imgs[i].data[k] - z.data[k]);
            r[i] = 0.5 * acc;
        });
        double s = 0.0;
        for (double v : r) s += v;
        return s;
    };
    out.recon_x = recon(ex, batch_x, true);
    out.recon_y = recon(ey, batch_y, false);

    const std::size_t a0 = adapt_begin(c, L);
    if (c.mmd_weight > 0.0) {
        LayerStack sx, sy;
        std::vector<KernelParams> kp;
        for (std::size_t l = a0; l < L; ++l) {
            Batch bx, by;
            for (const auto& z : ex.codes[l]) bx.push_back(vectorize(mix_channels(state.layers[l].P, z)));
            for (const auto& z : ey.codes[l]) by.push_back(vectorize(z));
            sx.push_back(std::move(bx));
            sy.push_back(std::move(by));
            kp.push_back(c.kernel);
        }
        out.mmd = c.mmd_weight * multilayer_mmd(sx, sy, kp).value;
    }
    if (c.manifold_weight > 0.0) {
        const Matrix w = pair_weights(ex.codes[L - 1], ey.codes[L - 1], state.layers[L - 1].P, c);
        std::vector<std::vector<Tensor3>> sx(ex.codes.begin() + static_cast<std::ptrdiff_t>(a0), ex.codes.end());
        std::vector<std::vector<Tensor3>> sy(ey.codes.begin() + static_cast<std::ptrdiff_t>(a0), ey.codes.end());
        std::vector<Matrix> P;
        for (std::size_t l = a0; l < L; ++l) P.push_back(state.layers[l].P);
        out.manifold = c.manifold_weight * manifold_loss(sx, sy, P, w, c.manifold);
    }
    out.combined = out.recon_x + out.recon_y + out.mmd + out.manifold - c.lambda * (out.sparsity_x + out.sparsity_y);
    return out;
}

ModelState train(const std::vector<Image2>& dataset_x, const std::vector<Image2>& dataset_y, const ModelConfig& c,
                 const EpochCallback& on_epoch) {
    validate(c);
    if (dataset_x.empty() || dataset_y.empty()) throw PreconditionError("training needs images from both modalities");
    const int H = dataset_x[0].height, W = dataset_x[0].width;
    for (const auto* set : {&dataset_x, &dataset_y})
        for (const auto& img : *set) {
            if (img.height != H || img.width != W) throw DimensionError("training images differ in size");
            require_finite(img.data, "training image");
        }
    if (c.correspondence == Correspondence::fixed_pairs && dataset_x.size() != dataset_y.size())
        throw PreconditionError("fixed pairs need equally many source and target images");

    ModelState st;
    st.config = c;
    st.height = H;
    st.width = W;
    const auto geoms = layer_geometries(c, H, W);
    const auto specs = expand_layers(c.layers);
    for (std::size_t l = 0; l < geoms.size(); ++l) {
        ModelLayer layer;
        layer.geometry = geoms[l];
        layer.filter_x = FilterBank(specs[l].filters, geoms[l].fh, geoms[l].fw, geoms[l].channels, true);
        layer.filter_x.weights = random_orthogonal(specs[l].filters, geoms[l].dim(), mix_seed(c.seed, l));
        layer.filter_y = layer.filter_x;
        layer.P = Matrix::Identity(specs[l].filters, specs[l].filters);
        st.layers.push_back(std::move(layer));
    }
    double nx = 0.0, ny = 0.0;
    for (const auto& i : dataset_x) nx += norm2(i.data);
    for (const auto& i : dataset_y) ny += norm2(i.data);
    if (!(nx > 0.0) || !(ny > 0.0)) throw DegenerateInputError("a training modality is entirely zero");
    st.scale_ratio = (ny / static_cast<double>(dataset_y.size())) / (nx / static_cast<double>(dataset_x.size()));

    const std::size_t L = st.layers.size();
    const std::size_t a0 = adapt_begin(c, L);
    std::vector<bool> p_ready(L, false);
    std::vector<Adam> adam(L);
    std::mt19937_64 rng(mix_seed(c.seed, 1000));
    const IunParams* iun_ptr = c.use_iun ? &c.iun : nullptr;

    for (int epoch = 0; epoch < c.epochs; ++epoch) {
        std::vector<std::size_t> px(dataset_x.size()), py(dataset_y.size());
        std::iota(px.begin(), px.end(), 0);
        std::iota(py.begin(), py.end(), 0);
        std::shuffle(px.begin(), px.end(), rng);
        if (c.correspondence == Correspondence::fixed_pairs) {
            py = px;
        } else {
            std::shuffle(py.begin(), py.end(), rng);
        }
        const std::size_t longest = std::max(px.size(), py.size());
        const std::size_t nb = (longest + static_cast<std::size_t>(c.batch_size) - 1) / static_cast<std::size_t>(c.batch_size);
        for (std::size_t b = 0; b < nb; ++b) {
            std::vector<Image2> bx, by;
            for (std::size_t i = b * px.size() / nb; i < (b + 1) * px.size() / nb; ++i) bx.push_back(dataset_x[px[i]]);
            for (std::size_t i = b * py.size() / nb; i < (b + 1) * py.size() / nb; ++i) by.push_back(dataset_y[py[i]]);
            if (bx.empty() || by.empty()) continue;
            std::size_t layer_ctx = 0;
            try {
                Matrix w;
                {
                    const EncodedStack ex = encode_stack(bx, st, true);
                    const EncodedStack ey = encode_stack(by, st, false);
                    w = pair_weights(ex.codes[L - 1], ey.codes[L - 1], st.layers[L - 1].P, c);
                }
                std::vector<std::vector<Tensor3>> zx(L), zy(L);
                std::vector<Tensor3> cx = as_tensors(bx), cy = as_tensors(by);
                for (std::size_t l = 0; l < L; ++l) {
                    layer_ctx = l;
                    ModelLayer& layer = st.layers[l];
                    const PatchGeometry& g = layer.geometry;
                    const int K = layer.filter_x.count;
                    const L4Problem prob_x{stacked_patches(cx, g), K, c.msp_iters, 1e-6};
                    const L4Problem prob_y{stacked_patches(cy, g), K, c.msp_iters, 1e-6};
                    layer.filter_x.weights = solve_l4(prob_x, layer.filter_x.weights).A;
                    layer.filter_y.weights = align_rows(layer.filter_x.weights, solve_l4(prob_y, layer.filter_y.weights).A);
                    cx = forward(cx, layer.filter_x, g, iun_ptr);
                    cy = forward(cy, layer.filter_y, g, iun_ptr);
                    zx[l] = cx;
                    zy[l] = cy;
                    if (!p_ready[l] || !c.adapting() || l < a0) {
                        layer.P = update_associator(cx, cy, w, c.ridge).P;
                        p_ready[l] = true;
                    }
                }
                if (c.adapting() && c.p_steps > 0) {
                    layer_ctx = L - 1;
                    std::vector<detail::LayerBlocks> blocks;
                    for (std::size_t l = a0; l < L; ++l)
                        blocks.push_back(detail::make_blocks(zx[l], zy[l], c.manifold_weight > 0.0 ? &c.manifold : nullptr));
                    std::vector<const detail::LayerBlocks*> bp;
                    for (const auto& bl : blocks) bp.push_back(&bl);
                    for (int s = 0; s < c.p_steps; ++s) {
                        std::vector<Matrix> P, grads;
                        for (std::size_t l = a0; l < L; ++l) P.push_back(st.layers[l].P);
                        detail::adaptation_objective(bp, P, w, c, &grads);
                        for (std::size_t l = a0; l < L; ++l) adam[l].step(st.layers[l].P, grads[l - a0], c.learning_rate);
                    }
                }
            } catch (const Error&) {
                rethrow_with("epoch " + std::to_string(epoch + 1) + ", layer " + std::to_string(layer_ctx + 1));
            }
        }
        LossComponents lc;
        try {
            lc = total_loss(st, dataset_x, dataset_y);
        } catch (const Error&) {
            rethrow_with("epoch " + std::to_string(epoch + 1) + ", loss evaluation");
        }
        st.training_log.push_back(lc);
        st.check_invariants();
        if (on_epoch) on_epoch(epoch + 1, lc);
    }
    st.trained = true;
    return st;
}

Image2 synthesize(const Image2& image, const ModelState& state) {
    if (!state.trained || state.layers.empty()) throw PreconditionError("model is not trained");
    if (image.height != state.height || image.width != state.width)
        throw DimensionError("image is " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                             ", model expects " + std::to_string(state.height) + "x" + std::to_string(state.width));
    require_finite(image.data, "synthesis input");
    const EncodedStack e = encode_stack({image}, state, true);
    const std::size_t L = state.layers.size();
    Tensor3 z = mix_channels(state.layers[L - 1].P, e.codes[L - 1][0]);
    const double gain = norm2(z.data) / norm2(e.codes[L - 1][0].data); // associator gain on the unit code
    for (std::size_t l = L; l-- > 0;) z = decode_l4(z, state.layers[l].filter_y.weights, state.layers[l].geometry);
    Image2 out = to_image(z);
    if (state.config.use_iun) {
        const double n = norm2(out.data);
        if (n > 0.0) {
            const double target = norm2(image.data) * state.scale_ratio * gain;
            for (double& v : out.data) v *= target / n;
        }
    }
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

} // namespace cscl4
